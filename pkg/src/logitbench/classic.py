"""Full-model p-value baselines and greedy stepwise selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError
from .glm_core import FitResult, fit_mle


@dataclass(frozen=True)
class StepwiseConfig:
    direction: str = "both"  # forward | backward | both
    penalty_per_param: float = 2.0  # 2 = AIC-like, 3.841 = chi2(1, .95)
    max_steps: int = 1000

    def __post_init__(self):
        if self.direction not in ("forward", "backward", "both"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.penalty_per_param <= 0:
            raise ValueError("penalty_per_param must be positive")


@dataclass
class SelectionResult:
    selected: tuple[int, ...]
    fit: FitResult  # refit on the selected predictors (intercept first)
    criterion_trace: list[float]

    def full_beta(self, p: int) -> np.ndarray:
        beta = np.zeros(p + 1)
        beta[0] = self.fit.beta[0]
        for pos, j in enumerate(self.selected):
            beta[j + 1] = self.fit.beta[pos + 1]
        return beta


def pvalue_select(X, y, threshold: float) -> SelectionResult:
    """Fit the full model, keep Wald-significant predictors, refit once.

    threshold >= 1 degenerates to the plain full-model baseline.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    full = fit_mle(X, y)
    if threshold >= 1.0:
        return SelectionResult(tuple(range(p)), full, [])
    keep = tuple(j for j in range(p) if full.pvalues[j + 1] < threshold)
    refit = fit_mle(X[:, list(keep)], y) if keep else fit_mle(np.zeros((len(y), 0)), y)
    return SelectionResult(keep, refit, [])


def _criterion(fit: FitResult, size: int, penalty: float) -> float:
    return -2.0 * fit.loglik + penalty * (size + 1)


def stepwise_select(X, y, config: StepwiseConfig) -> SelectionResult:
    """Greedy add/drop moves minimizing -2 loglik + penalty * n_params.

    Backward and "both" start from the full model and require its MLE to
    exist; forward starts from the empty model.  Candidate moves whose fit
    fails are pruned.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    cache: dict[tuple[int, ...], FitResult | None] = {}

    def fit_model(m: tuple[int, ...]):
        if m not in cache:
            try:
                Xm = X[:, list(m)] if m else np.zeros((len(y), 0))
                cache[m] = fit_mle(Xm, y)
            except FitError:
                cache[m] = None
        return cache[m]

    current = tuple(range(p)) if config.direction in ("backward", "both") else ()
    fit = fit_model(current)
    if fit is None:
        raise FitError(f"initial {config.direction} stepwise model failed to fit")
    crit = _criterion(fit, len(current), config.penalty_per_param)
    trace = [crit]

    for _ in range(config.max_steps):
        moves = []
        if config.direction in ("forward", "both"):
            moves += [tuple(sorted(current + (j,))) for j in range(p) if j not in current]
        if config.direction in ("backward", "both"):
            moves += [tuple(j for j in current if j != d) for d in current]
        best = None
        for m in moves:
            cand = fit_model(m)
            if cand is None:
                continue
            c = _criterion(cand, len(m), config.penalty_per_param)
            if c < crit - 1e-10 and (best is None or c < best[0]):
                best = (c, m, cand)
        if best is None:
            break
        crit, current, fit = best
        trace.append(crit)

    return SelectionResult(current, fit, trace)
