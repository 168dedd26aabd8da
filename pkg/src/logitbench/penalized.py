"""Penalized logistic regression over a regularization path.

Outer IRLS quadratic approximation with inner cyclic coordinate descent;
ridge, elastic net, LASSO, MCP, and SCAD share the same machinery and the
hot sweep kernel (compiled or pure-Python, see _kernels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import _kernels
from .errors import NoConvergence
from .ingest import make_folds

COEF_TOL = 1e-7
MAX_SWEEPS = 10_000
WEIGHT_FLOOR = 1e-5
DEFAULT_GAMMA = {"mcp": 3.0, "scad": 3.7}

_FAMILY_CODE = {
    "ridge": _kernels.FAMILY_EN,
    "elastic_net": _kernels.FAMILY_EN,
    "lasso": _kernels.FAMILY_EN,
    "mcp": _kernels.FAMILY_MCP,
    "scad": _kernels.FAMILY_SCAD,
}
_FAMILY_ALPHA = {"ridge": 0.0, "elastic_net": 0.5, "lasso": 1.0, "mcp": 1.0, "scad": 1.0}


@dataclass(frozen=True)
class PenaltySpec:
    family: str
    alpha: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILY_CODE:
            raise ValueError(f"unknown penalty family {self.family!r}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", _FAMILY_ALPHA[self.family])
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.gamma is None and self.family in DEFAULT_GAMMA:
            object.__setattr__(self, "gamma", DEFAULT_GAMMA[self.family])
        if self.family == "mcp" and self.gamma <= 1.0:
            raise ValueError("MCP needs gamma > 1")
        if self.family == "scad" and self.gamma <= 2.0:
            raise ValueError("SCAD needs gamma > 2")

    @property
    def code(self) -> int:
        return _FAMILY_CODE[self.family]

    @property
    def gamma_value(self) -> float:
        return self.gamma if self.gamma is not None else 0.0


@dataclass
class PathResult:
    lambdas: np.ndarray
    coefs: np.ndarray  # (p+1) x L, intercept first
    selected_lambda: float
    cv_deviance: np.ndarray


def lambda_path(X, y, spec: PenaltySpec, L: int = 100) -> np.ndarray:
    """Log-linear grid from lambda_max down to a dimension-dependent fraction."""
    if L < 2:
        raise ValueError("need at least 2 grid points")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    lam_max = np.max(np.abs(X.T @ (y - y.mean()))) / (n * max(spec.alpha, 0.001))
    if lam_max <= 0:  # outcome orthogonal to every predictor
        lam_max = 1e-3
    ratio = 1e-4 if n > p else 1e-2
    return np.exp(np.linspace(np.log(lam_max), np.log(lam_max * ratio), L))


def fit_penalized(X, y, spec: PenaltySpec, lam: float, warm=None,
                  record_objective=False):
    """Minimize the average negative log-likelihood plus the penalty.

    Returns (beta, trace) where beta has the unpenalized intercept first and
    trace is the per-sweep quadratic objective (empty unless requested).
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape

    if warm is not None:
        intercept = float(warm[0])
        beta = np.array(warm[1:], dtype=float)
    else:
        intercept = 0.0
        beta = np.zeros(p)

    trace: list[float] = []
    sweeps_left = MAX_SWEEPS
    for _ in range(100):
        eta = intercept + X @ beta
        pi = expit(eta)
        w = np.maximum(pi * (1.0 - pi), WEIGHT_FLOOR)
        r = (y - pi) / w  # working residual z - eta at the current iterate
        before = beta.copy()
        before0 = intercept
        intercept, used, _, obj = _kernels.cd_sweeps(
            X, w, r, beta, intercept,
            float(lam), float(spec.alpha), spec.gamma_value, spec.code,
            COEF_TOL, sweeps_left, record_objective,
        )
        if obj:
            trace.extend(obj)
        sweeps_left -= used
        change = max(abs(intercept - before0), float(np.max(np.abs(beta - before))) if p else 0.0)
        if change < COEF_TOL:
            return np.concatenate([[intercept], beta]), trace
        if sweeps_left <= 0:
            raise NoConvergence(f"coordinate descent exceeded {MAX_SWEEPS} sweeps")
    raise NoConvergence("IRLS outer loop did not converge in 100 iterations")


def fit_path(X, y, spec: PenaltySpec, lambdas) -> np.ndarray:
    """Warm-started fits along a descending lambda grid; returns (p+1) x L'.

    The path is truncated at the first lambda whose fit fails to converge
    (L' <= L); under heavy overparameterization or separation the weakly
    regularized tail has no stable solution to report. Only a failure at
    the very first (largest) lambda raises.
    """
    cols = []
    warm = None
    for lam in lambdas:
        try:
            warm, _ = fit_penalized(X, y, spec, lam, warm=warm)
        except NoConvergence:
            if not cols:
                raise
            break
        cols.append(warm)
    return np.column_stack(cols)


def _binomial_deviance(probs, y) -> float:
    eps = 1e-12
    probs = np.clip(probs, eps, 1.0 - eps)
    return float(-2.0 * np.mean(y * np.log(probs) + (1 - y) * np.log(1 - probs)))


def cv_select_lambda(X, y, spec: PenaltySpec, k: int = 10, seed: int = 0,
                     L: int = 100) -> PathResult:
    """Tune lambda by k-fold CV on held-out binomial deviance, then refit."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    k = min(k, n // 2)
    lambdas = lambda_path(X, y, spec, L=L)

    folds = make_folds(y, k, seed)
    fold_dev = []
    for fold in range(1, k + 1):
        test = folds == fold
        train = ~test
        try:
            coefs = fit_path(X[train], y[train], spec, lambdas)
        except NoConvergence:
            continue
        eta = coefs[0][None, :] + X[test] @ coefs[1:]
        probs = expit(eta)
        fold_dev.append(
            [_binomial_deviance(probs[:, i], y[test]) for i in range(coefs.shape[1])]
        )
    if len(fold_dev) < (k + 1) // 2:
        raise NoConvergence(f"only {len(fold_dev)} of {k} CV folds succeeded")

    coefs = fit_path(X, y, spec, lambdas)
    # score only the prefix every fold (and the final refit) converged on
    limit = min(coefs.shape[1], *(len(d) for d in fold_dev))
    cv_deviance = np.mean(np.array([d[:limit] for d in fold_dev]), axis=0)
    best = int(np.argmin(cv_deviance))
    return PathResult(
        lambdas=lambdas[:limit],
        coefs=coefs[:, :limit],
        selected_lambda=float(lambdas[best]),
        cv_deviance=cv_deviance,
    )


def selected_coefficients(path: PathResult) -> np.ndarray:
    i = int(np.argmin(np.abs(path.lambdas - path.selected_lambda)))
    return path.coefs[:, i].copy()
