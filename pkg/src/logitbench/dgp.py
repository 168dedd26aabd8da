"""Build a data-generating model from an empirical dataset and simulate outcomes.

Four stages: (already-processed) predictors, screening for high-dimensional
inputs, stepwise model selection with ridge stabilization under separation,
and Bernoulli outcome simulation with a clipped linear predictor.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import chi2

from .classic import StepwiseConfig, stepwise_select
from .errors import EmptyModelSelected, FitError
from .glm_core import fit_mle
from .penalized import PenaltySpec, fit_penalized
from .separation import unstable_coefficients

log = logging.getLogger(__name__)

SCREEN_TRIGGER = 30
SCREEN_CORR_KEEP = 80
SCREEN_FINAL_KEEP = 30
STEPWISE_PENALTY = float(chi2.ppf(0.95, df=1))  # 3.8415
COEF_BOUND = 10.0
ETA_CLIP = 10.0
RIDGE_GRID = np.logspace(-4, 2, 25)


@dataclass
class GeneratingModel:
    selected: tuple[int, ...]
    beta_dgm: np.ndarray  # length p+1, intercept first, zeros off-model
    pi: np.ndarray
    pseudo_r2: float
    separation_handled: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "selected": list(self.selected),
                "beta_dgm": self.beta_dgm.tolist(),
                "pi": self.pi.tolist(),
                "pseudo_r2": self.pseudo_r2,
                "separation_handled": self.separation_handled,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "GeneratingModel":
        d = json.loads(text)
        return cls(
            selected=tuple(d["selected"]),
            beta_dgm=np.array(d["beta_dgm"]),
            pi=np.array(d["pi"]),
            pseudo_r2=d["pseudo_r2"],
            separation_handled=d["separation_handled"],
        )


def _mcfadden(X, y, cols) -> float:
    """Univariate (or subset) McFadden pseudo-R^2; 1.0 when the fit separates."""
    null = fit_mle(np.zeros((len(y), 0)), y)
    try:
        fit = fit_mle(np.asarray(X)[:, list(cols)], y)
    except FitError:
        return 1.0
    if null.loglik >= -1e-12:
        return 0.0
    return max(0.0, 1.0 - fit.loglik / null.loglik)


def screen_variables(X, y) -> tuple[int, ...]:
    """Correlation screening, then univariate pseudo-R^2, for p >= 30."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    if p < SCREEN_TRIGGER:
        return tuple(range(p))
    yc = y - y.mean()
    with np.errstate(invalid="ignore"):
        corr = np.abs(X.T @ yc) / (np.linalg.norm(X, axis=0) * np.linalg.norm(yc))
    corr = np.nan_to_num(corr)
    keep = np.argsort(-corr, kind="stable")[: min(p, SCREEN_CORR_KEEP)]
    if len(keep) > SCREEN_FINAL_KEEP:
        r2 = np.array([_mcfadden(X, y, [j]) for j in keep])
        keep = keep[np.argsort(-r2, kind="stable")[:SCREEN_FINAL_KEEP]]
    return tuple(sorted(int(j) for j in keep))


def _select(X, y, screened) -> tuple[int, ...]:
    """Backward stepwise, forward on failure, univariate significance last."""
    Xs = X[:, list(screened)]
    for direction in ("backward", "forward"):
        try:
            res = stepwise_select(
                Xs, y, StepwiseConfig(direction=direction, penalty_per_param=STEPWISE_PENALTY)
            )
            return tuple(screened[j] for j in res.selected)
        except FitError:
            log.info("%s stepwise failed during DGM selection", direction)
    kept = []
    for j in screened:
        try:
            fit = fit_mle(X[:, [j]], y)
            if fit.pvalues[1] < 0.05:
                kept.append(j)
        except FitError:
            kept.append(j)  # separation on a single predictor is a strong signal
    return tuple(kept)


def fit_generating_model(X, y) -> GeneratingModel:
    """Screen, select, fit, and stabilize the generating model."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    screened = screen_variables(X, y)
    selected = _select(X, y, screened)
    if not selected:
        raise EmptyModelSelected("no predictors survived DGM selection")

    Xs = X[:, list(selected)]
    separation_handled = False
    beta_sel = None
    try:
        fit = fit_mle(Xs, y)
        if not fit.converged or unstable_coefficients(fit.beta[1:], COEF_BOUND):
            beta_sel = None
        else:
            beta_sel = fit.beta
    except FitError:
        beta_sel = None

    if beta_sel is None:
        # ridge-stabilize: smallest grid lambda bringing slopes inside the bound
        separation_handled = True
        spec = PenaltySpec("ridge")
        for lam in RIDGE_GRID:
            cand, _ = fit_penalized(Xs, y, spec, float(lam))
            if not unstable_coefficients(cand[1:], COEF_BOUND):
                beta_sel = cand
                break
        else:
            beta_sel = cand

    beta_dgm = np.zeros(p + 1)
    beta_dgm[0] = beta_sel[0]
    for pos, j in enumerate(selected):
        beta_dgm[j + 1] = beta_sel[pos + 1]

    eta = np.clip(beta_dgm[0] + X @ beta_dgm[1:], -ETA_CLIP, ETA_CLIP)
    pi = expit(eta)

    null = fit_mle(np.zeros((len(y), 0)), y)
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    pseudo_r2 = max(0.0, 1.0 - ll / null.loglik) if null.loglik < -1e-12 else 0.0

    return GeneratingModel(
        selected=selected,
        beta_dgm=beta_dgm,
        pi=pi,
        pseudo_r2=pseudo_r2,
        separation_handled=separation_handled,
    )


def simulate_outcomes(gm: GeneratingModel, M: int, seed: int) -> np.ndarray:
    """M independent Bernoulli replicate outcome vectors, one row each."""
    if M < 1:
        raise ValueError("need M >= 1")
    children = np.random.SeedSequence(seed).spawn(M)
    out = np.empty((M, len(gm.pi)))
    for m, child in enumerate(children):
        rng = np.random.default_rng(child)
        out[m] = (rng.random(len(gm.pi)) < gm.pi).astype(float)
    return out
