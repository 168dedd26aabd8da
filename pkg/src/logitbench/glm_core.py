"""Logistic likelihood machinery: IRLS maximum likelihood, Firth fits, Wald inference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .errors import NoConvergence, SeparationSuspected, SingularInformation

GRAD_TOL = 1e-8
MAX_ITER_MLE = 100
MAX_ITER_FIRTH = 200
MAX_HALVINGS = 20
DIVERGENCE_GUARD = 30.0


@dataclass
class FitResult:
    beta: np.ndarray  # intercept first when the design carries one
    se: np.ndarray
    pvalues: np.ndarray
    loglik: float
    converged: bool
    iterations: int


def add_intercept(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.column_stack([np.ones(X.shape[0]), X])


def loglik_grad_hess(beta, X, y, include_intercept=True):
    """Value, gradient, and Hessian of the logistic log-likelihood.

    Stable for linear predictors up to |eta| ~ 700 via the logaddexp form.
    """
    Xd = add_intercept(X) if include_intercept else np.atleast_2d(np.asarray(X, float))
    beta = np.asarray(beta, dtype=float)
    y = np.asarray(y, dtype=float)
    eta = Xd @ beta
    # log(1 + exp(eta)) without overflow
    value = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    pi = expit(eta)
    grad = Xd.T @ (y - pi)
    w = pi * (1.0 - pi)
    hess = -(Xd.T * w) @ Xd
    return value, grad, hess


def _loglik(beta, Xd, y):
    eta = Xd @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def _wald(beta, cov):
    se = np.sqrt(np.clip(np.diag(cov), 0.0, np.inf))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pvalues = 2.0 * norm.sf(np.abs(z))
    return se, np.clip(pvalues, 0.0, 1.0)


def fit_mle(X, y, include_intercept=True) -> FitResult:
    """Newton/IRLS maximum likelihood with step halving and a divergence guard."""
    Xd = add_intercept(X) if include_intercept else np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise SingularInformation("outcome has a single class")

    d = Xd.shape[1]
    beta = np.zeros(d)
    ll = _loglik(beta, Xd, y)
    converged = False
    it = 0
    for it in range(1, MAX_ITER_MLE + 1):
        pi = expit(Xd @ beta)
        grad = Xd.T @ (y - pi)
        if np.max(np.abs(grad)) <= GRAD_TOL:
            converged = True
            it -= 1
            break
        w = pi * (1.0 - pi)
        info = (Xd.T * w) @ Xd
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise SingularInformation("X'WX is singular") from None
        if not np.all(np.isfinite(step)):
            raise SingularInformation("X'WX is numerically singular")
        # step halving if the step decreases the log-likelihood
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + scale * step
            ll_new = _loglik(cand, Xd, y)
            if ll_new >= ll - 1e-12:
                break
            scale *= 0.5
        beta, ll = cand, ll_new
        if np.max(np.abs(beta)) > DIVERGENCE_GUARD:
            raise SeparationSuspected(
                f"coefficient magnitude exceeded {DIVERGENCE_GUARD} during IRLS"
            )
    else:
        converged = False

    pi = expit(Xd @ beta)
    w = pi * (1.0 - pi)
    info = (Xd.T * w) @ Xd
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise SingularInformation("observed information is singular") from None
    se, pvalues = _wald(beta, cov)
    return FitResult(beta, se, pvalues, ll, converged, it)


def firth_penalized_loglik(beta, Xd, y):
    pi = expit(Xd @ beta)
    w = pi * (1.0 - pi)
    info = (Xd.T * w) @ Xd
    sign, logdet = np.linalg.slogdet(info)
    if sign <= 0:
        return -np.inf
    return _loglik(beta, Xd, y) + 0.5 * logdet


def fit_firth(X, y, include_intercept=True) -> FitResult:
    """Firth's bias-reduced fit via modified-score Newton iterations."""
    Xd = add_intercept(X) if include_intercept else np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, dtype=float)
    d = Xd.shape[1]
    beta = np.zeros(d)
    pll = firth_penalized_loglik(beta, Xd, y)
    converged = False
    it = 0
    for it in range(1, MAX_ITER_FIRTH + 1):
        pi = expit(Xd @ beta)
        w = pi * (1.0 - pi)
        info = (Xd.T * w) @ Xd
        try:
            info_inv = np.linalg.inv(info)
        except np.linalg.LinAlgError:
            raise SingularInformation("X'WX is singular in Firth fit") from None
        # hat-matrix diagonal of W^1/2 X (X'WX)^-1 X' W^1/2
        h = np.einsum("ij,jk,ik->i", Xd, info_inv, Xd) * w
        score = Xd.T @ (y - pi + h * (0.5 - pi))
        if np.max(np.abs(score)) <= GRAD_TOL:
            converged = True
            it -= 1
            break
        step = info_inv @ score
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + scale * step
            pll_new = firth_penalized_loglik(cand, Xd, y)
            if pll_new >= pll - 1e-12:
                break
            scale *= 0.5
        beta, pll = cand, pll_new
    if not converged:
        raise NoConvergence(f"Firth fit did not converge in {MAX_ITER_FIRTH} iterations")

    pi = expit(Xd @ beta)
    w = pi * (1.0 - pi)
    info = (Xd.T * w) @ Xd
    cov = np.linalg.inv(info)
    se, pvalues = _wald(beta, cov)
    return FitResult(beta, se, pvalues, pll, converged, it)


def predict_probs(beta, X_new, include_intercept=True) -> np.ndarray:
    """Element-wise logistic transform of the linear predictor, kept in (0,1)."""
    Xd = (
        add_intercept(X_new)
        if include_intercept
        else np.atleast_2d(np.asarray(X_new, float))
    )
    probs = expit(Xd @ np.asarray(beta, dtype=float))
    tiny = np.finfo(float).tiny
    return np.clip(probs, tiny, 1.0 - np.finfo(float).epsneg)


def wald_interval(fit: FitResult, level: float = 0.95):
    z = norm.ppf(0.5 + level / 2.0)
    return fit.beta - z * fit.se, fit.beta + z * fit.se
