"""Bayesian model averaging for logistic regression.

Model-space prior (truncated beta-binomial), Laplace-approximated marginal
likelihoods under g-prior families (fixed g, mixtures of g, empirical Bayes,
AIC/BIC pseudo-priors), exhaustive enumeration, MC3 exploration, and
posterior summaries.
"""

from __future__ import annotations

import functools
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .errors import EnumerationRequired, FitError, SingularInformation
from .glm_core import fit_mle

log = logging.getLogger(__name__)

ENUMERATION_THRESHOLD = 20
MC3_DEFAULT_ITERATIONS = 10_000
SUMMARY_DRAWS = 10_000
EB_LOG_G_RANGE = (-10.0, 20.0)

ModelId = tuple[int, ...]

# Preset hyperparameters for the named mixture densities.  The CCH b
# parameter and the robust/intrinsic truncation points depend on (n, |m|)
# and are resolved at evaluation time.
MIXTURE_PRESETS = {
    "hyper_g": {"a": 3.0},
    "hyper_g_over_n": {"a": 3.0},
    "beta_prime": {"a": 0.5, "b": 0.5},
    "cch": {"a": 1.0, "b": "n", "s": 0.0},
    "robust": {},
    "intrinsic": {},
}


@dataclass(frozen=True)
class GPriorSpec:
    """Parameter-prior choice: fixed g, a named mixture, EB, or AIC/BIC."""

    kind: str  # fixed_g | mixture_g | eb_local | eb_global | aic | bic
    g: float | None = None  # fixed_g only; may be a callable of (n, p) upstream
    density: str | None = None  # mixture_g only
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "fixed_g" and (self.g is None or self.g <= 0):
            raise ValueError("fixed_g needs g > 0")
        if self.kind == "mixture_g":
            if self.density not in MIXTURE_PRESETS:
                raise ValueError(f"unknown mixture density {self.density!r}")
            merged = {**MIXTURE_PRESETS[self.density], **self.params}
            object.__setattr__(self, "params", merged)


@dataclass
class LaplaceFit:
    beta: np.ndarray  # (|m|+1,) mode, intercept first
    cov: np.ndarray  # (|m|+1, |m|+1) Gaussian covariance at the mode
    log_marginal: float


@dataclass
class BmaPosterior:
    p: int
    n: int
    models: dict[ModelId, float]  # posterior probabilities, sum to 1
    fits: dict[ModelId, LaplaceFit]
    inclusion_probs: np.ndarray = None

    def __post_init__(self):
        if self.inclusion_probs is None:
            probs = np.zeros(self.p)
            for m, w in self.models.items():
                for j in m:
                    probs[j] += w
            self.inclusion_probs = probs


def model_log_prior(m: ModelId | int, p: int, n: int) -> float:
    """Truncated beta-binomial(1,1) model prior on 2^p, zero above size n-3.

    Mass is uniform over admissible sizes, split equally among the models of
    each size, and renormalized after removing sizes >= n-2.
    """
    size = m if isinstance(m, int) else len(m)
    if size > p or size < 0:
        raise ValueError("model size out of range")
    if size >= n - 2:
        return -np.inf
    n_sizes = min(p, n - 3) + 1  # admissible sizes 0 .. min(p, n-3)
    return -math.log(n_sizes) - math.log(math.comb(p, size))


def _loglik_and_derivs(beta, Xd, y):
    eta = Xd @ beta
    pi = expit(eta)
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    grad = Xd.T @ (y - pi)
    hess = -(Xd.T * (pi * (1 - pi))) @ Xd
    return ll, grad, hess


def _posterior_mode(Xd, y, prior_prec, start=None):
    """Newton with step halving on loglik plus Gaussian slope prior.

    prior_prec is the (k+1)x(k+1) prior precision with a zero row/column for
    the flat-prior intercept.
    """
    d = Xd.shape[1]
    beta = np.zeros(d) if start is None else np.array(start, dtype=float)

    def objective(b):
        eta = Xd @ b
        return float(np.sum(y * eta - np.logaddexp(0.0, eta))) - 0.5 * b @ prior_prec @ b

    obj = objective(beta)
    for _ in range(100):
        _, grad, hess = _loglik_and_derivs(beta, Xd, y)
        grad = grad - prior_prec @ beta
        hess = hess - prior_prec
        if np.max(np.abs(grad)) <= 1e-8:
            return beta, hess
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            raise SingularInformation("penalized information singular") from None
        scale = 1.0
        for _ in range(25):
            cand = beta + scale * step
            cand_obj = objective(cand)
            if cand_obj >= obj - 1e-12:
                break
            scale *= 0.5
        beta, obj = cand, cand_obj
    raise FitError("posterior mode search did not converge")


def _null_scale(Xm: np.ndarray) -> np.ndarray:
    """Information scale matrix for the slopes at beta = 0 (weights 1/4)."""
    return 0.25 * (Xm.T @ Xm)


def _laplace_fixed_g(X, y, m: ModelId, g: float, scale=None, start=None) -> LaplaceFit:
    """Laplace log-marginal under slopes ~ N(0, g*(X'WX)^-1), flat intercept.

    The scale matrix is the null information (W = I/4), so g = n is the
    unit-information prior with a BIC-like complexity penalty of
    (1/2) log n per included slope.
    """
    n = len(y)
    k = len(m)
    Xm = X[:, list(m)] if k else np.zeros((n, 0))
    Xd = np.column_stack([np.ones(n), Xm])
    if k:
        S = _null_scale(Xm) if scale is None else scale
        sign, logdet_S = np.linalg.slogdet(S)
        if sign <= 0:
            raise SingularInformation(f"rank-deficient design for model {m}")
        prior_prec = np.zeros((k + 1, k + 1))
        prior_prec[1:, 1:] = S / g
        # log det of the prior covariance g*S^-1
        logdet_cov = k * math.log(g) - logdet_S
    else:
        prior_prec = np.zeros((1, 1))
        logdet_cov = 0.0

    beta, hess = _posterior_mode(Xd, y, prior_prec, start=start)
    eta = Xd @ beta
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    sign, logdet_negH = np.linalg.slogdet(-hess)
    if sign <= 0:
        raise FitError("non-concave curvature at the posterior mode")
    log_prior_density = 0.0
    if k:
        bs = beta[1:]
        log_prior_density = (
            -0.5 * k * math.log(2 * math.pi)
            - 0.5 * logdet_cov
            - 0.5 * bs @ (prior_prec[1:, 1:] @ bs)
        )
    logm = (
        ll
        + log_prior_density
        + 0.5 * (k + 1) * math.log(2 * math.pi)
        - 0.5 * logdet_negH
    )
    cov = np.linalg.inv(-hess)
    return LaplaceFit(beta=beta, cov=cov, log_marginal=logm)


def _mle_fit(X, y, m: ModelId) -> LaplaceFit:
    k = len(m)
    Xm = X[:, list(m)] if k else np.zeros((len(y), 0))
    fit = fit_mle(Xm, y)
    Xd = np.column_stack([np.ones(len(y)), Xm])
    pi = expit(Xd @ fit.beta)
    info = (Xd.T * (pi * (1 - pi))) @ Xd
    cov = np.linalg.inv(info)
    return LaplaceFit(beta=fit.beta, cov=cov, log_marginal=fit.loglik)


class MixtureDensity:
    """Named density on g with model-size-dependent support and constants."""

    def __init__(self, name: str, n: int, params: dict):
        self.name = name
        self.n = n
        self.params = dict(params)
        if self.params.get("b") == "n":
            self.params["b"] = float(n)

    def lower(self, k: int) -> float:
        if self.name == "robust":
            return max((1.0 + self.n) / (1.0 + k) - 1.0, 0.0)
        if self.name == "intrinsic":
            return self.n / (1.0 + k)
        return 0.0

    def log_unnorm(self, g: np.ndarray, k: int) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        a = self.params.get("a")
        if self.name == "hyper_g":
            return -0.5 * a * np.log1p(g)
        if self.name == "hyper_g_over_n":
            return -0.5 * a * np.log1p(g / self.n)
        if self.name == "beta_prime":
            b = self.params["b"]
            return (a - 1.0) * np.log(g) - (a + b) * np.log1p(g)
        if self.name == "cch":
            b, s_par = self.params["b"], self.params["s"]
            # density in the shrinkage variable z = 1/(1+g), written directly
            # in g so extreme nodes stay finite: log z = -log1p(g) and
            # log(1-z) = log(g) - log1p(g)
            return (
                -(0.5 * a - 1.0) * np.log1p(g)
                + (0.5 * b - 1.0) * (np.log(g) - np.log1p(g))
                - 0.5 * s_par / (1.0 + g)
                - 2.0 * np.log1p(g)  # Jacobian dz/dg
            )
        if self.name in ("robust", "intrinsic"):
            out = -1.5 * np.log1p(g)
            if self.name == "intrinsic":
                out = out - 0.5 * np.log(g)
            return out
        raise ValueError(self.name)

    def log_norm_constant(self, k: int, points: int = 2048) -> float:
        """Numerical log of the normalizing constant over (lower, inf)."""
        g, logw = _g_nodes(self.lower(k), points)
        return float(logsumexp(self.log_unnorm(g, k) + logw))

    def logpdf(self, g, k: int) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        out = np.full(g.shape, -np.inf)
        ok = g > self.lower(k)
        if np.any(ok):
            out[ok] = self.log_unnorm(g[ok], k) - self.log_norm_constant(k)
        return out


@functools.lru_cache(maxsize=64)
def _g_nodes(lower_g: float, points: int, tmax: float = 4.0):
    """Tanh-sinh nodes/log-weights on g over (lower_g, inf).

    Built on u = g/(1+g) mapped to (u_lo, 1) by the double-exponential
    substitution, which absorbs the integrable endpoint singularities of the
    mixture densities; weights already include the du -> dg Jacobian.
    """
    u_lo = lower_g / (1.0 + lower_g)
    t = np.linspace(-tmax, tmax, points)
    h = t[1] - t[0]
    z = 0.5 * math.pi * np.sinh(t)
    log_half_span = math.log1p(-u_lo) - math.log(2.0)
    # u - u_lo = (1-u_lo) * (1+tanh z)/2;  1 - u = (1-u_lo) * (1-tanh z)/2
    log_u_minus_lo = math.log1p(-u_lo) - np.logaddexp(0.0, -2.0 * z)
    log_1m_u = math.log1p(-u_lo) - np.logaddexp(0.0, 2.0 * z)
    u = u_lo + np.exp(log_u_minus_lo)
    g = u * np.exp(-log_1m_u)
    log_cosh_z = np.logaddexp(z, -z) - math.log(2.0)
    logw_u = (
        math.log(h)
        + log_half_span
        + math.log(0.5 * math.pi)
        + np.log(np.cosh(t))
        - 2.0 * log_cosh_z
    )
    logw = logw_u - 2.0 * log_1m_u  # dg/du = (1-u)^-2
    return g, logw


def log_marginal(X, y, m: ModelId, prior: GPriorSpec, return_fit: bool = False):
    """Laplace-approximate log marginal likelihood of one model."""
    n = len(y)
    k = len(m)
    if prior.kind == "fixed_g":
        fit = _laplace_fixed_g(X, y, m, prior.g)
    elif prior.kind in ("aic", "bic"):
        mle = _mle_fit(X, y, m)
        penalty = (k + 1) if prior.kind == "aic" else 0.5 * (k + 1) * math.log(n)
        fit = LaplaceFit(mle.beta, mle.cov, mle.log_marginal - penalty)
    elif prior.kind == "eb_local":
        fit = _eb_local_fit(X, y, m)
    elif prior.kind == "mixture_g":
        fit = _mixture_fit(X, y, m, prior)
    else:
        raise ValueError(f"log_marginal cannot evaluate prior kind {prior.kind!r}")
    return fit if return_fit else fit.log_marginal


def _eb_local_fit(X, y, m: ModelId) -> LaplaceFit:
    """Maximize the fixed-g marginal over log g by golden section, per model."""
    if not m:
        return _laplace_fixed_g(X, y, m, 1.0)
    Xm = X[:, list(m)]
    scale = _null_scale(Xm)
    warm = {"beta": None}

    def value(logg):
        fit = _laplace_fixed_g(X, y, m, math.exp(logg), scale=scale, start=warm["beta"])
        warm["beta"] = fit.beta
        return fit.log_marginal

    logg = _golden_max(value, *EB_LOG_G_RANGE)
    return _laplace_fixed_g(X, y, m, math.exp(logg), scale=scale, start=warm["beta"])


def _golden_max(f, lo: float, hi: float, tol: float = 1e-6) -> float:
    """Golden-section maximizer on [lo, hi]; ties resolve toward lo."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return a if fc >= fd else b


def _mixture_fit(X, y, m: ModelId, prior: GPriorSpec) -> LaplaceFit:
    """Adaptive quadrature of the fixed-g marginal over the named density.

    Integrates on u = g/(1+g); starts at 64 points and doubles until the
    relative change in the log marginal is below 1e-8.
    """
    n = len(y)
    k = len(m)
    density = MixtureDensity(prior.density, n, prior.params)
    if not m:
        # slope-free model: the marginal does not depend on g
        return _laplace_fixed_g(X, y, m, 1.0)

    Xm = X[:, list(m)]
    scale = _null_scale(Xm)
    cache: dict[float, LaplaceFit] = {}
    warm = {"beta": None}

    def fixed(g):
        if g not in cache:
            fit = _laplace_fixed_g(X, y, m, g, scale=scale, start=warm["beta"])
            warm["beta"] = fit.beta
            cache[g] = fit
        return cache[g]

    log_norm = density.log_norm_constant(k)

    def log_density(g):
        return float(density.log_unnorm(np.array([g]), k)[0]) - log_norm

    prev = None
    logm = None
    points = 64
    while points <= 1024:
        g, logw = _g_nodes(density.lower(k), points)
        for gi in sorted(g):  # ascending g keeps the warm starts close
            fixed(float(gi))
        terms = np.array(
            [
                fixed(float(gi)).log_marginal + log_density(float(gi)) + lw
                for gi, lw in zip(g, logw)
            ]
        )
        logm = float(logsumexp(terms))
        if prev is not None and abs(logm - prev) <= 1e-8 * max(1.0, abs(prev)):
            break
        prev = logm
        points *= 2

    # plug-in summaries at the g maximizing the integrand
    best_g = max(cache, key=lambda gg: cache[gg].log_marginal + log_density(gg))
    best = cache[best_g]
    return LaplaceFit(beta=best.beta, cov=best.cov, log_marginal=logm)


def _admissible_models(p: int, n: int, threshold: int):
    if p > threshold:
        raise EnumerationRequired(f"p={p} exceeds enumeration threshold {threshold}")
    max_size = min(p, n - 3)
    for size in range(max_size + 1):
        yield from itertools.combinations(range(p), size)


def eb_global_fit(X, y, models=None, threshold: int = ENUMERATION_THRESHOLD) -> float:
    """Shared g maximizing the prior-weighted sum of fixed-g marginals."""
    n = len(y)
    p = X.shape[1]
    models = list(models) if models is not None else list(_admissible_models(p, n, threshold))
    scales = {}
    for m in models:
        if m:
            scales[m] = _null_scale(X[:, list(m)])

    log_priors = np.array([model_log_prior(m, p, n) for m in models])

    def value(logg):
        g = math.exp(logg)
        terms = []
        for m, lp in zip(models, log_priors):
            try:
                lf = _laplace_fixed_g(X, y, m, g, scale=scales.get(m))
                terms.append(lf.log_marginal + lp)
            except FitError:
                continue
        if not terms:
            return -np.inf
        return float(logsumexp(terms))

    logg = _golden_max(value, *EB_LOG_G_RANGE)
    return math.exp(logg)


def _posterior_from_scores(p, n, scored: dict[ModelId, tuple[float, LaplaceFit]]):
    keys = list(scored)
    logps = np.array([scored[m][0] for m in keys])
    finite = np.isfinite(logps)
    if not np.any(finite):
        raise FitError("every candidate model failed marginal evaluation")
    logps = logps - logsumexp(logps[finite])
    models = {}
    fits = {}
    for m, lp, ok in zip(keys, logps, finite):
        if ok:
            models[m] = float(np.exp(lp))
            fits[m] = scored[m][1]
    total = sum(models.values())
    models = {m: w / total for m, w in models.items()}
    return BmaPosterior(p=p, n=n, models=models, fits=fits)


def enumerate_posterior(X, y, prior: GPriorSpec,
                        threshold: int = ENUMERATION_THRESHOLD) -> BmaPosterior:
    """Exact posterior over all admissible models (requires p <= threshold)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if prior.kind == "eb_global":
        g = eb_global_fit(X, y, threshold=threshold)
        prior = GPriorSpec("fixed_g", g=g)
    scored = {}
    for m in _admissible_models(p, n, threshold):
        lp = model_log_prior(m, p, n)
        try:
            fit = log_marginal(X, y, m, prior, return_fit=True)
        except FitError as exc:
            log.warning("model %s excluded: %s", m, exc)
            continue
        scored[m] = (fit.log_marginal + lp, fit)
    return _posterior_from_scores(p, n, scored)


def mc3_posterior(X, y, prior: GPriorSpec, iterations: int = MC3_DEFAULT_ITERATIONS,
                  seed: int = 0) -> BmaPosterior:
    """Metropolis random walk over models via single-bit flips.

    The posterior is estimated by renormalizing marginal x prior over the
    distinct models visited by the chain.
    """
    if iterations < 1000:
        raise ValueError("need at least 1000 iterations")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if prior.kind == "eb_global":
        raise EnumerationRequired("EB-global needs an enumerated model space")
    rng = np.random.default_rng(seed)

    cache: dict[ModelId, tuple[float, LaplaceFit | None]] = {}

    def score(m: ModelId):
        if m not in cache:
            lp = model_log_prior(m, p, n)
            if not np.isfinite(lp):
                cache[m] = (-np.inf, None)
            else:
                try:
                    fit = log_marginal(X, y, m, prior, return_fit=True)
                    cache[m] = (fit.log_marginal + lp, fit)
                except FitError as exc:
                    log.warning("model %s excluded: %s", m, exc)
                    cache[m] = (-np.inf, None)
        return cache[m][0]

    current: ModelId = ()
    cur_score = score(current)
    for _ in range(iterations):
        j = int(rng.integers(p))
        cur = set(current)
        cur.symmetric_difference_update([j])
        proposal = tuple(sorted(cur))
        prop_score = score(proposal)
        if np.log(rng.random()) < prop_score - cur_score:
            current, cur_score = proposal, prop_score

    scored = {m: (s, f) for m, (s, f) in cache.items() if f is not None and np.isfinite(s)}
    return _posterior_from_scores(p, n, scored)


@dataclass
class BmaSummary:
    avg_beta: np.ndarray  # (p+1,), intercept first
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    inclusion_probs: np.ndarray


def _expand(beta_m: np.ndarray, m: ModelId, p: int) -> np.ndarray:
    full = np.zeros(p + 1)
    full[0] = beta_m[0]
    for pos, j in enumerate(m):
        full[j + 1] = beta_m[pos + 1]
    return full


def summarize_bma(post: BmaPosterior, draws: int = SUMMARY_DRAWS,
                  seed: int = 0, level: float = 0.95) -> BmaSummary:
    """Model-averaged coefficients and sampling-based credible intervals."""
    p = post.p
    avg_beta = np.zeros(p + 1)
    for m, w in post.models.items():
        avg_beta += w * _expand(post.fits[m].beta, m, p)

    rng = np.random.default_rng(seed)
    keys = list(post.models)
    weights = np.array([post.models[m] for m in keys])
    counts = rng.multinomial(draws, weights / weights.sum())
    samples = np.zeros((draws, p + 1))
    row = 0
    for m, cnt in zip(keys, counts):
        if cnt == 0:
            continue
        fit = post.fits[m]
        chol = np.linalg.cholesky(_nearest_pd(fit.cov))
        z = rng.standard_normal((cnt, len(fit.beta)))
        draws_m = fit.beta + z @ chol.T
        for r in range(cnt):
            samples[row + r] = _expand(draws_m[r], m, p)
        row += cnt
    alpha = 1.0 - level
    lo = np.quantile(samples, alpha / 2, axis=0)
    hi = np.quantile(samples, 1 - alpha / 2, axis=0)
    return BmaSummary(avg_beta, lo, hi, post.inclusion_probs.copy())


def _nearest_pd(cov: np.ndarray) -> np.ndarray:
    try:
        np.linalg.cholesky(cov)
        return cov
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        w = np.clip(w, 1e-12, None)
        return (v * w) @ v.T


def predictive_probs(post: BmaPosterior, X_new: np.ndarray) -> np.ndarray:
    """Posterior-weighted average of per-model predictive probabilities."""
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    out = np.zeros(X_new.shape[0])
    for m, w in post.models.items():
        beta = post.fits[m].beta
        Xm = X_new[:, list(m)] if m else np.zeros((X_new.shape[0], 0))
        eta = beta[0] + (Xm @ beta[1:] if m else 0.0)
        out += w * expit(eta)
    tiny = np.finfo(float).tiny
    return np.clip(out, tiny, 1.0 - np.finfo(float).epsneg)
