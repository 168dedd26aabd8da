"""Pure-numpy twin of the compiled coordinate-descent kernel in _cd.pyx.

Slower (Python loop over coordinates) but dependency-free; selected at
import time by _kernels.py when the extension is unavailable.
"""

from __future__ import annotations

import numpy as np

FAMILY_EN = 0
FAMILY_MCP = 1
FAMILY_SCAD = 2


def _soft(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _pen_value(b: float, lam: float, alpha: float, gamma: float, family: int) -> float:
    a = abs(b)
    if family == FAMILY_EN:
        return lam * (alpha * a + 0.5 * (1.0 - alpha) * b * b)
    if family == FAMILY_MCP:
        if a <= gamma * lam:
            return lam * a - b * b / (2.0 * gamma)
        return 0.5 * gamma * lam * lam
    if a <= lam:
        return lam * a
    if a <= gamma * lam:
        return (2.0 * gamma * lam * a - b * b - lam * lam) / (2.0 * (gamma - 1.0))
    return 0.5 * lam * lam * (gamma + 1.0)


def _subprob(b, rho, v, lam, alpha, gamma, family):
    return 0.5 * v * b * b - rho * b + _pen_value(b, lam, alpha, gamma, family)


def solve_coord(rho, v, lam, alpha, gamma, family):
    """Exact minimizer of the 1-D penalized quadratic subproblem."""
    if lam == 0.0:
        return rho / v
    if family == FAMILY_EN:
        return _soft(rho, lam * alpha) / (v + lam * (1.0 - alpha))

    s = 1.0 if rho >= 0 else -1.0
    gl = gamma * lam
    candidates = [0.0]
    if family == FAMILY_MCP:
        denom = v - 1.0 / gamma
        if denom > 0.0:
            cand = _soft(rho, lam) / denom
            if abs(cand) <= gl:
                candidates.append(cand)
        cand = rho / v
        if abs(cand) >= gl:
            candidates.append(cand)
        candidates.append(s * gl)
    else:  # SCAD
        cand = _soft(rho, lam) / v
        if abs(cand) <= lam:
            candidates.append(cand)
        denom = v - 1.0 / (gamma - 1.0)
        if denom > 0.0:
            cand = _soft(rho, gl / (gamma - 1.0)) / denom
            if lam < abs(cand) <= gl:
                candidates.append(cand)
        cand = rho / v
        if abs(cand) >= gl:
            candidates.append(cand)
        candidates.extend([s * lam, s * gl])
    return min(candidates, key=lambda b: _subprob(b, rho, v, lam, alpha, gamma, family))


def cd_sweeps(X, w, r, beta, intercept, lam, alpha, gamma, family, tol,
              max_sweeps, record_objective=False):
    """Cyclic coordinate-descent sweeps; mutates r and beta in place.

    Same contract as the compiled kernel: returns
    (intercept, sweeps_used, last_max_change, objective_trace).
    """
    n, p = X.shape
    inv_n = 1.0 / n
    wsum = float(np.sum(w))
    wX = w[:, None] * X
    xv = np.einsum("ij,ij->j", wX, X) * inv_n
    objective = [] if record_objective else None

    sweeps_used = 0
    maxchange = 0.0
    for sweep in range(max_sweeps):
        maxchange = 0.0
        d = float(np.dot(w, r)) / wsum
        if d != 0.0:
            intercept += d
            r -= d
            maxchange = max(maxchange, abs(d))
        for j in range(p):
            if xv[j] <= 0.0:
                continue
            rho = float(np.dot(wX[:, j], r)) * inv_n + xv[j] * beta[j]
            bnew = solve_coord(rho, xv[j], lam, alpha, gamma, family)
            d = bnew - beta[j]
            if d != 0.0:
                r -= d * X[:, j]
                beta[j] = bnew
                maxchange = max(maxchange, abs(d))
        sweeps_used = sweep + 1
        if record_objective:
            obj = 0.5 * float(np.dot(w, r * r)) * inv_n
            obj += sum(_pen_value(b, lam, alpha, gamma, family) for b in beta)
            objective.append(obj)
        if maxchange < tol:
            break
    return intercept, sweeps_used, maxchange, objective
