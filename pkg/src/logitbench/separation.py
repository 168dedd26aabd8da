"""Complete / quasi-complete separation detection via linear programming."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import FitError
from .glm_core import add_intercept

STRICT_TOL = 1e-8


@dataclass
class SeparationReport:
    separated: bool
    kind: str | None = None  # "complete" | "quasi-complete"
    certificate: np.ndarray | None = None


class SeparationIndeterminate(FitError):
    """The LP solver failed; the verdict cannot be trusted."""


def _margins(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    return A @ b


def detect_separation(X, y, include_intercept=True) -> SeparationReport:
    """Classify a dataset as completely, quasi-completely, or not separated.

    Margins are m_i = (2 y_i - 1) x_i' b.  Complete separation exists iff a
    direction with all margins strictly positive exists, which is found by
    maximizing the minimum margin inside the box |b_j| <= 1.  Quasi-complete
    separation is a direction with all margins nonnegative and at least one
    positive, found by maximizing the margin sum inside the same box.
    """
    Xd = add_intercept(X) if include_intercept else np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, dtype=float)
    s = 2.0 * y - 1.0
    A = s[:, None] * Xd
    n, d = A.shape

    # LP 1: maximize t subject to A b >= t, |b| <= 1, 0 <= t <= 1
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-A, np.ones((n, 1))])
    b_ub = np.zeros(n)
    bounds = [(-1.0, 1.0)] * d + [(0.0, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise SeparationIndeterminate(f"min-margin LP failed: {res.message}")
    if -res.fun > STRICT_TOL:
        b = res.x[:d]
        return SeparationReport(separated=True, kind="complete", certificate=b)

    # LP 2: maximize sum of margins subject to A b >= 0, |b| <= 1
    c = -A.sum(axis=0)
    res = linprog(
        c,
        A_ub=-A,
        b_ub=np.zeros(n),
        bounds=[(-1.0, 1.0)] * d,
        method="highs",
    )
    if not res.success:
        raise SeparationIndeterminate(f"margin-sum LP failed: {res.message}")
    if -res.fun > STRICT_TOL:
        b = res.x
        return SeparationReport(separated=True, kind="quasi-complete", certificate=b)
    return SeparationReport(separated=False)


def unstable_coefficients(beta, threshold: float = 10.0) -> bool:
    """True iff any coefficient is non-finite or exceeds the threshold in magnitude."""
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        return True
    return bool(np.max(np.abs(beta)) > threshold)
