# Cyclic coordinate-descent sweeps on the IRLS weighted quadratic.
#
# Hot kernel of the penalized solver.  The pure-Python twin lives in
# _cd_py.py; both must implement exactly the same update rules so the
# import-time selection in _kernels.py is behavior-neutral.

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef int FAMILY_EN = 0
cdef int FAMILY_MCP = 1
cdef int FAMILY_SCAD = 2


cdef inline double fabs_(double x) nogil:
    return -x if x < 0 else x


cdef inline double soft(double z, double t) nogil:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


cdef inline double pen_value(double b, double lam, double alpha,
                             double gamma, int family) nogil:
    cdef double a = fabs_(b)
    if family == FAMILY_EN:
        return lam * (alpha * a + 0.5 * (1.0 - alpha) * b * b)
    if family == FAMILY_MCP:
        if a <= gamma * lam:
            return lam * a - b * b / (2.0 * gamma)
        return 0.5 * gamma * lam * lam
    # SCAD
    if a <= lam:
        return lam * a
    if a <= gamma * lam:
        return (2.0 * gamma * lam * a - b * b - lam * lam) / (2.0 * (gamma - 1.0))
    return 0.5 * lam * lam * (gamma + 1.0)


cdef inline double subprob(double b, double rho, double v, double lam,
                           double alpha, double gamma, int family) nogil:
    # one-dimensional objective 0.5*v*b^2 - rho*b + pen(b), constants dropped
    return 0.5 * v * b * b - rho * b + pen_value(b, lam, alpha, gamma, family)


cdef double solve_coord(double rho, double v, double lam, double alpha,
                        double gamma, int family) nogil:
    """Exact minimizer of the 1-D penalized quadratic subproblem."""
    cdef double best, best_f, cand, f, denom, gl, s
    if lam == 0.0:
        return rho / v
    if family == FAMILY_EN:
        return soft(rho, lam * alpha) / (v + lam * (1.0 - alpha))

    best = 0.0
    best_f = subprob(0.0, rho, v, lam, alpha, gamma, family)
    s = 1.0 if rho >= 0 else -1.0
    gl = gamma * lam

    if family == FAMILY_MCP:
        denom = v - 1.0 / gamma
        if denom > 0.0:
            cand = soft(rho, lam) / denom
            if fabs_(cand) <= gl:
                f = subprob(cand, rho, v, lam, alpha, gamma, family)
                if f < best_f:
                    best_f = f
                    best = cand
        cand = rho / v
        if fabs_(cand) >= gl:
            f = subprob(cand, rho, v, lam, alpha, gamma, family)
            if f < best_f:
                best_f = f
                best = cand
        cand = s * gl
        f = subprob(cand, rho, v, lam, alpha, gamma, family)
        if f < best_f:
            best_f = f
            best = cand
        return best

    # SCAD: inner lasso region, middle region, flat outer region
    cand = soft(rho, lam) / v
    if fabs_(cand) <= lam:
        f = subprob(cand, rho, v, lam, alpha, gamma, family)
        if f < best_f:
            best_f = f
            best = cand
    denom = v - 1.0 / (gamma - 1.0)
    if denom > 0.0:
        cand = soft(rho, gl / (gamma - 1.0)) / denom
        if lam < fabs_(cand) <= gl:
            f = subprob(cand, rho, v, lam, alpha, gamma, family)
            if f < best_f:
                best_f = f
                best = cand
    cand = rho / v
    if fabs_(cand) >= gl:
        f = subprob(cand, rho, v, lam, alpha, gamma, family)
        if f < best_f:
            best_f = f
            best = cand
    cand = s * lam
    f = subprob(cand, rho, v, lam, alpha, gamma, family)
    if f < best_f:
        best_f = f
        best = cand
    cand = s * gl
    f = subprob(cand, rho, v, lam, alpha, gamma, family)
    if f < best_f:
        best_f = f
        best = cand
    return best


def cd_sweeps(cnp.ndarray[double, ndim=2] X,
              cnp.ndarray[double, ndim=1] w,
              cnp.ndarray[double, ndim=1] r,
              cnp.ndarray[double, ndim=1] beta,
              double intercept,
              double lam, double alpha, double gamma, int family,
              double tol, int max_sweeps,
              record_objective=False):
    """Run cyclic coordinate-descent sweeps on a weighted least-squares problem.

    r holds the working residual z - b0 - X beta and is updated in place,
    as is beta.  Returns (intercept, sweeps_used, last_max_change, objective_trace).
    """
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t i, j, sweep
    cdef double rho, v, bnew, d, maxchange, wsum, acc, obj
    cdef double inv_n = 1.0 / n
    cdef cnp.ndarray[double, ndim=1] xv = np.empty(p)
    cdef bint trace = bool(record_objective)
    objective = [] if trace else None

    wsum = 0.0
    for i in range(n):
        wsum += w[i]
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += w[i] * X[i, j] * X[i, j]
        xv[j] = acc * inv_n

    cdef int sweeps_used = 0
    maxchange = 0.0
    for sweep in range(max_sweeps):
        maxchange = 0.0
        # unpenalized intercept
        acc = 0.0
        for i in range(n):
            acc += w[i] * r[i]
        d = acc / wsum
        if d != 0.0:
            intercept += d
            for i in range(n):
                r[i] -= d
            if fabs_(d) > maxchange:
                maxchange = fabs_(d)
        for j in range(p):
            if xv[j] <= 0.0:
                continue
            acc = 0.0
            for i in range(n):
                acc += w[i] * X[i, j] * r[i]
            rho = acc * inv_n + xv[j] * beta[j]
            bnew = solve_coord(rho, xv[j], lam, alpha, gamma, family)
            d = bnew - beta[j]
            if d != 0.0:
                for i in range(n):
                    r[i] -= d * X[i, j]
                beta[j] = bnew
                if fabs_(d) > maxchange:
                    maxchange = fabs_(d)
        sweeps_used = sweep + 1
        if trace:
            acc = 0.0
            for i in range(n):
                acc += w[i] * r[i] * r[i]
            obj = 0.5 * acc * inv_n
            for j in range(p):
                obj += pen_value(beta[j], lam, alpha, gamma, family)
            objective.append(obj)
        if maxchange < tol:
            break
    return intercept, sweeps_used, maxchange, objective
