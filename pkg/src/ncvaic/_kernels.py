"""Hot inner loops.

Scalar helpers are written once and compiled by numba when enabled. The two
loop kernels (weighted coordinate descent and the quadratic-l1 solver) have a
scalar-loop version for numba and a vectorised numpy version for the fallback;
``cd_weighted``, ``quad_l1_cd`` and ``quad_l1_cd_batch`` point at whichever is
active.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

LASSO, SCAD, MCP, BRIDGE = 0, 1, 2, 3

_ROOT_TOL = 1e-12


@njit
def pen_abs(code, lam, shape, x):
    """Penalty value at ``x >= 0``."""
    if code == LASSO:
        return lam * x
    if code == SCAD:
        a = shape
        if x <= lam:
            return lam * x
        if x < a * lam:
            d = a * lam - x
            return (a + 1.0) * lam * lam / 2.0 - d * d / (2.0 * (a - 1.0))
        return (a + 1.0) * lam * lam / 2.0
    if code == MCP:
        a = shape
        if x <= a * lam:
            return lam * x - x * x / (2.0 * a)
        return a * lam * lam / 2.0
    if x == 0.0:
        return 0.0
    return lam * x ** shape


@njit
def pen_deriv_abs(code, lam, shape, x):
    """Derivative of the penalty in ``|beta|`` at ``x > 0``."""
    if code == LASSO:
        return lam
    if code == SCAD:
        a = shape
        if x <= lam:
            return lam
        if x < a * lam:
            return (a * lam - x) / (a - 1.0)
        return 0.0
    if code == MCP:
        a = shape
        if x < a * lam:
            return lam - x / a
        return 0.0
    return shape * lam * x ** (shape - 1.0)


@njit
def _prox_obj(code, lam, shape, v, t, z):
    d = z - v
    return d * d / (2.0 * t) + pen_abs(code, lam, shape, z)


@njit
def _bridge_root(lam, gam, v, t, lo, hi):
    # Larger root of f'(z) = (z - v)/t + gam*lam*z^(gam-1) on [lo, hi], with
    # f'(lo) < 0 < f'(hi) and f' convex there; Newton from the right, bisection
    # as the safeguard.
    z = hi
    for _ in range(200):
        fp = (z - v) / t + gam * lam * z ** (gam - 1.0)
        if fp > 0.0:
            hi = z
        else:
            lo = z
        fpp = 1.0 / t + gam * (gam - 1.0) * lam * z ** (gam - 2.0)
        step_ok = fpp > 0.0
        z_new = z - fp / fpp if step_ok else 0.5 * (lo + hi)
        if not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)
        if abs(z_new - z) <= _ROOT_TOL * max(1.0, abs(z)) or hi - lo <= _ROOT_TOL * max(1.0, hi):
            return z_new
        z = z_new
    return z


@njit
def prox_scalar(code, lam, shape, w, t):
    """Global minimiser of ``(z - w)^2 / (2t) + pen(z)``.

    Candidates are enumerated region by region and compared on the objective;
    ties go to the candidate listed first, which is always the smaller ``|z|``.
    """
    if lam <= 0.0 or w == 0.0:
        return w
    sgn = 1.0 if w > 0.0 else -1.0
    v = abs(w)
    if code == LASSO:
        z = v - t * lam
        return sgn * z if z > 0.0 else 0.0

    best = 0.0
    best_val = _prox_obj(code, lam, shape, v, t, 0.0)
    if code == SCAD:
        a = shape
        c1 = min(max(v - t * lam, 0.0), lam)
        c3 = max(v, a * lam)
        c2 = lam
        curv = (a - 1.0) - t
        if curv > 0.0:
            c2 = (v * (a - 1.0) - t * a * lam) / curv
            c2 = min(max(c2, lam), a * lam)
        for z in (c1, lam, c2, a * lam, c3):
            val = _prox_obj(code, lam, shape, v, t, z)
            if val < best_val:
                best, best_val = z, val
    elif code == MCP:
        a = shape
        c1 = a * lam
        if 1.0 - t / a > 0.0:
            c1 = (v - t * lam) / (1.0 - t / a)
            c1 = min(max(c1, 0.0), a * lam)
        c2 = max(v, a * lam)
        for z in (c1, a * lam, c2):
            val = _prox_obj(code, lam, shape, v, t, z)
            if val < best_val:
                best, best_val = z, val
    else:
        gam = shape
        z_m = (t * gam * (1.0 - gam) * lam) ** (1.0 / (2.0 - gam))
        if z_m < v:
            fp_m = (z_m - v) / t + gam * lam * z_m ** (gam - 1.0)
            if fp_m < 0.0:
                z = _bridge_root(lam, gam, v, t, z_m, v)
                val = _prox_obj(code, lam, shape, v, t, z)
                if val < best_val:
                    best, best_val = z, val
    return sgn * best


@njit
def soft(x, thr):
    if x > thr:
        return x - thr
    if x < -thr:
        return x + thr
    return 0.0


# -- weighted coordinate descent ----------------------------------------------
# Minimises 0.5 * sum_i w_i (r_i)^2 + n * sum_j pen(beta_j) where r = z - X beta,
# updating ``beta`` and ``r`` in place. ``XT`` is X transposed (p x n, C order),
# ``c[j] = sum_i w_i X_ij^2``. Returns the number of sweeps, or -1 when some
# column has zero weighted norm.

@njit
def _cd_weighted_loops(XT, w, r, beta, c, code, lam, shape, n, penalized, max_sweeps, tol):
    p, m = XT.shape
    for j in range(p):
        if c[j] <= 0.0:
            return -1
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        maxd = 0.0
        for j in range(p):
            g = 0.0
            for i in range(m):
                g += w[i] * XT[j, i] * r[i]
            u = beta[j] + g / c[j]
            if penalized[j]:
                new = prox_scalar(code, lam, shape, u, n / c[j])
            else:
                new = u
            d = new - beta[j]
            if d != 0.0:
                for i in range(m):
                    r[i] -= d * XT[j, i]
                beta[j] = new
                step = abs(d) * math.sqrt(c[j] / n)
                if step > maxd:
                    maxd = step
        if maxd < tol:
            break
    return sweeps


def _cd_weighted_numpy(XT, w, r, beta, c, code, lam, shape, n, penalized, max_sweeps, tol):
    p = XT.shape[0]
    if np.any(c <= 0.0):
        return -1
    XwT = XT * w[None, :]
    scale = np.sqrt(c / n)
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        maxd = 0.0
        for j in range(p):
            u = beta[j] + float(XwT[j] @ r) / c[j]
            new = prox_scalar(code, lam, shape, u, n / c[j]) if penalized[j] else u
            d = new - beta[j]
            if d != 0.0:
                r -= d * XT[j]
                beta[j] = new
                maxd = max(maxd, abs(d) * scale[j])
        if maxd < tol:
            break
    return sweeps


# -- quadratic + l1 ------------------------------------------------------------
# Minimises u'Qu/2 - u'b + lam*||u||_1 in place from the start ``u``. Returns the
# sweep count, or -1 if the problem is detected to be unbounded.

_DIVERGE = 1e15


@njit
def _quad_l1_loops(Q, b, lam, u, max_sweeps, tol):
    m = b.shape[0]
    g = np.empty(m)
    for i in range(m):
        acc = -b[i]
        for k in range(m):
            acc += Q[i, k] * u[k]
        g[i] = acc
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        maxd = 0.0
        for j in range(m):
            qjj = Q[j, j]
            rho = -g[j] + qjj * u[j]
            if qjj <= 0.0:
                if abs(rho) <= lam:
                    new = 0.0
                else:
                    return -1
            else:
                new = soft(rho, lam) / qjj
            d = new - u[j]
            if d != 0.0:
                for i in range(m):
                    g[i] += Q[i, j] * d
                u[j] = new
                if abs(d) > maxd:
                    maxd = abs(d)
                if abs(new) > _DIVERGE:
                    return -1
        if maxd < tol:
            break
    return sweeps


def _quad_l1_numpy(Q, b, lam, u, max_sweeps, tol):
    g = Q @ u - b
    diag = np.diag(Q)
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        maxd = 0.0
        for j in range(b.shape[0]):
            rho = -g[j] + diag[j] * u[j]
            if diag[j] <= 0.0:
                if abs(rho) > lam:
                    return -1
                new = 0.0
            else:
                new = soft(rho, lam) / diag[j]
            d = new - u[j]
            if d != 0.0:
                g += Q[:, j] * d
                u[j] = new
                maxd = max(maxd, abs(d))
                if abs(new) > _DIVERGE:
                    return -1
        if maxd < tol:
            break
    return sweeps


@njit
def _quad_l1_batch_loops(Q, B, lam, max_sweeps, tol):
    draws, m = B.shape
    U = np.zeros((draws, m))
    status = 0
    for k in range(draws):
        u = np.zeros(m)
        res = _quad_l1_loops(Q, B[k], lam, u, max_sweeps, tol)
        if res < 0:
            return U, -1
        if res >= max_sweeps:
            status = 1
        U[k] = u
    return U, status


def _quad_l1_batch_numpy(Q, B, lam, max_sweeps, tol):
    draws, m = B.shape
    U = np.zeros((draws, m))
    status = 0
    for k in range(draws):
        u = np.zeros(m)
        res = _quad_l1_numpy(Q, B[k], lam, u, max_sweeps, tol)
        if res < 0:
            return U, -1
        if res >= max_sweeps:
            status = 1
        U[k] = u
    return U, status


if USE_NUMBA:
    cd_weighted = _cd_weighted_loops
    quad_l1_cd = _quad_l1_loops
    quad_l1_cd_batch = _quad_l1_batch_loops
else:
    cd_weighted = _cd_weighted_numpy
    quad_l1_cd = _quad_l1_numpy
    quad_l1_cd_batch = _quad_l1_batch_numpy
