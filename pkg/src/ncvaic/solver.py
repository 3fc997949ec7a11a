"""Penalized maximum likelihood fitting and the quadratic-plus-l1 subproblem."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import _kernels as K
from . import penalties as pen
from .errors import ConditioningError, UnboundedProblemError
from .glm import Dataset, Family, log_likelihood, observed_information, score

KKT_TOL = 1e-6


@dataclass(frozen=True)
class FitOptions:
    max_outer: int = 200
    max_inner: int = 1000
    tol: float = 1e-8
    zero_tol: float = 1e-8
    restarts: int = 5
    seed: int = 0
    # Indices left unpenalized (e.g. an intercept column); empty by default.
    unpenalized: tuple = ()

    def __post_init__(self):
        if not self.tol > 0 or not self.zero_tol > 0:
            raise ValueError("tol and zero_tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("max_outer and max_inner must be >= 1")
        object.__setattr__(self, "unpenalized", tuple(int(j) for j in self.unpenalized))


@dataclass
class FitResult:
    beta_hat: np.ndarray
    active: tuple
    loglik: float
    objective: float
    converged: bool
    iterations: int
    kkt_residual: float
    lam: float = 0.0
    lambda_n: float = 0.0
    start: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def active_size(self) -> int:
        return len(self.active)


def penalized_objective(beta, data: Dataset, fam: Family, spec: pen.PenaltySpec,
                        penalized=None) -> float:
    """``-sum_i g_i(beta) + n * sum_j eta(beta_j)``."""
    beta = np.asarray(beta, dtype=float)
    lam_n = spec.lambda_n(data.n)
    vals = np.asarray(pen.value(spec, beta, lam_n=lam_n), dtype=float)
    if penalized is not None:
        vals = vals[np.asarray(penalized, dtype=bool)]
    return -log_likelihood(beta, data, fam) + data.n * float(np.sum(vals))


def _bind(spec: pen.PenaltySpec, data: Dataset) -> pen.PenaltySpec:
    if spec.n is None:
        return spec.with_n(data.n)
    if spec.n != data.n:
        raise ValueError(f"penalty bound to n={spec.n} but the data has n={data.n}")
    return spec


def _penalized_mask(p, opts: FitOptions):
    mask = np.ones(p, dtype=np.bool_)
    for j in opts.unpenalized:
        mask[j] = False
    return mask


def kkt_check(result: FitResult | np.ndarray, data: Dataset, fam: Family,
              spec: pen.PenaltySpec, unpenalized: Sequence[int] = ()) -> float:
    """Largest stationarity / subgradient violation, normalised by n.

    Nonzero coordinates: ``|-score_j/n + eta'(beta_j)|``. Zero coordinates of an
    l1-type penalty: ``max(0, |score_j|/n - lambda_n)``. Zero coordinates of the
    Bridge are always local minimisers (infinite slope) and contribute nothing.
    """
    beta = np.asarray(result.beta_hat if isinstance(result, FitResult) else result, dtype=float)
    spec = _bind(spec, data)
    lam_n = spec.lambda_n()
    s = score(beta, data, fam) / data.n
    free = np.zeros(beta.shape[0], dtype=bool)
    free[list(unpenalized)] = True
    res = 0.0
    for j in range(beta.shape[0]):
        if free[j] or lam_n == 0.0:
            r = abs(s[j])
        elif beta[j] != 0.0:
            r = abs(-s[j] + pen.derivative(spec, beta[j], lam_n=lam_n))
        elif spec.kind == "bridge":
            r = 0.0
        else:
            r = max(0.0, abs(s[j]) - lam_n)
        res = max(res, r)
    return float(res)


def newton_mle(data: Dataset, fam: Family, beta0=None, max_iter: int = 100,
               tol: float = 1e-12) -> np.ndarray:
    """Unpenalized MLE by damped Newton iteration."""
    beta = np.zeros(data.p) if beta0 is None else np.array(beta0, dtype=float)
    ll = log_likelihood(beta, data, fam)
    for _ in range(max_iter):
        g = score(beta, data, fam)
        H = observed_information(beta, data, fam) * data.n
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError("information matrix is singular at the Newton iterate",
                                    rcond=0.0) from exc
        rcond = 1.0 / np.linalg.cond(H)
        if not np.isfinite(rcond) or rcond < 1e-14:
            raise ConditioningError(f"information matrix is ill-conditioned (rcond={rcond:.3e})",
                                    rcond=rcond)
        t = 1.0
        while True:
            cand = beta + t * step
            try:
                ll_new = log_likelihood(cand, data, fam)
            except Exception:
                ll_new = -np.inf
            if ll_new >= ll - 1e-12 * (1 + abs(ll)) or t < 1e-10:
                break
            t *= 0.5
        beta, ll_old, ll = cand, ll, ll_new
        if np.max(np.abs(t * step)) <= tol * (1 + np.max(np.abs(beta))):
            break
    return beta


_INNER_TOL = 1e-11
_KKT_STOP = 1e-8
_MAX_DAMP = 40


def _fit_from(beta0, data, fam, spec, opts, mask, XT):
    n = data.n
    lam_n = spec.lambda_n()
    beta = np.array(beta0, dtype=float)
    H = penalized_objective(beta, data, fam, spec, mask)
    converged = False
    it = 0
    sweeps_total = 0
    for it in range(1, opts.max_outer + 1):
        theta = data.X @ beta
        mu = fam.mean(theta)
        w0 = np.maximum(fam.variance(theta), 1e-12)
        accepted = False
        # Inflate the curvature of the local quadratic model until the step
        # decreases the objective; a large enough factor majorises -loglik.
        for k in range(_MAX_DAMP):
            rho = 2.0 ** k
            w = rho * w0
            r = (data.y - mu) / w
            c = XT ** 2 @ w
            cand = beta.copy()
            sweeps = K.cd_weighted(XT, w, r, cand, c, spec.code, lam_n, spec.shape, float(n),
                                   mask, opts.max_inner, _INNER_TOL)
            if sweeps < 0:
                raise ConditioningError("a design column has zero weighted norm", rcond=0.0)
            sweeps_total += sweeps
            try:
                H_new = penalized_objective(cand, data, fam, spec, mask)
            except Exception:
                H_new = np.inf
            if H_new <= H + 1e-12 * (1.0 + abs(H)):
                accepted = True
                break
        if not accepted:
            break
        delta = np.max(np.abs(cand - beta))
        rel = (H - H_new) / max(1.0, abs(H))
        beta, H = cand, H_new
        if delta == 0.0:
            converged = True
            break
        if rel < opts.tol and kkt_check(beta, data, fam, spec, opts.unpenalized) <= _KKT_STOP:
            converged = True
            break
    return beta, H, converged, it, sweeps_total


def _starts(data, fam, opts: FitOptions):
    p = data.p
    starts = [np.zeros(p)]
    mle = None
    if opts.restarts > 1:
        try:
            mle = newton_mle(data, fam)
        except Exception:
            mle = None
    base = mle if mle is not None else np.zeros(p)
    if mle is not None:
        starts.append(mle)
    rng = np.random.default_rng(opts.seed)
    while len(starts) < opts.restarts:
        starts.append(base + rng.normal(scale=0.1 * (1.0 + np.abs(base))))
    return starts[: opts.restarts]


def fit(data: Dataset, fam: Family, spec: pen.PenaltySpec,
        opts: Optional[FitOptions] = None) -> FitResult:
    """Minimise the penalized negative log-likelihood from several starting points.

    Each start runs IRLS: the outer loop builds the weighted least-squares model at
    the current iterate, the inner loop is cyclic coordinate descent with one
    scalar prox per coordinate. The lowest objective wins; ties (1e-12) go to the
    smaller l1 norm, then to the earlier start.
    """
    opts = opts or FitOptions()
    spec = _bind(spec, data)
    data.validate_for(fam)
    mask = _penalized_mask(data.p, opts)
    XT = np.ascontiguousarray(data.X.T)
    best = None
    for k, b0 in enumerate(_starts(data, fam, opts)):
        beta, H, conv, it, sweeps = _fit_from(b0, data, fam, spec, opts, mask, XT)
        beta = np.where(np.abs(beta) > opts.zero_tol, beta, 0.0)
        H = penalized_objective(beta, data, fam, spec, mask)
        key = (H, float(np.sum(np.abs(beta))), k)
        if best is None or _better(key, best[0]):
            best = (key, beta, conv, it, sweeps, k)
    (H, _, _), beta, conv, it, sweeps, k = best
    return FitResult(
        beta_hat=beta,
        active=tuple(int(j) for j in np.flatnonzero(beta != 0.0)),
        loglik=log_likelihood(beta, data, fam),
        objective=float(H),
        converged=bool(conv),
        iterations=int(it),
        kkt_residual=kkt_check(beta, data, fam, spec, opts.unpenalized),
        lam=spec.lam,
        lambda_n=spec.lambda_n(),
        start=int(k),
        diagnostics={"inner_sweeps": int(sweeps), "starts": int(opts.restarts)},
    )


def _better(key, incumbent) -> bool:
    h, l1, k = key
    h0, l10, k0 = incumbent
    if h < h0 - 1e-12 * max(1.0, abs(h0)):
        return True
    if h > h0 + 1e-12 * max(1.0, abs(h0)):
        return False
    if l1 < l10:
        return True
    return l1 == l10 and k < k0


# -- quadratic + l1 ---------------------------------------------------------------

_QL1_SWEEPS = 100_000
_QL1_TOL = 1e-12
_NULL_TOL = 1e-12


def _check_q(Q, b):
    Q = np.asarray(Q, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if Q.ndim != 2 or Q.shape != (b.shape[0], b.shape[0]):
        raise ValueError("Q must be m x m with m = len(b)")
    if not np.allclose(Q, Q.T, atol=1e-12 * (1 + np.max(np.abs(Q), initial=0.0))):
        raise ValueError("Q must be symmetric")
    return 0.5 * (Q + Q.T), b


def quad_l1_kkt(Q, b, lam, u) -> float:
    g = Q @ u - b
    nz = u != 0.0
    r_nz = np.abs(g[nz] + lam * np.sign(u[nz]))
    r_z = np.maximum(np.abs(g[~nz]) - lam, 0.0)
    return float(max(np.max(r_nz, initial=0.0), np.max(r_z, initial=0.0)))


def _check_bounded(Q, b, lam):
    # Along a null direction v of Q the objective is linear, -b'v + lam*|v|_1, so the
    # problem is unbounded iff that is negative for some v; a small LP over the
    # null-space coordinates (box-constrained) decides it.
    vals, vecs = np.linalg.eigh(Q)
    N = vecs[:, vals <= _NULL_TOL * max(1.0, vals[-1])]
    if N.shape[1] == 0:
        return
    m, k = N.shape
    c = np.concatenate([-(N.T @ b), np.full(m, lam)])
    A = np.block([[N, -np.eye(m)], [-N, -np.eye(m)]])
    res = linprog(c, A_ub=A, b_ub=np.zeros(2 * m), bounds=[(-1, 1)] * k + [(0, None)] * m,
                  method="highs")
    if res.status == 0 and res.fun < -1e-9 * (1.0 + np.max(np.abs(b))):
        raise UnboundedProblemError(
            "objective is unbounded below along a null direction of Q "
            f"(slope {res.fun:.3e} per unit step)")


def _polish(Q, b, lam, u):
    # Solve the stationarity equations exactly on the support found by CD; keep the
    # result only if it preserves signs and lowers the KKT residual.
    nz = np.flatnonzero(u)
    if nz.size == 0:
        return u
    sub = Q[np.ix_(nz, nz)]
    try:
        if 1.0 / np.linalg.cond(sub) < 1e-14:
            return u
        sol = np.linalg.solve(sub, b[nz] - lam * np.sign(u[nz]))
    except np.linalg.LinAlgError:
        return u
    if np.any(np.sign(sol) != np.sign(u[nz])):
        return u
    cand = np.zeros_like(u)
    cand[nz] = sol
    return cand if quad_l1_kkt(Q, b, lam, cand) < quad_l1_kkt(Q, b, lam, u) else u


def solve_quadratic_l1(Q, b, lam: float) -> np.ndarray:
    """``argmin_u u'Qu/2 - u'b + lam*||u||_1`` for symmetric PSD ``Q``.

    Cyclic coordinate descent with soft-threshold updates until the largest
    coordinate change drops below 1e-12, then an exact solve on the support.
    """
    Q, b = _check_q(Q, b)
    lam = float(lam)
    if lam < 0:
        raise ValueError("lam must be >= 0")
    m = b.shape[0]
    if m == 0:
        return np.zeros(0)
    if lam == 0.0:
        sol, *_ = np.linalg.lstsq(Q, b, rcond=None)
        if np.max(np.abs(Q @ sol - b)) > 1e-9 * (1 + np.max(np.abs(b))):
            raise UnboundedProblemError("lam = 0 and b is not in the range of Q")
    _check_bounded(Q, b, lam)
    u = np.zeros(m)
    status = K.quad_l1_cd(Q, b, lam, u, _QL1_SWEEPS, _QL1_TOL)
    if status < 0:
        raise UnboundedProblemError("objective is unbounded below along a null direction of Q")
    return _polish(Q, b, lam, u)


def solve_quadratic_l1_batch(Q, B, lam: float) -> np.ndarray:
    """Row-wise :func:`solve_quadratic_l1` for many right-hand sides (no polish)."""
    Q, _ = _check_q(Q, np.zeros(np.shape(Q)[0]))
    B = np.ascontiguousarray(B, dtype=float)
    if B.shape[1] == 0:
        return np.zeros_like(B)
    U, status = K.quad_l1_cd_batch(Q, B, float(lam), _QL1_SWEEPS, _QL1_TOL)
    if status < 0:
        raise UnboundedProblemError("objective is unbounded below for some draw")
    return U
