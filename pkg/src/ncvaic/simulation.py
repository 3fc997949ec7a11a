"""Monte-Carlo checks of the oracle property and of the KL bias correction.

Every replication draws from its own seed substream
``SeedSequence(seed, spawn_key=(1, rep))``, so a run split across worker
processes reproduces the sequential run exactly.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import penalties as pen
from .aic import MonteCarlo, bias_correction, needs_k_hat
from .errors import InsufficientDataError
from .glm import (BERNOULLI_CODE, GAUSSIAN_CODE, Dataset, Family, conditional_score, get_family,
                  log_likelihood, observed_information, partition_information)
from .solver import FitOptions, fit, solve_quadratic_l1_batch

DESIGNS = ("iid_uniform", "iid_rademacher", "fixed_matrix")

REFERENCE_BETA = (3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SimDesign:
    family: str
    beta_star: tuple
    n: int
    design: str = "iid_uniform"
    lo: float = -1.0
    hi: float = 1.0
    X: Optional[np.ndarray] = None
    seed: int = 0
    redraw_x: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", get_family(self.family).kind)
        beta = tuple(float(b) for b in np.atleast_1d(self.beta_star))
        if len(beta) < 1:
            raise ValueError("beta_star must have at least one entry")
        object.__setattr__(self, "beta_star", beta)
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; expected one of {DESIGNS}")
        if self.design == "fixed_matrix":
            if self.X is None:
                raise ValueError("fixed_matrix design needs X")
            X = np.asarray(self.X, dtype=float)
            if X.shape != (self.n, len(beta)):
                raise ValueError(f"X must have shape ({self.n}, {len(beta)})")
            object.__setattr__(self, "X", X)
        elif not self.lo < self.hi:
            raise ValueError("need lo < hi")
        if int(self.n) < 1:
            raise ValueError("n must be positive")
        object.__setattr__(self, "n", int(self.n))

    @property
    def fam(self) -> Family:
        return get_family(self.family)

    @property
    def p(self) -> int:
        return len(self.beta_star)

    @property
    def beta(self) -> np.ndarray:
        return np.array(self.beta_star)

    @property
    def true_active(self) -> tuple:
        return tuple(int(j) for j in np.flatnonzero(self.beta))

    def with_n(self, n: int) -> "SimDesign":
        return dataclasses.replace(self, n=int(n))


def reference_design(n: int, seed: int = 0, family: str = "gaussian") -> SimDesign:
    """p = 8 design with beta* = (3, 1.5, 0, 0, 2, 0, 0, 0) and U(-1, 1) regressors."""
    return SimDesign(family=family, beta_star=REFERENCE_BETA, n=n, seed=seed)


def _draw_x(design: SimDesign, rng) -> np.ndarray:
    if design.design == "fixed_matrix":
        return design.X
    shape = (design.n, design.p)
    if design.design == "iid_uniform":
        return rng.uniform(design.lo, design.hi, size=shape)
    return rng.choice(np.array([-1.0, 1.0]), size=shape)


def draw_response(X, beta, fam: Family, rng) -> np.ndarray:
    theta = X @ beta
    if fam.code == GAUSSIAN_CODE:
        return theta + rng.standard_normal(theta.shape[0])
    if fam.code == BERNOULLI_CODE:
        return (rng.random(theta.shape[0]) < fam.mean(theta)).astype(float)
    return rng.poisson(fam.mean(theta)).astype(float)


def design_matrix(design: SimDesign) -> np.ndarray:
    """The held-fixed design for the experiment."""
    return _draw_x(design, np.random.default_rng(np.random.SeedSequence(design.seed, spawn_key=(0,))))


def generate(design: SimDesign) -> Dataset:
    """One dataset: the experiment's design matrix and a response drawn at ``beta*``."""
    X = design_matrix(design)
    rng = np.random.default_rng(np.random.SeedSequence(design.seed, spawn_key=(2,)))
    return Dataset(draw_response(X, design.beta, design.fam, rng), X)


def kl_bias_statistic(beta_hat, beta_star, data: Dataset, data_copy: Dataset,
                      fam: Family) -> float:
    """In-sample minus out-of-sample log-likelihood gain of ``beta_hat`` over ``beta*``."""
    inside = log_likelihood(beta_hat, data, fam) - log_likelihood(beta_star, data, fam)
    outside = log_likelihood(beta_hat, data_copy, fam) - log_likelihood(beta_star, data_copy, fam)
    return inside - outside


# -- replication engine ------------------------------------------------------------

@dataclass(frozen=True)
class _Task:
    design: SimDesign
    spec: pen.PenaltySpec
    opts: FitOptions
    seed: int
    kl: bool = False
    correction: bool = False
    swap: bool = False
    mc: Optional[MonteCarlo] = None


def _replicate(task: _Task, rep: int, X_fixed) -> dict:
    ss = np.random.SeedSequence(task.seed, spawn_key=(1, rep))
    s_x, s_y, s_copy, s_fit, s_mc = ss.spawn(5)
    d = task.design
    fam = d.fam
    X = _draw_x(d, np.random.default_rng(s_x)) if d.redraw_x else X_fixed
    data = Dataset(draw_response(X, d.beta, fam, np.random.default_rng(s_y)), X)
    copy = None
    if task.kl:
        copy = Dataset(draw_response(X, d.beta, fam, np.random.default_rng(s_copy)), X)
    fit_seed = int(s_fit.generate_state(1)[0])
    opts = dataclasses.replace(task.opts, seed=fit_seed)
    spec = task.spec.with_n(d.n)
    if task.swap:
        data, copy = copy, data
    rec = {"rep": rep, "ok": False}
    try:
        res = fit(data, fam, spec, opts)
        if not np.all(np.isfinite(res.beta_hat)):
            raise FloatingPointError("non-finite estimate")
        rec.update(ok=True, beta_hat=res.beta_hat, active=res.active, converged=res.converged)
        if task.kl:
            rec["z"] = kl_bias_statistic(res.beta_hat, d.beta, data, copy, fam)
        if task.correction:
            mc = task.mc or MonteCarlo()
            mc = dataclasses.replace(mc, seed=int(s_mc.generate_state(1)[0]))
            bias, detail = bias_correction(res, data, fam, spec, mc)
            rec["correction"] = bias
            rec["k_hat"] = detail.get("k_hat")
    except Exception as exc:  # noqa: BLE001 - counted as a skipped replication
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def _chunk(args):
    task, reps, X = args
    return [_replicate(task, r, X) for r in reps]


def run_replications(task: _Task, reps: int, workers: int = 1) -> list:
    X = design_matrix(task.design)
    idx = list(range(int(reps)))
    if workers <= 1:
        return [_replicate(task, r, X) for r in idx]
    size = max(1, -(-len(idx) // (4 * workers)))
    chunks = [(task, idx[i:i + size], X) for i in range(0, len(idx), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = []
        for part in pool.map(_chunk, chunks):
            out.extend(part)
    return out


def _mean_se(x) -> tuple:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return float("nan"), float("nan")
    se = float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("nan")
    return float(np.mean(x)), se


def _skip_info(records) -> dict:
    skipped = [r for r in records if not r["ok"]]
    return {
        "reps": len(records),
        "used": len(records) - len(skipped),
        "skipped": len(skipped),
        "skip_rate": len(skipped) / max(1, len(records)),
        "nonconverged": sum(1 for r in records if r["ok"] and not r["converged"]),
        "errors": sorted({r["error"] for r in skipped})[:5],
    }


# -- KL bias ------------------------------------------------------------------------

@dataclass
class KlBiasResult:
    mean: float
    se: float
    correction_mean: float
    correction_se: float
    active_mean: float
    k_hat_mean: Optional[float]
    info: dict = field(default_factory=dict)

    @property
    def combined_se(self) -> float:
        return float(np.hypot(self.se, self.correction_se))

    def agrees(self, k: float = 2.0) -> bool:
        return abs(self.mean - self.correction_mean) <= k * self.combined_se


def empirical_kl_bias(design: SimDesign, spec: pen.PenaltySpec, opts: Optional[FitOptions] = None,
                      reps: int = 1000, seed: int = 0, mc: Optional[MonteCarlo] = None,
                      swap: bool = False, correction: bool = True,
                      workers: int = 1) -> KlBiasResult:
    """Brute-force estimate of the expected optimism of the in-sample log-likelihood.

    Each replication draws ``y`` and an independent copy on the same design,
    fits on ``y`` and evaluates the in-sample minus out-of-sample gain over
    ``beta*``. With ``correction`` the plug-in bias correction (active-set size,
    plus K_hat when applicable) is computed on the same fits. ``swap`` fits on
    the copy instead, with the roles of the two samples exchanged.
    """
    if reps < 100:
        raise ValueError("need reps >= 100")
    if correction and spec.lam > 0:
        needs_k_hat(spec)
    else:
        correction = False
    task = _Task(design, spec, opts or FitOptions(), seed, kl=True, correction=correction,
                 swap=swap, mc=mc)
    recs = run_replications(task, reps, workers)
    ok = [r for r in recs if r["ok"]]
    mean, se = _mean_se([r["z"] for r in ok])
    act = [len(r["active"]) for r in ok]
    if correction:
        cm, cse = _mean_se([r["correction"] for r in ok])
        ks = [r["k_hat"] for r in ok if r.get("k_hat") is not None]
        k_mean = float(np.mean(ks)) if ks else None
    else:
        cm, cse = _mean_se(act)
        k_mean = None
    return KlBiasResult(mean=mean, se=se, correction_mean=cm, correction_se=cse,
                        active_mean=float(np.mean(act)) if act else float("nan"),
                        k_hat_mean=k_mean, info=_skip_info(recs))


# -- support recovery ------------------------------------------------------------------

@dataclass
class SupportRates:
    n: int
    sparsity: float
    selection: float
    info: dict = field(default_factory=dict)


def support_rates(design: SimDesign, spec: pen.PenaltySpec, opts: Optional[FitOptions] = None,
                  reps: int = 200, seed: int = 0, workers: int = 1) -> SupportRates:
    task = _Task(design, spec, opts or FitOptions(), seed)
    recs = run_replications(task, reps, workers)
    ok = [r for r in recs if r["ok"]]
    zeros = np.flatnonzero(design.beta == 0.0)
    truth = design.true_active
    if not ok:
        raise InsufficientDataError("every replication failed")
    sparse = [bool(np.all(r["beta_hat"][zeros] == 0.0)) for r in ok]
    select = [tuple(r["active"]) == truth for r in ok]
    return SupportRates(n=design.n, sparsity=float(np.mean(sparse)),
                        selection=float(np.mean(select)), info=_skip_info(recs))


def sparsity_rate(design: SimDesign, spec: pen.PenaltySpec, opts: Optional[FitOptions] = None,
                  reps: int = 200, seed: int = 0, workers: int = 1) -> float:
    """Fraction of replications estimating every true zero as an exact zero."""
    if np.all(design.beta != 0.0):
        raise ValueError("sparsity needs at least one zero coefficient in beta*")
    return support_rates(design, spec, opts, reps, seed, workers).sparsity


def selection_consistency_rate(design: SimDesign, spec: pen.PenaltySpec,
                               opts: Optional[FitOptions] = None, reps: int = 200,
                               seed: int = 0, workers: int = 1) -> float:
    """Fraction of replications whose active set equals the true support."""
    return support_rates(design, spec, opts, reps, seed, workers).selection


# -- asymptotic normality ------------------------------------------------------------------

@dataclass
class NormalityReport:
    n: int
    used: int
    mean: np.ndarray
    mean_se: np.ndarray
    center: np.ndarray
    cov: np.ndarray
    target_cov: np.ndarray
    cov_rel_frobenius: float
    skew_z: np.ndarray
    kurt_z: np.ndarray
    inactive_moments: Optional[dict] = None
    info: dict = field(default_factory=dict)

    @property
    def mean_z(self) -> np.ndarray:
        return (self.mean - self.center) / self.mean_se


def theoretical_center(design: SimDesign, spec: pen.PenaltySpec, J22) -> np.ndarray:
    """Centre of ``sqrt(n)(beta_hat2 - beta*2)``: zero except Bridge at ``gamma0 = 1``."""
    b2 = design.beta[list(design.true_active)]
    if spec.kind == "bridge" and spec.gamma0 == 1.0 and spec.lam > 0:
        eta = spec.gamma * np.sign(b2) * np.abs(b2) ** (spec.gamma - 1.0)
        return -spec.lam * np.linalg.solve(J22, eta)
    return np.zeros(b2.shape[0])


def asymptotic_normality_check(design: SimDesign, spec: pen.PenaltySpec,
                               opts: Optional[FitOptions] = None, reps: int = 1000,
                               seed: int = 0, workers: int = 1,
                               min_used: int = 50, u_draws: int = 20_000) -> NormalityReport:
    """Moments of ``sqrt(n)(beta_hat2 - beta*2)`` over correctly-selecting replications.

    For l1-type penalties at ``gamma0 = 1`` (no sparsity) all replications are
    used and the inactive block ``sqrt(n) beta_hat1`` is compared, by its first
    two moments, with draws of the limiting quadratic-l1 solution.
    """
    truth = design.true_active
    if not truth:
        raise ValueError("beta* has no nonzero coefficient")
    task = _Task(design, spec, opts or FitOptions(), seed)
    recs = run_replications(task, reps, workers)
    ok = [r for r in recs if r["ok"]]
    l1_boundary = spec.is_l1_type and spec.gamma0 == 1.0 and spec.lam > 0
    if l1_boundary:
        used = ok
    else:
        used = [r for r in ok if tuple(r["active"]) == truth]
    if len(used) < min_used:
        raise InsufficientDataError(
            f"only {len(used)} usable replications (< {min_used}) for the normality check"
        )
    n = design.n
    X = design_matrix(design)
    J = observed_information(design.beta, Dataset(np.zeros(n), X), design.fam)
    blocks = partition_information(J, truth)
    J22 = blocks.J22
    a = list(truth)
    D = np.array([np.sqrt(n) * (r["beta_hat"][a] - design.beta[a]) for r in used])
    N = D.shape[0]
    mean = D.mean(axis=0)
    cov = np.atleast_2d(np.cov(D, rowvar=False))
    target = np.linalg.inv(J22)
    centered = D - mean
    sd = centered.std(axis=0)
    skew = (centered ** 3).mean(axis=0) / sd ** 3
    kurt = (centered ** 4).mean(axis=0) / sd ** 4 - 3.0
    inactive = None
    if l1_boundary and blocks.inactive:
        inactive = _inactive_moments(used, blocks, J, spec.lam, n, seed, u_draws)
    return NormalityReport(
        n=n, used=N, mean=mean, mean_se=D.std(axis=0, ddof=1) / np.sqrt(N),
        center=theoretical_center(design, spec, J22), cov=cov, target_cov=target,
        cov_rel_frobenius=float(np.linalg.norm(cov - target) / np.linalg.norm(target)),
        skew_z=skew / np.sqrt(6.0 / N), kurt_z=kurt / np.sqrt(24.0 / N),
        inactive_moments=inactive, info=_skip_info(recs),
    )


def _inactive_moments(used, blocks, J, lam, n, seed, draws) -> dict:
    i = list(blocks.inactive)
    B = np.array([np.sqrt(n) * r["beta_hat"][i] for r in used])
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
    vals, vecs = np.linalg.eigh(J)
    S = rng.standard_normal((draws, J.shape[0])) @ (vecs * np.sqrt(np.maximum(vals, 0.0))).T
    U = solve_quadratic_l1_batch(blocks.J_cond, np.ascontiguousarray(conditional_score(S, blocks)), lam)
    return {
        "empirical_mean": B.mean(axis=0), "limit_mean": U.mean(axis=0),
        "empirical_second_moment": (B ** 2).mean(axis=0), "limit_second_moment": (U ** 2).mean(axis=0),
        "empirical_zero_rate": (B == 0.0).mean(axis=0), "limit_zero_rate": (U == 0.0).mean(axis=0),
    }
