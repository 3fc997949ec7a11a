"""Natural exponential-family GLM primitives.

A family is described by its cumulant ``a(theta)``, the derivatives ``a'`` and
``a''`` and the log base measure ``b(y)``; the per-observation log-likelihood is
``y * theta - a(theta) + b(y)`` with ``theta = X_i @ beta`` (natural link, scalar
response).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, gammaln

from .errors import ConditioningError, DomainError

GAUSSIAN_CODE, BERNOULLI_CODE, POISSON_CODE = 0, 1, 2

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _bernoulli_variance(theta):
    m = expit(theta)
    return m * (1.0 - m)


@dataclass(frozen=True)
class Family:
    kind: str
    code: int
    cumulant: Callable[[np.ndarray], np.ndarray]
    mean: Callable[[np.ndarray], np.ndarray]
    variance: Callable[[np.ndarray], np.ndarray]
    log_base_measure: Callable[[np.ndarray], np.ndarray]
    # Natural-parameter domain; all shipped families have Theta = R.
    theta_lo: float = -np.inf
    theta_hi: float = np.inf

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            raise DomainError(f"{self.kind}: linear predictor has non-finite entries")
        if np.any(theta <= self.theta_lo) or np.any(theta >= self.theta_hi):
            raise DomainError(
                f"{self.kind}: linear predictor outside ({self.theta_lo}, {self.theta_hi})"
            )
        return theta

    def validate_response(self, y):
        y = np.asarray(y, dtype=float)
        if self.code == BERNOULLI_CODE and not np.all((y == 0.0) | (y == 1.0)):
            raise DomainError("bernoulli_logit responses must be 0 or 1")
        if self.code == POISSON_CODE and not (
            np.all(y >= 0.0) and np.all(y == np.floor(y))
        ):
            raise DomainError("poisson_log responses must be non-negative integers")


GAUSSIAN = Family(
    kind="gaussian_unit_variance",
    code=GAUSSIAN_CODE,
    cumulant=lambda t: 0.5 * np.square(t),
    mean=lambda t: np.asarray(t, dtype=float),
    variance=lambda t: np.ones_like(np.asarray(t, dtype=float)),
    log_base_measure=lambda y: -0.5 * np.square(y) - _HALF_LOG_2PI,
)

BERNOULLI = Family(
    kind="bernoulli_logit",
    code=BERNOULLI_CODE,
    cumulant=lambda t: np.logaddexp(0.0, t),
    mean=expit,
    variance=_bernoulli_variance,
    log_base_measure=lambda y: np.zeros_like(np.asarray(y, dtype=float)),
)

POISSON = Family(
    kind="poisson_log",
    code=POISSON_CODE,
    cumulant=np.exp,
    mean=np.exp,
    variance=np.exp,
    log_base_measure=lambda y: -gammaln(np.asarray(y, dtype=float) + 1.0),
)

FAMILIES = {f.kind: f for f in (GAUSSIAN, BERNOULLI, POISSON)}
_ALIASES = {"gaussian": GAUSSIAN, "normal": GAUSSIAN, "bernoulli": BERNOULLI,
            "binomial": BERNOULLI, "logistic": BERNOULLI, "poisson": POISSON}


def get_family(name: str | Family) -> Family:
    if isinstance(name, Family):
        return name
    key = str(name).strip().lower()
    if key in FAMILIES:
        return FAMILIES[key]
    if key in _ALIASES:
        return _ALIASES[key]
    raise ValueError(f"unknown family {name!r}; expected one of {sorted(FAMILIES)}")


@dataclass(frozen=True)
class Dataset:
    """Response vector ``y`` (length n) and design matrix ``X`` (n x p)."""

    y: np.ndarray
    X: np.ndarray
    x_max: float = 1e6

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError("X must be two-dimensional")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("need n >= 1 and p >= 1")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite entries in the data")
        if np.max(np.abs(X)) > self.x_max:
            raise ValueError(f"design entries exceed the bound x_max={self.x_max:g}")
        y.flags.writeable = False
        X.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def validate_for(self, fam: Family) -> "Dataset":
        fam.validate_response(self.y)
        return self

    def with_response(self, y) -> "Dataset":
        return Dataset(y=y, X=self.X, x_max=self.x_max)


def _theta(beta, data: Dataset, fam: Family):
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != data.p:
        raise ValueError(f"beta has length {beta.shape[0]}, expected {data.p}")
    if not np.all(np.isfinite(beta)):
        raise DomainError("beta has non-finite entries")
    return fam.check_theta(data.X @ beta)


def log_likelihood(beta, data: Dataset, fam: Family) -> float:
    """Exact log-likelihood, base measure included."""
    theta = _theta(beta, data, fam)
    with np.errstate(over="ignore"):
        cum = fam.cumulant(theta)
    if not np.all(np.isfinite(cum)):
        raise DomainError(f"{fam.kind}: cumulant overflow at the given beta")
    return float(np.sum(data.y * theta - cum + fam.log_base_measure(data.y)))


def score(beta, data: Dataset, fam: Family) -> np.ndarray:
    """Gradient of :func:`log_likelihood` (unscaled sum over observations)."""
    theta = _theta(beta, data, fam)
    with np.errstate(over="ignore"):
        mu = fam.mean(theta)
    if not np.all(np.isfinite(mu)):
        raise DomainError(f"{fam.kind}: mean overflow at the given beta")
    return data.X.T @ (data.y - mu)


def observed_information(beta, data: Dataset, fam: Family) -> np.ndarray:
    """``n^-1 * sum_i X_i^T a''(X_i beta) X_i``, i.e. minus the Hessian over n."""
    theta = _theta(beta, data, fam)
    with np.errstate(over="ignore"):
        w = fam.variance(theta)
    if not np.all(np.isfinite(w)):
        raise DomainError(f"{fam.kind}: variance overflow at the given beta")
    J = (data.X * w[:, None]).T @ data.X / data.n
    return 0.5 * (J + J.T)


@dataclass(frozen=True)
class InfoBlocks:
    """Partition of an information matrix by inactive (1) and active (2) indices.

    ``J_cond`` is the Schur complement ``J11 - J12 J22^-1 J21``.
    """

    J: np.ndarray
    active: tuple
    inactive: tuple
    J11: np.ndarray
    J12: np.ndarray
    J21: np.ndarray
    J22: np.ndarray
    J_cond: np.ndarray
    rcond22: float = field(default=1.0)

    def solve22(self, rhs):
        """``J22^-1 @ rhs``; rhs may be a vector or have one column per draw."""
        if len(self.active) == 0:
            return np.zeros((0,) + np.shape(rhs)[1:])
        return np.linalg.solve(self.J22, rhs)


_RCOND_MIN = 1e-12


def _normalize_active(active: Sequence[int], p: int) -> tuple:
    idx = sorted({int(j) for j in active})
    for j in idx:
        if j < 0 or j >= p:
            raise ValueError(f"active index {j} outside 0..{p - 1}")
    return tuple(idx)


def partition_information(J, active: Sequence[int]) -> InfoBlocks:
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError("J must be square")
    p = J.shape[0]
    act = _normalize_active(active, p)
    inact = tuple(j for j in range(p) if j not in set(act))
    a, i = np.array(act, dtype=int), np.array(inact, dtype=int)
    J11 = J[np.ix_(i, i)]
    J12 = J[np.ix_(i, a)]
    J21 = J[np.ix_(a, i)]
    J22 = J[np.ix_(a, a)]
    rcond = 1.0
    if len(act) and len(inact):
        rcond = 1.0 / np.linalg.cond(J22)
        if not np.isfinite(rcond) or rcond < _RCOND_MIN:
            raise ConditioningError(
                f"active block J22 is numerically singular (rcond={rcond:.3e})", rcond=rcond
            )
        J_cond = J11 - J12 @ np.linalg.solve(J22, J21)
        asym = np.max(np.abs(J_cond - J_cond.T))
        if asym > 1e-10 * (1.0 + np.max(np.abs(J))):
            raise ConditioningError(
                f"Schur complement lost symmetry (|asym|={asym:.3e})", rcond=rcond
            )
        J_cond = 0.5 * (J_cond + J_cond.T)
    else:
        J_cond = J11.copy()
        if len(act):
            rcond = 1.0 / np.linalg.cond(J22)
    return InfoBlocks(J=J, active=act, inactive=inact, J11=J11, J12=J12, J21=J21,
                      J22=J22, J_cond=J_cond, rcond22=float(rcond))


def conditional_score(s, blocks: InfoBlocks) -> np.ndarray:
    """``s1 - J12 J22^-1 s2``.

    ``s`` may be a single p-vector or an array of shape (draws, p).
    """
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != blocks.J.shape[0]:
        raise ValueError("score length does not match the information matrix")
    i = np.array(blocks.inactive, dtype=int)
    a = np.array(blocks.active, dtype=int)
    s1 = s[..., i]
    if len(a) == 0 or len(i) == 0:
        return s1.copy()
    s2 = s[..., a]
    if s.ndim == 1:
        return s1 - blocks.J12 @ blocks.solve22(s2)
    return s1 - (blocks.J12 @ blocks.solve22(s2.T)).T
