"""SCAD, MCP, Lasso and Bridge penalties under the ``n^((gamma0-2)/2) * lam`` schedule."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import DomainError

L1_TYPE = ("scad", "mcp", "lasso")
KINDS = L1_TYPE + ("bridge",)
_CODES = {"lasso": K.LASSO, "scad": K.SCAD, "mcp": K.MCP, "bridge": K.BRIDGE}
DEFAULT_SHAPE = {"scad": 3.7, "mcp": 3.0}


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty kind, shape and the ``(lam, gamma0)`` tuning pair.

    ``a`` is the SCAD/MCP shape, ``gamma`` the Bridge exponent. ``n`` may be left
    unset and bound later with :meth:`with_n` (``fit`` does this from the data).
    ``lam = 0`` is accepted and means no penalty.
    """

    kind: str
    lam: float
    gamma0: float
    n: Optional[int] = None
    a: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        lam, g0 = float(self.lam), float(self.gamma0)
        if not np.isfinite(lam) or lam < 0.0:
            raise ValueError(f"lam must be finite and >= 0, got {self.lam}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "gamma0", g0)
        if kind in ("scad", "mcp"):
            a = DEFAULT_SHAPE[kind] if self.a is None else float(self.a)
            lo = 2.0 if kind == "scad" else 1.0
            if not a > lo:
                raise ValueError(f"{kind} shape a must exceed {lo:g}, got {a}")
            object.__setattr__(self, "a", a)
        if kind == "bridge":
            gam = 0.5 if self.gamma is None else float(self.gamma)
            if not 0.0 < gam < 1.0:
                raise ValueError(f"bridge exponent gamma must lie in (0, 1), got {gam}")
            object.__setattr__(self, "gamma", gam)
            if not gam < g0 <= 1.0:
                raise ValueError(f"bridge needs gamma0 in ({gam:g}, 1], got {g0}")
        elif not 1.0 <= g0 < 2.0:
            raise ValueError(f"{kind} needs gamma0 in [1, 2), got {g0}")
        if self.n is not None:
            n = int(self.n)
            if n < 1:
                raise ValueError("n must be positive")
            object.__setattr__(self, "n", n)

    @property
    def code(self) -> int:
        return _CODES[self.kind]

    @property
    def shape(self) -> float:
        if self.kind in ("scad", "mcp"):
            return self.a
        if self.kind == "bridge":
            return self.gamma
        return 0.0

    @property
    def is_l1_type(self) -> bool:
        return self.kind in L1_TYPE

    def with_n(self, n: int) -> "PenaltySpec":
        return dataclasses.replace(self, n=int(n))

    def with_lam(self, lam: float) -> "PenaltySpec":
        return dataclasses.replace(self, lam=float(lam))

    def lambda_n(self, n: Optional[int] = None) -> float:
        n = self.n if n is None else n
        if n is None:
            raise ValueError("sample size not bound; call with_n() or pass n")
        return float(n) ** ((self.gamma0 - 2.0) / 2.0) * self.lam


def _lam_n(spec: PenaltySpec, lam_n):
    return spec.lambda_n() if lam_n is None else float(lam_n)


def _as_finite(beta):
    b = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(b)):
        raise DomainError("penalty argument must be finite")
    return b


def _ret(x, like):
    return float(x) if np.ndim(like) == 0 else x


def value(spec: PenaltySpec, beta, lam_n=None):
    """Penalty ``eta_{lam_n}(beta)``, elementwise."""
    b = _as_finite(beta)
    lam = _lam_n(spec, lam_n)
    x = np.abs(b)
    if spec.kind == "lasso":
        out = lam * x
    elif spec.kind == "scad":
        a = spec.a
        out = np.where(
            x <= lam, lam * x,
            # written around the cap so rounding keeps the value monotone in |beta|
            np.where(x < a * lam,
                     (a + 1) * lam * lam / 2 - (a * lam - x) ** 2 / (2 * (a - 1)),
                     (a + 1) * lam * lam / 2),
        )
    elif spec.kind == "mcp":
        a = spec.a
        out = np.where(x <= a * lam, lam * x - x * x / (2 * a), a * lam * lam / 2)
    else:
        out = lam * x ** spec.gamma
    return _ret(out, beta)


def _nonzero(b):
    if np.any(b == 0.0):
        raise DomainError("penalty is not differentiable at the origin")


def derivative(spec: PenaltySpec, beta, lam_n=None):
    """First derivative at ``beta != 0``."""
    b = _as_finite(beta)
    _nonzero(b)
    lam = _lam_n(spec, lam_n)
    x, s = np.abs(b), np.sign(b)
    if spec.kind == "lasso":
        out = lam * s
    elif spec.kind == "scad":
        a = spec.a
        out = s * np.where(x <= lam, lam, np.where(x < a * lam, (a * lam - x) / (a - 1), 0.0))
    elif spec.kind == "mcp":
        a = spec.a
        out = s * np.where(x < a * lam, lam - x / a, 0.0)
    else:
        out = spec.gamma * lam * s * x ** (spec.gamma - 1.0)
    return _ret(out, beta)


def second_derivative(spec: PenaltySpec, beta, lam_n=None):
    """Second derivative at ``beta != 0``; right limit in ``|beta|`` at kinks."""
    b = _as_finite(beta)
    _nonzero(b)
    lam = _lam_n(spec, lam_n)
    x = np.abs(b)
    if spec.kind == "lasso":
        out = np.zeros_like(x)
    elif spec.kind == "scad":
        a = spec.a
        out = np.where((x >= lam) & (x < a * lam), -1.0 / (a - 1), 0.0)
    elif spec.kind == "mcp":
        out = np.where(x < spec.a * lam, -1.0 / spec.a, 0.0)
    else:
        g = spec.gamma
        out = g * (g - 1.0) * lam * x ** (g - 2.0)
    return _ret(out, beta)


def prox(spec: PenaltySpec, w, t, lam_n=None):
    """Global minimiser of ``(z - w)^2 / (2t) + eta(z)``; vectorises over ``w``."""
    if not t > 0:
        raise ValueError("prox step t must be positive")
    lam = _lam_n(spec, lam_n)
    w_arr = _as_finite(w)
    f = np.vectorize(lambda x: K.prox_scalar(spec.code, lam, spec.shape, float(x), float(t)),
                     otypes=[float])
    return _ret(f(w_arr), w)


@dataclass
class ConditionReport:
    kind: str
    lambda_n: float
    p1_symmetric: bool
    p1_monotone: bool
    p2_origin_slope: bool
    p2_ratio: float
    p4_flat: Optional[bool]
    tau: Optional[float]
    notes: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        out = []
        if not self.p1_symmetric:
            out.append("P1: not symmetric")
        if not self.p1_monotone:
            out.append("P1: not monotone in |beta|")
        if not self.p2_origin_slope:
            out.append(f"P2: eta(b)/|b| at b=1e-8 is {self.p2_ratio:.6g}, not lambda_n")
        if self.p4_flat is False:
            out.append("P4: derivative does not vanish beyond tau*lambda_n")
        return out

    @property
    def ok(self) -> bool:
        return not self.violations


def check_conditions(spec: PenaltySpec, lam_n=None, n_grid: int = 400) -> ConditionReport:
    """Numerical checks of symmetry, monotonicity, origin slope and the flat tail."""
    lam = _lam_n(spec, lam_n)
    if not lam > 0:
        raise ValueError("condition checks need lambda_n > 0")
    grid = np.geomspace(1e-8 * lam, 1e3 * lam, n_grid)
    v_pos = value(spec, grid, lam_n=lam)
    v_neg = value(spec, -grid, lam_n=lam)
    symmetric = bool(np.array_equal(v_pos, v_neg))
    monotone = bool(np.all(np.diff(v_pos) >= -1e-15 * max(1.0, np.max(np.abs(v_pos)))))
    b0 = 1e-8
    ratio = float(value(spec, b0, lam_n=lam) / b0)
    p2 = bool(abs(ratio - lam) <= 1e-6 * lam)
    notes = []
    if spec.kind == "bridge":
        p4, tau = None, None
        notes.append("P4 not applicable to bridge")
        if not p2:
            notes.append("P2 fails for bridge: slope diverges at the origin (informational)")
    else:
        tau = spec.a if spec.kind in ("scad", "mcp") else None
        probe_from = (spec.a if tau else 1.0) * lam
        probe = grid[grid >= probe_from]
        p4 = bool(np.all(derivative(spec, probe, lam_n=lam) == 0.0))
        if spec.kind == "lasso":
            notes.append("lasso derivative never vanishes; no tau exists")
    return ConditionReport(kind=spec.kind, lambda_n=lam, p1_symmetric=symmetric,
                           p1_monotone=monotone, p2_origin_slope=p2, p2_ratio=ratio,
                           p4_flat=p4, tau=tau, notes=notes)
