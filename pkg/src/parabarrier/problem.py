"""Domains, boundary data, the coefficient chi(t) and the assembled problem."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Optional

import numpy as np

from .coercivity import CoercivityProfile, profile
from .operators import Operator, from_key
from .phi import Nonlinearity, check_concavity, nonlinearity_from_key, unit


class ProblemError(ValueError):
    pass


class Inapplicable(ProblemError):
    """The requested construction does not apply to this problem."""


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Box:
    bounds: tuple

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if any(hi <= lo for lo, hi in b):
            raise ProblemError("box bounds must be increasing")
        object.__setattr__(self, "bounds", b)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lo(self):
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self):
        return np.array([b[1] for b in self.bounds])

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def rho0(self) -> float:
        # convex: every boundary point has exterior balls of any radius
        return self.diameter

    def contains(self, x, tol: float = 1e-12):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def dist_to_boundary(self, x):
        x = np.asarray(x, dtype=float)
        return np.minimum(x - self.lo, self.hi - x).min(axis=-1)

    def on_boundary(self, x, tol: float = 1e-12):
        return self.contains(x, tol) & (self.dist_to_boundary(x) <= tol)

    def project_boundary(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        d = np.concatenate([x - self.lo, self.hi - x], axis=-1)
        j = d.argmin(axis=-1)
        n = self.dim
        out = x.copy()
        idx = np.indices(j.shape)
        face = np.where(j < n, self.lo[j % n], self.hi[j % n])
        out[(*idx, j % n)] = face
        return out

    def outward_normal(self, y, tol: float = 1e-9):
        y = np.asarray(y, dtype=float)
        nrm = np.where(np.abs(y - self.lo) <= tol, -1.0, 0.0) + np.where(np.abs(y - self.hi) <= tol, 1.0, 0.0)
        s = np.linalg.norm(nrm)
        if s == 0:
            raise ProblemError("point is not on the box boundary")
        return nrm / s

    def exterior_center(self, y, rho: float):
        return np.asarray(y, dtype=float) + rho * self.outward_normal(y)

    def boundary_points(self, m: int) -> np.ndarray:
        """About m points spread along the boundary (2D: perimeter walk)."""
        if self.dim != 2:
            rng = np.random.default_rng(0)
            pts = rng.uniform(self.lo, self.hi, size=(m, self.dim))
            return self.project_boundary(pts)
        (x0, x1), (y0, y1) = self.bounds
        per = 2 * ((x1 - x0) + (y1 - y0))
        s = np.linspace(0, per, m, endpoint=False)
        out = np.empty((m, 2))
        w, h = x1 - x0, y1 - y0
        for i, v in enumerate(s):
            if v < w:
                out[i] = (x0 + v, y0)
            elif v < w + h:
                out[i] = (x1, y0 + v - w)
            elif v < 2 * w + h:
                out[i] = (x1 - (v - w - h), y1)
            else:
                out[i] = (x0, y1 - (v - 2 * w - h))
        return out

    def interior_grid(self, m: int) -> np.ndarray:
        axes = [np.linspace(lo, hi, m) for lo, hi in self.bounds]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    def as_dict(self) -> dict:
        return {"type": "box", "bounds": [list(b) for b in self.bounds]}


@dataclass(frozen=True)
class Annulus:
    center: tuple
    inner: float
    outer: float

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ProblemError("annulus radii need 0 < inner < outer")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def diameter(self) -> float:
        return 2.0 * self.outer

    @property
    def rho0(self) -> float:
        return self.inner

    def _polar(self, x):
        d = np.asarray(x, dtype=float) - np.asarray(self.center)
        return d, np.sqrt((d * d).sum(axis=-1))

    def contains(self, x, tol: float = 1e-12):
        _, r = self._polar(x)
        return (r >= self.inner - tol) & (r <= self.outer + tol)

    def dist_to_boundary(self, x):
        _, r = self._polar(x)
        return np.minimum(r - self.inner, self.outer - r)

    def on_boundary(self, x, tol: float = 1e-12):
        return self.contains(x, tol) & (np.abs(self.dist_to_boundary(x)) <= tol)

    def project_boundary(self, x):
        d, r = self._polar(x)
        r = np.where(r == 0, 1.0, r)
        u = d / r[..., None]
        rad = np.where(np.abs(r - self.inner) <= np.abs(r - self.outer), self.inner, self.outer)
        return np.asarray(self.center) + rad[..., None] * u

    def exterior_center(self, y, rho: float):
        d, r = self._polar(y)
        u = d / r
        if abs(r - self.inner) <= 1e-9 * self.outer:
            if rho > self.inner:
                raise Inapplicable("exterior ball radius exceeds the inner radius")
            return np.asarray(self.center) + (self.inner - rho) * u
        if abs(r - self.outer) <= 1e-9 * self.outer:
            return np.asarray(self.center) + (self.outer + rho) * u
        raise ProblemError("point is not on the annulus boundary")

    def boundary_points(self, m: int) -> np.ndarray:
        mi = max(4, int(m * self.inner / (self.inner + self.outer)))
        mo = max(4, m - mi)
        c = np.asarray(self.center)
        ai = np.linspace(0, 2 * np.pi, mi, endpoint=False)
        ao = np.linspace(0, 2 * np.pi, mo, endpoint=False)
        inner = c + self.inner * np.stack([np.cos(ai), np.sin(ai)], axis=1)
        outer = c + self.outer * np.stack([np.cos(ao), np.sin(ao)], axis=1)
        return np.vstack([inner, outer])

    def interior_grid(self, m: int) -> np.ndarray:
        r = np.linspace(self.inner, self.outer, m)
        a = np.linspace(0, 2 * np.pi, 4 * m, endpoint=False)
        R, A = np.meshgrid(r, a, indexing="ij")
        return np.asarray(self.center) + np.stack([R * np.cos(A), R * np.sin(A)], axis=-1).reshape(-1, 2)

    def as_dict(self) -> dict:
        return {"type": "annulus", "center": list(self.center), "inner": self.inner, "outer": self.outer}


def domain_from_dict(d: dict):
    kind = d.get("type")
    if kind == "box":
        return Box(tuple(tuple(b) for b in d["bounds"]))
    if kind == "annulus":
        return Annulus(tuple(d["center"]), float(d["inner"]), float(d["outer"]))
    raise ProblemError(f"unknown domain type {kind!r}")


# ---------------------------------------------------------------------------
# boundary data and chi


@dataclass(frozen=True)
class BoundaryData:
    kind: str
    params: dict = field(hash=False)
    fn: Callable = field(repr=False, hash=False)

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.fn(x, t), np.broadcast_shapes(x.shape[:-1], t.shape)).astype(float)


def boundary_from_dict(d: dict) -> BoundaryData:
    kind = d.get("type")
    p = {k: v for k, v in d.items() if k != "type"}
    if kind == "constant":
        c = float(p["value"])
        return BoundaryData(kind, p, lambda x, t: np.full(np.broadcast_shapes(x.shape[:-1], np.shape(t)), c))
    if kind == "gaussian-bump":
        base, amp = float(p["base"]), float(p["amplitude"])
        c = np.asarray(p["center"], dtype=float)
        w = float(p["width"])
        rate = float(p.get("time_rate", 0.0))

        def fn(x, t):
            return base + amp * np.exp(-((x - c) ** 2).sum(axis=-1) / w ** 2) * np.exp(-rate * t)
        return BoundaryData(kind, p, fn)
    if kind == "ramp":
        base = float(p["base"])
        g = np.asarray(p["slope"], dtype=float)
        ts = float(p.get("time_slope", 0.0))
        return BoundaryData(kind, p, lambda x, t: base + x @ g + ts * t)
    if kind == "product-of-cosines":
        base, amp = float(p["base"]), float(p["amplitude"])
        fr = np.asarray(p["frequencies"], dtype=float)
        tf = float(p.get("time_frequency", 0.0))

        def fn(x, t):
            return base + amp * np.prod(np.cos(np.pi * fr * x), axis=-1) * np.cos(np.pi * tf * t)
        return BoundaryData(kind, p, fn)
    raise ProblemError(f"unknown boundary data type {kind!r}")


@dataclass(frozen=True)
class Chi:
    kind: str
    amplitude: float
    period: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.amplitude)
        return self.amplitude * np.sin(2 * np.pi * t / self.period)

    def sup_abs(self, T: float) -> float:
        if self.kind == "constant":
            return abs(self.amplitude)
        if T >= self.period / 4:
            return abs(self.amplitude)
        return abs(self.amplitude * np.sin(2 * np.pi * T / self.period))

    def as_dict(self) -> dict:
        if self.kind == "constant":
            return {"type": "constant", "value": self.amplitude}
        return {"type": "sinusoid", "amplitude": self.amplitude, "period": self.period}


def chi_from_dict(d) -> Chi:
    if isinstance(d, (int, float)):
        return Chi("constant", float(d))
    kind = d.get("type")
    if kind == "constant":
        return Chi("constant", float(d["value"]))
    if kind == "sinusoid":
        if float(d["period"]) <= 0:
            raise ProblemError("sinusoid period must be positive")
        return Chi("sinusoid", float(d["amplitude"]), float(d["period"]))
    raise ProblemError(f"unknown chi type {kind!r}")


# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def default_profile(op: Operator) -> CoercivityProfile:
    return profile(op)


@dataclass
class ProblemSpec:
    operator: Operator
    domain: object
    h: BoundaryData
    T: float
    nl: Nonlinearity = field(default_factory=unit)
    Gamma: Optional[float] = None
    chi: Chi = field(default_factory=lambda: Chi("constant", 0.0))
    coer: Optional[CoercivityProfile] = None
    rho0: Optional[float] = None

    def __post_init__(self):
        if self.T <= 0:
            raise ProblemError("horizon T must be positive")
        if self.domain.dim != self.operator.dim:
            raise ProblemError("operator and domain dimensions differ")
        if self.Gamma is None:
            self.Gamma = float(self.operator.k)
        if self.coer is None:
            self.coer = default_profile(self.operator)

    @property
    def part(self) -> str:
        return "II" if self.nl.is_unit else "I"

    @property
    def B0(self) -> float:
        return self.chi.sup_abs(self.T)

    @cached_property
    def data_bounds(self) -> tuple[float, float]:
        """(inf h, sup h) over a dense sample of the parabolic boundary."""
        dom = self.domain
        bottom = dom.interior_grid(101)
        side = dom.boundary_points(800)
        ts = np.linspace(0.0, self.T, 41)
        v0 = self.h(bottom, 0.0)
        v1 = self.h(side[:, None, :], ts[None, :])
        lo = float(min(v0.min(), v1.min()))
        hi = float(max(v0.max(), v1.max()))
        return lo, hi

    @property
    def theta(self) -> float:
        return self.data_bounds[0]

    @property
    def M(self) -> float:
        return self.data_bounds[1]

    def f_range(self) -> tuple[float, float]:
        """(omega, nu): inf and sup of f over [theta/2, 2M]."""
        if self.nl.is_unit:
            return 1.0, 1.0
        us = np.linspace(self.theta / 2, 2 * self.M, 2001)
        fv = self.nl.f(us)
        return float(fv.min()), float(fv.max())

    def default_eps(self) -> float:
        return min(0.5, (self.theta - self.theta / 2) / 4)

    def validate(self) -> None:
        """Check the admissibility of the data for the barrier constructions."""
        op = self.operator
        if self.part == "I":
            if self.theta <= 0:
                raise Inapplicable("boundary data must be positive")
            if op.k <= 1:
                raise Inapplicable("k = 1 admits only f = 1")
            if abs(self.Gamma - op.k) > 1e-12:
                raise Inapplicable("a nonconstant f requires Gamma = k")
            rep = check_concavity(self.nl, op.k, (self.theta / 2, 2 * self.M))
            if not rep.passed:
                raise Inapplicable(f"f^(1/(k-1)) is not concave on [{self.theta / 2}, {2 * self.M}]")
        else:
            if not 0 < self.Gamma < op.gamma:
                raise Inapplicable("f = 1 requires 0 < Gamma < gamma")
            if self.theta <= 0:
                raise Inapplicable("barriers are built for positive data")


PROBLEM_KEYS = {"operator", "nonlinearity", "Gamma", "chi", "T", "domain", "boundary", "rho0"}


def problem_from_dict(d: dict, coer_samples: Optional[int] = None) -> ProblemSpec:
    """Assemble a ProblemSpec from plain data (the ``problem`` block of a config)."""
    if not isinstance(d, dict):
        raise ProblemError("problem must be a mapping")
    unknown = set(d) - PROBLEM_KEYS
    if unknown:
        raise ProblemError(f"unknown problem keys: {sorted(unknown)}")
    for key in ("operator", "T", "domain", "boundary"):
        if key not in d:
            raise ProblemError(f"problem is missing {key!r}")
    try:
        dom = domain_from_dict(d["domain"])
        op = from_key(str(d["operator"]), dom.dim)
        nl = nonlinearity_from_key(str(d.get("nonlinearity", "unit")))
    except (ValueError, KeyError, TypeError) as exc:
        raise ProblemError(str(exc)) from exc
    coer = profile(op, samples=coer_samples) if coer_samples else None
    G = d.get("Gamma")
    return ProblemSpec(op, dom, boundary_from_dict(d["boundary"]), float(d["T"]), nl,
                       None if G is None else float(G), chi_from_dict(d.get("chi", 0.0)), coer,
                       None if d.get("rho0") is None else float(d["rho0"]))
