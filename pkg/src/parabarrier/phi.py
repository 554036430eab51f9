"""Change of variables u = phi(v) with phi' = f(phi)^(1/(k-1)).

The substitution turns H(Du, D^2u) + chi |Du|^k - f(u) u_t = 0 into
H(Dv, D^2v + (phi''/phi') Dv (x) Dv) + chi |Dv|^k - v_t = 0.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class PhiError(ValueError):
    pass


class RangeError(PhiError):
    def __init__(self, msg, indices):
        super().__init__(msg)
        self.indices = indices


@dataclass(frozen=True)
class Nonlinearity:
    f: Callable = field(repr=False)
    f_prime: Callable = field(repr=False)
    domain_floor: float = 0.0
    increasing: bool = True
    kind: str = "custom"
    params: tuple = ()

    @property
    def is_unit(self) -> bool:
        return self.kind == "const" and self.params == (1.0,)

    @property
    def key(self) -> str:
        if self.is_unit:
            return "unit"
        if self.kind in ("power", "const"):
            return f"{self.kind}:{','.join(repr(float(v)) for v in self.params)}"
        return self.kind


def power(coef: float, expo: float) -> Nonlinearity:
    """f(u) = coef * u**expo on (0, inf)."""
    if coef <= 0:
        raise PhiError("power nonlinearity needs a positive coefficient")
    return Nonlinearity(
        f=lambda u: coef * np.power(u, expo),
        f_prime=lambda u: coef * expo * np.power(u, expo - 1) if expo != 0 else np.zeros_like(np.asarray(u, float)),
        domain_floor=0.0, increasing=expo >= 0, kind="power", params=(float(coef), float(expo)),
    )


def constant(c: float) -> Nonlinearity:
    if c <= 0:
        raise PhiError("constant nonlinearity must be positive")
    return Nonlinearity(
        f=lambda u: np.full_like(np.asarray(u, dtype=float), c),
        f_prime=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        domain_floor=-np.inf, increasing=True, kind="const", params=(float(c),),
    )


def unit() -> Nonlinearity:
    return constant(1.0)


_NL_RE = re.compile(r"^\s*([a-z]+)\s*(?::\s*(.*))?$")


def nonlinearity_from_key(key: str) -> Nonlinearity:
    """Parse ``unit``, ``const:c`` or ``power:coef,expo``."""
    m = _NL_RE.match(key)
    if not m:
        raise PhiError(f"bad nonlinearity key {key!r}")
    name, raw = m.group(1), m.group(2)
    args = [] if not raw else [float(t) for t in raw.split(",")]
    if name == "unit" and not args:
        return unit()
    if name == "const" and len(args) == 1:
        return constant(*args)
    if name == "power" and len(args) == 2:
        return power(*args)
    raise PhiError(f"bad nonlinearity key {key!r}")


# ---------------------------------------------------------------------------


def _hermite(t, t0, t1, y0, y1, d0, d1):
    h = t1 - t0
    s = (t - t0) / h
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1)


@dataclass(frozen=True)
class PhiSolution:
    tau_grid: np.ndarray
    phi_grid: np.ndarray
    dphi_grid: np.ndarray
    k: float
    nl: Optional[Nonlinearity]
    closed_form_tag: Optional[str] = None
    closed_form: Optional[Callable] = field(default=None, repr=False)
    truncated: bool = False

    @property
    def value_range(self) -> tuple[float, float]:
        return float(self.phi_grid[0]), float(self.phi_grid[-1])

    def _seg(self, tau):
        tau = np.asarray(tau, dtype=float)
        g = self.tau_grid
        if np.any(tau < g[0] - 1e-12) or np.any(tau > g[-1] + 1e-12):
            raise PhiError(f"tau outside the solved span [{g[0]}, {g[-1]}]")
        i = np.clip(np.searchsorted(g, tau, side="right") - 1, 0, len(g) - 2)
        return tau, i

    def phi(self, tau):
        tau, i = self._seg(tau)
        g, y, d = self.tau_grid, self.phi_grid, self.dphi_grid
        return _hermite(tau, g[i], g[i + 1], y[i], y[i + 1], d[i], d[i + 1])

    def phi_prime(self, tau):
        if self.nl is None:
            return self.phi(tau)
        u = self.phi(tau)
        return np.power(self.nl.f(u), 1.0 / (self.k - 1))

    def ratio(self, tau):
        """phi''/phi' at tau from f and f' by the chain rule."""
        if self.nl is None:
            return np.ones_like(np.asarray(tau, dtype=float))
        u = self.phi(tau)
        k = self.k
        return self.nl.f_prime(u) / (k - 1) * np.power(self.nl.f(u), (2 - k) / (k - 1))

    def phi_inverse(self, u, tol: float = 1e-10):
        """Bisection inside the bracketing grid cell of the monotone interpolant."""
        u = np.asarray(u, dtype=float)
        lo_v, hi_v = self.value_range
        bad = (u < lo_v - 1e-12) | (u > hi_v + 1e-12) | ~np.isfinite(u)
        if np.any(bad):
            raise RangeError("values outside the range of phi", np.argwhere(bad).tolist())
        y = self.phi_grid
        i = np.clip(np.searchsorted(y, u, side="right") - 1, 0, len(y) - 2)
        g, d = self.tau_grid, self.dphi_grid
        lo = g[i].copy() if np.ndim(u) else float(g[i])
        hi = g[i + 1].copy() if np.ndim(u) else float(g[i + 1])
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            val = _hermite(mid, g[i], g[i + 1], y[i], y[i + 1], d[i], d[i + 1])
            up = val < u
            lo = np.where(up, mid, lo)
            hi = np.where(up, hi, mid)
            if np.max(hi - lo) <= tol * 1e-3:
                break
        out = 0.5 * (lo + hi)
        return float(out) if np.ndim(out) == 0 else out


def _closed_form(nl: Nonlinearity, k: float, phi0: float):
    if nl.kind == "const":
        c = nl.params[0] ** (1.0 / (k - 1))
        return "Linear", lambda t: phi0 + c * np.asarray(t, dtype=float)
    if nl.kind == "power":
        coef, expo = nl.params
        c = coef ** (1.0 / (k - 1))
        alpha = expo / (k - 1)
        if abs(alpha - 1) < 1e-14:
            return "Exp", lambda t: phi0 * np.exp(c * np.asarray(t, dtype=float))
        return "Power", lambda t: np.power(
            phi0 ** (1 - alpha) + (1 - alpha) * c * np.asarray(t, dtype=float), 1.0 / (1 - alpha))
    return None, None


def _rk4(rhs, y0, h, steps, floor):
    ys = [y0]
    y = y0
    k1 = rhs(y)
    for _ in range(steps):
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        with np.errstate(over="ignore", invalid="ignore"):
            y_new = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not all(np.isfinite(v) for v in (k1, k2, k3, k4, y_new)) or y_new <= floor:
            return ys, True
        # the slope at the new node must stay finite too, it feeds the interpolant
        k1 = rhs(y_new)
        if not np.isfinite(k1):
            return ys, True
        y = y_new
        ys.append(y)
    return ys, False


def solve_phi(nl: Nonlinearity, k: float, phi0: float, tau_span=(0.0, 1.0), steps: int = 1000) -> PhiSolution:
    """Integrate phi' = f(phi)^(1/(k-1)), phi(0) = phi0, with classical RK4.

    The span must contain 0; forward and backward legs share the step size
    (b - a) / steps. Leaving the domain of f stops the integration and the
    result is flagged as truncated.
    """
    if k <= 1:
        raise PhiError("k must exceed 1 (for k = 1 only f = 1 is admissible and needs no phi)")
    a, b = map(float, tau_span)
    if not a <= 0.0 <= b or a == b:
        raise PhiError("tau_span must contain 0 and have positive length")
    if phi0 <= nl.domain_floor or not float(nl.f(phi0)) > 0:
        raise PhiError("phi0 must lie in the domain of f where f > 0")
    expo = 1.0 / (k - 1)

    def rhs(y):
        with np.errstate(over="ignore", invalid="ignore"):
            fy = np.float64(nl.f(y))
            return float(np.power(fy, expo)) if fy > 0 else np.nan

    h = (b - a) / steps
    n_fwd = int(round(b / h))
    n_bwd = steps - n_fwd
    fwd, tr_f = _rk4(rhs, float(phi0), h, n_fwd, nl.domain_floor)
    bwd, tr_b = _rk4(rhs, float(phi0), -h, n_bwd, nl.domain_floor)
    taus = np.concatenate([-h * np.arange(len(bwd))[:0:-1], h * np.arange(len(fwd))])
    vals = np.array(bwd[:0:-1] + fwd)
    slopes = np.power(nl.f(vals), expo)
    tag, cf = _closed_form(nl, k, float(phi0))
    for arr in (taus, vals, slopes):
        arr.setflags(write=False)
    return PhiSolution(taus, vals, slopes, float(k), nl, tag, cf, tr_f or tr_b)


def exp_phi(tau_span=(-10.0, 10.0), steps: int = 20000) -> PhiSolution:
    """phi = exp, the default substitution when k = 1 and f = 1."""
    a, b = map(float, tau_span)
    taus = np.linspace(a, b, steps + 1)
    vals = np.exp(taus)
    return PhiSolution(taus, vals, vals.copy(), 1.0, None, "Exp", np.exp, False)


# ---------------------------------------------------------------------------


@dataclass
class ConcavityReport:
    k: float
    interval: tuple
    points: int
    witnesses: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.witnesses


def check_concavity(nl: Nonlinearity, k: float, interval, points: int = 64) -> ConcavityReport:
    """Midpoint concavity of g = f^(1/(k-1)) on all sampled pairs, plus g' non-increasing."""
    if k <= 1:
        raise PhiError("concavity gate needs k > 1")
    lo, hi = map(float, interval)
    xs = np.linspace(lo, hi, points)
    e = 1.0 / (k - 1)
    g = lambda u: np.power(nl.f(u), e)
    rep = ConcavityReport(float(k), (lo, hi), points)
    A, B = np.meshgrid(xs, xs, indexing="ij")
    gap = g(0.5 * (A + B)) - 0.5 * (g(A) + g(B))
    scale = np.maximum(1.0, np.abs(g(0.5 * (A + B))))
    for i, j in np.argwhere(gap < -1e-10 * scale)[:5]:
        rep.witnesses.append({"test": "midpoint", "a": float(xs[i]), "b": float(xs[j]), "gap": float(gap[i, j])})
    dg = nl.f_prime(xs) * e * np.power(nl.f(xs), e - 1)
    inc = np.diff(dg)
    for i in np.flatnonzero(inc > 1e-10 * np.maximum(1.0, np.abs(dg[1:])))[:5]:
        rep.witnesses.append({"test": "derivative", "a": float(xs[i]), "b": float(xs[i + 1]), "increase": float(inc[i])})
    return rep


def transform(direction: str, fld, phi: PhiSolution):
    """Map a field pointwise through phi^-1 ("ToV") or phi ("ToU")."""
    vals = np.asarray(fld.values, dtype=float)
    if direction == "ToV":
        lo, hi = phi.value_range
        bad = (vals < lo) | (vals > hi) | ~np.isfinite(vals)
        if bad.any():
            raise RangeError("field values outside the range of phi", np.argwhere(bad).tolist()[:20])
        out = phi.phi_inverse(vals)
    elif direction == "ToU":
        g = phi.tau_grid
        bad = (vals < g[0]) | (vals > g[-1]) | ~np.isfinite(vals)
        if bad.any():
            raise RangeError("field values outside the solved tau span", np.argwhere(bad).tolist()[:20])
        out = phi.phi(vals)
    else:
        raise PhiError("direction must be 'ToV' or 'ToU'")
    meta = dict(fld.meta)
    chain = list(meta.get("transforms", []))
    chain.append({"direction": direction, "phi": phi.closed_form_tag or "numeric"})
    meta["transforms"] = chain
    return dataclasses.replace(fld, values=out, meta=meta)
