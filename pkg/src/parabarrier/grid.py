"""Explicit finite-difference solver on rectangular and annular grids, plus
grid-level comparison, maximum-principle and sandwich checks."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .phi import PhiSolution
from .problem import Annulus, Box, ProblemError, ProblemSpec

F_FLOOR = 1e-10
EPS_REG = 1e-12
SAFETY = 0.5
C1_DEFAULT = 5.0
MAGIC = b"PBAR1"
SCHEMES = ("inf", "plap", "pucci")


class GridError(ProblemError):
    pass


class DivergenceError(GridError):
    pass


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class BoxGrid:
    bounds: tuple
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise GridError("grids need at least 3 nodes per axis")
        object.__setattr__(self, "bounds", tuple((float(a), float(b)) for a, b in self.bounds))

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def spacing(self):
        (x0, x1), (y0, y1) = self.bounds
        return (x1 - x0) / (self.nx - 1), (y1 - y0) / (self.ny - 1)

    @property
    def dx(self) -> float:
        return max(self.spacing)

    @cached_property
    def points(self) -> np.ndarray:
        (x0, x1), (y0, y1) = self.bounds
        X, Y = np.meshgrid(np.linspace(x0, x1, self.nx), np.linspace(y0, y1, self.ny), indexing="ij")
        return np.stack([X, Y], axis=-1)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    def as_dict(self) -> dict:
        return {"type": "box", "bounds": [list(b) for b in self.bounds], "nx": self.nx, "ny": self.ny}


@dataclass(frozen=True)
class AnnulusGrid:
    """Polar grid: axis 0 is the radius (inner to outer), axis 1 the periodic angle."""

    center: tuple
    inner: float
    outer: float
    nr: int
    ntheta: int

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise GridError("annulus needs 0 < inner < outer")
        if self.nr < 3 or self.ntheta < 8:
            raise GridError("annular grid too coarse")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def shape(self):
        return (self.nr, self.ntheta)

    @property
    def radii(self):
        return np.linspace(self.inner, self.outer, self.nr)

    @property
    def angles(self):
        return 2 * np.pi * np.arange(self.ntheta) / self.ntheta

    @property
    def spacing(self):
        return (self.outer - self.inner) / (self.nr - 1), 2 * np.pi / self.ntheta

    @property
    def dx(self) -> float:
        dr, dth = self.spacing
        return max(dr, self.outer * dth)

    @cached_property
    def points(self) -> np.ndarray:
        R, TH = np.meshgrid(self.radii, self.angles, indexing="ij")
        c = np.asarray(self.center)
        return np.stack([c[0] + R * np.cos(TH), c[1] + R * np.sin(TH)], axis=-1)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = True
        return m

    def as_dict(self) -> dict:
        return {"type": "annulus", "center": list(self.center), "inner": self.inner,
                "outer": self.outer, "nr": self.nr, "ntheta": self.ntheta}


def grid_for(domain, n1: int, n2: int):
    if isinstance(domain, Box):
        if domain.dim != 2:
            raise GridError("grids are two-dimensional")
        return BoxGrid(domain.bounds, n1, n2)
    if isinstance(domain, Annulus):
        return AnnulusGrid(domain.center, domain.inner, domain.outer, n1, n2)
    raise GridError(f"no grid for domain {domain!r}")


# ---------------------------------------------------------------------------
# field


@dataclass(frozen=True)
class GridField:
    geometry: object
    times: np.ndarray
    values: np.ndarray
    dt_history: tuple = ()
    c1: float = C1_DEFAULT
    meta: dict = field(default_factory=dict, hash=False)

    @property
    def nt(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        return max(self.dt_history) if self.dt_history else 0.0

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.geometry.boundary_mask

    @property
    def tol_grid(self) -> float:
        return self.c1 * (self.geometry.dx + self.dt)

    def level(self, i: int) -> np.ndarray:
        return self.values[i]

    def parabolic_values(self) -> np.ndarray:
        """All values on the bottom level and on boundary nodes at later levels."""
        mask = self.boundary_mask
        return np.concatenate([self.values[0].ravel(), self.values[1:, mask].ravel()])


def initial_field(ps: ProblemSpec, geometry, c1: float = C1_DEFAULT, phi: Optional[PhiSolution] = None) -> GridField:
    """Level 0 carries h(., 0) at every node (the bottom of the parabolic boundary)."""
    u0 = np.asarray(ps.h(geometry.points, 0.0), dtype=float)
    if phi is not None:
        u0 = phi.phi_inverse(u0)
    meta = {"scheme": None, "transformed": phi is not None}
    return GridField(geometry, np.array([0.0]), u0[None].copy(), (), float(c1), meta)


def _boundary_values(ps, geometry, t, phi):
    """h (or phi^-1(h)) at the boundary nodes, in boundary-mask order."""
    vals = np.asarray(ps.h(geometry.points[geometry.boundary_mask], t), dtype=float)
    return phi.phi_inverse(vals) if phi is not None else vals


# ---------------------------------------------------------------------------
# discrete operators: each returns (F, L) on interior nodes, F the spatial part
# of the update and L a local Lipschitz bound of F in the nodal values


def _upwind_grad(u, hx, hy, increasing: bool):
    """Rouy-Tourin gradient magnitude; monotone in the neighbours in the requested sense."""
    c = u[1:-1, 1:-1]
    xm = (c - u[:-2, 1:-1]) / hx
    xp = (u[2:, 1:-1] - c) / hx
    ym = (c - u[1:-1, :-2]) / hy
    yp = (u[1:-1, 2:] - c) / hy
    if increasing:
        ax = np.maximum(np.maximum(-xm, xp), 0.0)
        ay = np.maximum(np.maximum(-ym, yp), 0.0)
    else:
        ax = np.maximum(np.maximum(xm, -xp), 0.0)
        ay = np.maximum(np.maximum(ym, -yp), 0.0)
    return np.sqrt(ax * ax + ay * ay)


def _central_box(u, hx, hy):
    ux = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * hx)
    uy = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * hy)
    c = u[1:-1, 1:-1]
    uxx = (u[2:, 1:-1] - 2 * c + u[:-2, 1:-1]) / hx ** 2
    uyy = (u[1:-1, 2:] - 2 * c + u[1:-1, :-2]) / hy ** 2
    uxy = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * hx * hy)
    p = np.stack([ux, uy], axis=-1)
    X = np.empty(ux.shape + (2, 2))
    X[..., 0, 0] = uxx
    X[..., 1, 1] = uyy
    X[..., 0, 1] = X[..., 1, 0] = uxy
    return p, X


_DIRS = [np.array([1.0, 0.0]), np.array([0.0, 1.0]),
         np.array([1.0, 1.0]) / np.sqrt(2), np.array([1.0, -1.0]) / np.sqrt(2)]


def _ellipticity(op, p):
    """Largest |H(p, +/- e e^T)| over the four grid directions."""
    out = np.zeros(p.shape[:-1])
    for e in _DIRS:
        E = np.broadcast_to(np.outer(e, e), p.shape[:-1] + (2, 2))
        out = np.maximum(out, np.maximum(np.abs(op(p, E)), np.abs(op(p, -E))))
    return out


def _generic_lipschitz(op, p, F, inv2):
    """inv2: sum of inverse squared spacings over the stencil; the gradient
    dependence contributes k1 |F| / |p| per inverse spacing."""
    L = _ellipticity(op, p) * inv2
    if op.k1 > 0:
        pn = np.sqrt((p * p).sum(axis=-1))
        L = L + op.k1 * np.abs(F) / np.maximum(pn, 1e-12) * np.sqrt(inv2)
    return L


_INF_OFFSETS = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]


def _inf_box(u, hx, hy):
    """Normalized wide-stencil infinity Laplacian times the squared stencil slope."""
    nx, ny = u.shape
    c = u[1:-1, 1:-1]
    slopes, dists = [], []
    for di, dj in _INF_OFFSETS:
        nb = u[1 + di:nx - 1 + di, 1 + dj:ny - 1 + dj]
        d = np.hypot(di * hx, dj * hy)
        slopes.append((nb - c) / d)
        dists.append(d)
    S = np.stack(slopes)
    D = np.asarray(dists)
    jmax, jmin = S.argmax(axis=0), S.argmin(axis=0)
    dmax = np.take_along_axis(S, jmax[None], 0)[0]
    dmin = np.take_along_axis(S, jmin[None], 0)[0]
    hbar = 0.5 * (D[jmax] + D[jmin])
    N = (dmax + dmin) / hbar
    slope = 0.5 * (dmax - dmin)
    F = slope * slope * N
    hmin = min(hx, hy)
    L = 2 * slope * slope / (hmin * hbar) + 2 * np.abs(N) * slope / hmin
    return F, L, slope


def _plap_box(u, hx, hy, a):
    """div(|grad u|^a grad u) in conservative form with face-centred coefficients."""
    # x faces between i and i+1, for i = 0..nx-2, evaluated on interior j
    gx = (u[1:, 1:-1] - u[:-1, 1:-1]) / hx
    gy_x = (u[1:, 2:] + u[:-1, 2:] - u[1:, :-2] - u[:-1, :-2]) / (4 * hy)
    cx = np.power(gx * gx + gy_x * gy_x + EPS_REG ** 2, 0.5 * a)
    fx = cx * gx
    gy = (u[1:-1, 1:] - u[1:-1, :-1]) / hy
    gx_y = (u[2:, 1:] + u[2:, :-1] - u[:-2, 1:] - u[:-2, :-1]) / (4 * hx)
    cy = np.power(gy * gy + gx_y * gx_y + EPS_REG ** 2, 0.5 * a)
    fy = cy * gy
    F = (fx[1:] - fx[:-1]) / hx + (fy[:, 1:] - fy[:, :-1]) / hy
    csum = (cx[1:] + cx[:-1]) / hx ** 2 + (cy[:, 1:] + cy[:, :-1]) / hy ** 2
    L = (1 + abs(a)) * csum
    return F, L


def _pucci_eigs(X):
    """Closed-form eigenvalues of 2x2 symmetric matrices."""
    a, b, d = X[..., 0, 0], X[..., 0, 1], X[..., 1, 1]
    m = 0.5 * (a + d)
    r = np.hypot(0.5 * (a - d), b)
    return m - r, m + r


def _pucci_box(op, p, X, hx, hy):
    """Pucci extremal operator on the 9-point Hessian, eigenvalues split by sign."""
    theta, vartheta, q = op.params
    wpos, wneg = (vartheta, theta) if op.family == "pucci_plus" else (theta, vartheta)
    lo, hi = _pucci_eigs(X)
    s = wpos * (np.maximum(lo, 0) + np.maximum(hi, 0)) + wneg * (np.minimum(lo, 0) + np.minimum(hi, 0))
    pn = np.sqrt((p * p).sum(axis=-1))
    scale = pn ** q if q else np.ones_like(pn)
    F = scale * s
    inv2 = 2 / hx ** 2 + 2 / hy ** 2 + 2 / (hx * hy)
    L = max(theta, vartheta) * scale * inv2
    if q:
        L = L + q * np.abs(s) * np.maximum(pn, 1e-12) ** (q - 1) * (1 / hx + 1 / hy)
    return F, L


def _polar_derivs(u, geometry: AnnulusGrid):
    """Cartesian gradient and Hessian from central polar differences on interior radii."""
    dr, dth = geometry.spacing
    r = geometry.radii[1:-1][:, None]
    th = geometry.angles[None, :]
    up = np.roll(u, -1, axis=1)
    um = np.roll(u, 1, axis=1)
    c = u[1:-1]
    ur = (u[2:] - u[:-2]) / (2 * dr)
    ut = (up[1:-1] - um[1:-1]) / (2 * dth)
    urr = (u[2:] - 2 * c + u[:-2]) / dr ** 2
    utt = (up[1:-1] - 2 * c + um[1:-1]) / dth ** 2
    urt = (up[2:] - um[2:] - up[:-2] + um[:-2]) / (4 * dr * dth)
    er = np.stack([np.cos(th) + 0 * r, np.sin(th) + 0 * r], axis=-1)
    et = np.stack([-np.sin(th) + 0 * r, np.cos(th) + 0 * r], axis=-1)
    p = ur[..., None] * er + (ut / r)[..., None] * et
    hrr = urr
    hrt = urt / r - ut / r ** 2
    htt = utt / r ** 2 + ur / r
    outer = lambda a, b: a[..., :, None] * b[..., None, :]
    X = (hrr[..., None, None] * outer(er, er) + hrt[..., None, None] * (outer(er, et) + outer(et, er))
         + htt[..., None, None] * outer(et, et))
    inv2 = 2 / dr ** 2 + 2 / (r * dth) ** 2 + 1 / (r * dr * dth)
    return p, X, inv2 + 0 * ur


def check_scheme(ps: ProblemSpec, scheme: str) -> None:
    op = ps.operator
    if scheme not in SCHEMES:
        raise GridError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "inf" and op.family != "inf_laplacian":
        raise GridError("scheme 'inf' needs the infinity Laplacian")
    if scheme == "plap":
        if op.family != "p_laplacian_variant" or op.params[0] != op.params[1]:
            raise GridError("scheme 'plap' needs a divergence-form p-Laplacian variant (a == q)")
    if scheme == "pucci" and not op.family.startswith("pucci"):
        raise GridError("scheme 'pucci' needs a Pucci operator")


def spatial_operator(ps: ProblemSpec, geometry, u: np.ndarray, t: float, scheme: str,
                     kappa=None, chi_factor=None):
    """Discrete H + chi |Du|^Gamma (+ the kappa augmentation) and its Lipschitz bound,
    both on interior nodes."""
    op = ps.operator
    chi = float(ps.chi(t))
    G = ps.Gamma
    if isinstance(geometry, AnnulusGrid):
        p, X, inv2 = _polar_derivs(u, geometry)
        if kappa is not None:
            X = X + kappa[1:-1, ..., None, None] * (p[..., :, None] * p[..., None, :])
        F = op(p, X)
        L = _generic_lipschitz(op, p, F, inv2)
        g = np.sqrt((p * p).sum(axis=-1))
        sl = slice(1, -1)
        interior = (sl, slice(None))
    else:
        hx, hy = geometry.spacing
        interior = (slice(1, -1), slice(1, -1))
        if scheme == "inf":
            F, L, _ = _inf_box(u, hx, hy)
            if kappa is not None:
                gu = _upwind_grad(u, hx, hy, True)
                F = F + kappa[interior] * gu ** 4
                L = L + 4 * kappa[interior] * gu ** 3 * (2 / hx + 2 / hy)
        elif scheme == "plap":
            a = op.params[1]
            F, L = _plap_box(u, hx, hy, a)
            if kappa is not None:
                q = op.params[0]
                gu = _upwind_grad(u, hx, hy, True)
                F = F + kappa[interior] * (1 + a) * gu ** (q + 2)
                L = L + kappa[interior] * (1 + a) * (q + 2) * gu ** (q + 1) * (2 / hx + 2 / hy)
        else:
            p, X = _central_box(u, hx, hy)
            if kappa is not None:
                X = X + kappa[interior][..., None, None] * (p[..., :, None] * p[..., None, :])
            F, L = _pucci_box(op, p, X, hx, hy)
        g = _upwind_grad(u, hx, hy, chi >= 0) if chi != 0 else None
        hinv = 2 / hx + 2 / hy
    if chi != 0:
        w = chi if chi_factor is None else chi * chi_factor[interior]
        gg = np.maximum(g, 0.0)
        F = F + w * gg ** G
        if isinstance(geometry, AnnulusGrid):
            dr, dth = geometry.spacing
            hinv = 2 / dr + 2 / (geometry.inner * dth)
        L = L + np.abs(w) * G * np.maximum(gg, 1e-6) ** (G - 1) * hinv
    return F, L, interior


# ---------------------------------------------------------------------------
# time stepping


def _coefficients(ps, u, phi):
    """Time coefficient f(u), and for transformed runs (kappa, chi factor)."""
    if phi is None:
        fu = np.asarray(ps.nl.f(u), dtype=float) * np.ones_like(u)
        if not ps.nl.is_unit and np.any(fu < F_FLOOR):
            i = np.unravel_index(int(np.argmin(fu)), u.shape)
            raise GridError(f"f(u) below the floor {F_FLOOR} at node {tuple(map(int, i))}: degenerate time step")
        return fu, None, None
    kappa = np.asarray(phi.ratio(u), dtype=float) * np.ones_like(u)
    k = ps.operator.k
    if abs(ps.Gamma - k) > 1e-12:
        cf = np.power(phi.phi_prime(u), ps.Gamma - k)
    else:
        cf = None
    return np.ones_like(u), kappa, cf


def _advance(ps, geometry, u, t, scheme, phi, dt_max):
    fu, kappa, cf = _coefficients(ps, u, phi)
    F, L, interior = spatial_operator(ps, geometry, u, t, scheme, kappa, cf)
    fi = fu[interior]
    ratio = np.where(L > 0, fi / np.maximum(L, 1e-300), np.inf)
    dt = min(dt_max, SAFETY * float(ratio.min()))
    if not dt > 0:
        raise GridError("stability predicate produced a non-positive time step")
    new = u.copy()
    new[interior] = u[interior] + dt * F / fi
    bad = ~np.isfinite(new)
    if bad.any():
        i = tuple(int(v) for v in np.argwhere(bad)[0])
        raise DivergenceError(f"non-finite value at node {i} (t = {t + dt:.6g})")
    return new, dt


def step(ps: ProblemSpec, fld: GridField, scheme: str, dt: Optional[float] = None,
         phi: Optional[PhiSolution] = None) -> GridField:
    """Append one explicit Euler level; ``dt`` is an upper cap on the stable step."""
    check_scheme(ps, scheme)
    t = float(fld.times[-1])
    cap = np.inf if dt is None else float(dt)
    if t >= ps.T:
        raise GridError("already at the horizon")
    cap = min(cap, ps.T - t)
    new, used = _advance(ps, fld.geometry, fld.values[-1], t, scheme, phi, cap)
    mask = fld.boundary_mask
    new[mask] = _boundary_values(ps, fld.geometry, t + used, phi)
    meta = dict(fld.meta, scheme=scheme)
    return GridField(fld.geometry, np.append(fld.times, t + used), np.concatenate([fld.values, new[None]]),
                     fld.dt_history + (used,), fld.c1, meta)


def solve(ps: ProblemSpec, fld: GridField, until: float, scheme: str, levels: int = 10,
          phi: Optional[PhiSolution] = None, max_substeps: int = 2_000_000) -> GridField:
    """March to ``until``, storing ``levels`` equally spaced output levels.

    Internal sub-steps land exactly on output times; every sub-step dt is recorded.
    """
    check_scheme(ps, scheme)
    t0 = float(fld.times[-1])
    until = float(until)
    if until <= t0 or until > ps.T + 1e-12:
        raise GridError("until must lie in (current time, T]")
    outs = np.linspace(t0, until, levels + 1)[1:]
    u = fld.values[-1].copy()
    mask = fld.boundary_mask
    t = t0
    dts = list(fld.dt_history)
    times = list(fld.times)
    vals = [v for v in fld.values]
    n = 0
    for target in outs:
        while t < target - 1e-15 * max(1.0, target):
            new, dt = _advance(ps, fld.geometry, u, t, scheme, phi, target - t)
            t = target if target - (t + dt) <= 1e-15 * max(1.0, target) else t + dt
            new[mask] = _boundary_values(ps, fld.geometry, t, phi)
            u = new
            dts.append(dt)
            n += 1
            if n > max_substeps:
                raise GridError("sub-step budget exhausted")
        times.append(t)
        vals.append(u.copy())
    meta = dict(fld.meta, scheme=scheme, substeps=len(dts))
    return GridField(fld.geometry, np.asarray(times), np.stack(vals), tuple(dts), fld.c1, meta)


def solve_problem(ps: ProblemSpec, n1: int, n2: int, scheme: str, levels: int = 10,
                  until: Optional[float] = None, c1: float = C1_DEFAULT,
                  phi: Optional[PhiSolution] = None) -> GridField:
    geom = grid_for(ps.domain, n1, n2)
    fld = initial_field(ps, geom, c1, phi)
    return solve(ps, fld, ps.T if until is None else until, scheme, levels, phi)


def map_back(fld: GridField, phi: PhiSolution) -> GridField:
    """Field of v mapped to u = phi(v)."""
    vals = phi.phi(fld.values)
    return GridField(fld.geometry, fld.times, vals, fld.dt_history, fld.c1, dict(fld.meta, transformed=False))


# ---------------------------------------------------------------------------
# checks


@dataclass
class GridReport:
    check: str
    passed: bool
    tol: float
    worst: float
    witness: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"check": self.check, "passed": self.passed, "tol": self.tol, "worst": self.worst,
                "witness": self.witness, **self.extra}


def _witness(fld: GridField, idx) -> dict:
    lvl, i, j = (int(v) for v in idx)
    x, y = fld.geometry.points[i, j]
    return {"level": lvl, "node": [i, j], "t": float(fld.times[lvl]), "x": float(x), "y": float(y)}


def _same_layout(a: GridField, b: GridField):
    if a.geometry != b.geometry or a.values.shape != b.values.shape or not np.allclose(a.times, b.times, atol=1e-14):
        raise GridError("fields must share geometry and time levels")


def _pt_mask(fld: GridField) -> np.ndarray:
    m = np.zeros(fld.values.shape, dtype=bool)
    m[0] = True
    m[1:, fld.boundary_mask] = True
    return m


def check_comparison(ps: ProblemSpec, sub: GridField, sup: GridField,
                     phi: Optional[PhiSolution] = None) -> GridReport:
    """sub <= sup + tol_grid everywhere when sub <= sup on the parabolic boundary.

    With ``phi`` the general form sub <= phi(phi^-1(sup) + sup_PT (phi^-1(sub) - phi^-1(sup))^+)
    is tested instead, which needs no ordering on the parabolic boundary.
    """
    _same_layout(sub, sup)
    tol = max(sub.tol_grid, sup.tol_grid)
    pt = _pt_mask(sub)
    if phi is None:
        pre = float((sub.values[pt] - sup.values[pt]).max())
        if pre > 1e-12:
            raise GridError(f"sub exceeds sup on the parabolic boundary by {pre:.3e}")
        bound = sup.values
        extra = {}
    else:
        wu, wv = phi.phi_inverse(sub.values), phi.phi_inverse(sup.values)
        shift = max(0.0, float((wu[pt] - wv[pt]).max()))
        bound = phi.phi(wv + shift)
        extra = {"shift": shift}
    gap = sub.values - bound
    i = np.unravel_index(int(np.argmax(gap)), gap.shape)
    worst = float(gap[i])
    return GridReport("comparison", worst <= tol, tol, worst, _witness(sub, i) if worst > tol else None, extra)


def check_quotient(ps: ProblemSpec, u: GridField, v: GridField) -> GridReport:
    """u / v <= max(sup_PT u / v, 1) + tol_grid for positive fields."""
    _same_layout(u, v)
    if np.any(u.values <= 0) or np.any(v.values <= 0):
        raise GridError("quotient comparison needs positive fields")
    tol = max(u.tol_grid, v.tol_grid)
    q = u.values / v.values
    bound = max(float(q[_pt_mask(u)].max()), 1.0)
    gap = q - bound
    i = np.unravel_index(int(np.argmax(gap)), gap.shape)
    worst = float(gap[i])
    return GridReport("quotient", worst <= tol, tol, worst, _witness(u, i) if worst > tol else None,
                      {"bound": bound})


def check_max_principle(ps: ProblemSpec, fld: GridField) -> GridReport:
    tol = fld.tol_grid
    pt = fld.values[_pt_mask(fld)]
    hi, lo = float(pt.max()), float(pt.min())
    over = fld.values - hi
    under = lo - fld.values
    i = np.unravel_index(int(np.argmax(over)), over.shape)
    j = np.unravel_index(int(np.argmax(under)), under.shape)
    worst = max(float(over[i]), float(under[j]))
    wit = None
    if worst > tol:
        wit = _witness(fld, i if over[i] >= under[j] else j)
    return GridReport("max_principle", worst <= tol, tol, worst, wit, {"sup_PT": hi, "inf_PT": lo})


def check_sandwich(ps: ProblemSpec, fld: GridField, bumps: Sequence, indents: Sequence) -> GridReport:
    """Every bump lies below the field and every indent above it, up to tol_grid."""
    tol = fld.tol_grid
    pts = fld.geometry.points
    worst, wit, culprit = -np.inf, None, None
    gaps = []
    for kind, bars in (("bump", bumps), ("indent", indents)):
        for n, bar in enumerate(bars):
            for lvl, t in enumerate(fld.times):
                b = bar.value(pts, t)
                d = (b - fld.values[lvl]) if kind == "bump" else (fld.values[lvl] - b)
                i = np.unravel_index(int(np.argmax(d)), d.shape)
                if d[i] > worst:
                    worst = float(d[i])
                    wit = _witness(fld, (lvl, *i))
                    culprit = f"{kind}[{n}]:{bar.family}"
            gaps.append(_anchor_gap(fld, bar))
    if not np.isfinite(worst):
        worst = 0.0
    ok = worst <= tol
    max_gap = max(gaps) if gaps else 0.0
    eps = max((bar.eps for bar in list(bumps) + list(indents)), default=0.0)
    gap_ok = max_gap <= 2 * eps + 2 * tol
    return GridReport("sandwich", ok and gap_ok, tol, worst, None if ok else dict(wit, barrier=culprit),
                      {"max_anchor_gap": max_gap, "anchor_gap_bound": 2 * eps + 2 * tol,
                       "anchors": len(gaps)})


def _anchor_gap(fld: GridField, bar) -> float:
    pts = fld.geometry.points
    y = np.asarray(bar.anchor)
    d = ((pts - y) ** 2).sum(axis=-1)
    i = np.unravel_index(int(np.argmin(d)), d.shape)
    lvl = int(np.argmin(np.abs(fld.times - bar.s)))
    return float(abs(fld.values[lvl][i] - bar.value(pts[i], fld.times[lvl])))


def operator_consistency(ps: ProblemSpec, scheme: str, psi, dpsi, spacings, center=(0.5, 0.5)) -> list[float]:
    """|discrete H(psi) - H(D psi, D^2 psi)| at ``center`` for each spacing.

    ``psi(x)`` evaluates the test function on (..., 2) arrays; ``dpsi(x)``
    returns its exact (p, X) at one point.
    """
    check_scheme(ps, scheme)
    errs = []
    c = np.asarray(center, dtype=float)
    p, X = dpsi(c)
    exact = float(ps.operator(np.asarray(p), np.asarray(X)))
    for h in spacings:
        offs = np.arange(-2, 3) * h
        P = np.stack(np.meshgrid(c[0] + offs, c[1] + offs, indexing="ij"), axis=-1)
        u = psi(P)
        hx = hy = h
        if scheme == "inf":
            F, _, _ = _inf_box(u, hx, hy)
        elif scheme == "plap":
            F, _ = _plap_box(u, hx, hy, ps.operator.params[1])
        else:
            pp, XX = _central_box(u, hx, hy)
            F, _ = _pucci_box(ps.operator, pp, XX, hx, hy)
        errs.append(abs(float(F[1, 1]) - exact))
    return errs


# ---------------------------------------------------------------------------
# I/O


def write_field(path, fld: GridField) -> None:
    """PBAR1 layout: magic, geometry kind, dims, nt, dt, geometry floats, times, values."""
    g = fld.geometry
    n1, n2 = g.shape
    if isinstance(g, BoxGrid):
        kind, gf = 0, [g.bounds[0][0], g.bounds[0][1], g.bounds[1][0], g.bounds[1][1]]
    else:
        kind, gf = 1, [g.center[0], g.center[1], g.inner, g.outer]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BIII", kind, n1, n2, fld.nt))
        fh.write(struct.pack("<d", fld.dt))
        fh.write(struct.pack("<4d", *gf))
        fh.write(np.asarray(fld.times, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(fld.values, dtype="<f8").tobytes())


def read_field(path) -> GridField:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:5] != MAGIC:
        raise GridError("not a PBAR1 file")
    off = 5
    kind, n1, n2, nt = struct.unpack_from("<BIII", data, off)
    off += struct.calcsize("<BIII")
    (dt,) = struct.unpack_from("<d", data, off)
    off += 8
    gf = struct.unpack_from("<4d", data, off)
    off += 32
    times = np.frombuffer(data, dtype="<f8", count=nt, offset=off).copy()
    off += 8 * nt
    vals = np.frombuffer(data, dtype="<f8", count=nt * n1 * n2, offset=off).reshape(nt, n1, n2).copy()
    if kind == 0:
        geom = BoxGrid(((gf[0], gf[1]), (gf[2], gf[3])), n1, n2)
    else:
        geom = AnnulusGrid((gf[0], gf[1]), gf[2], gf[3], n1, n2)
    return GridField(geom, times, vals, (dt,) if dt > 0 else (), C1_DEFAULT, {})


def write_slices(path, fld: GridField, every: int = 1) -> None:
    pts = fld.geometry.points
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "u"])
        for lvl in range(0, fld.nt, every):
            t = fld.times[lvl]
            for (x, y), u in zip(pts.reshape(-1, 2), fld.values[lvl].ravel()):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(y)), repr(float(u))])
