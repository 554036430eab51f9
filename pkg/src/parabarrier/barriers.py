"""Bump (sub-solution) and indent (super-solution) barriers.

Every non-constant barrier has the form

    psi(x, t) = c * exp(sigma * (L - ell |t - s|)) * v(|x - center|)

inside its region R and equals the constant c outside, where sigma = +1 for
bumps (c = theta - 2 eps) and -1 for indents (c = M + 2 eps), L = ell * tau,
and v is a power profile a + b r^beta. R is where psi is on the far side of c.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .problem import Inapplicable, ProblemError, ProblemSpec
from .radial import RadialProfile, m_mu_at, radial_gradient_hessian

MAX_HALVINGS = 60
RES_TOL = 1e-8
SAFETY = 2.0


class ConstructionError(ProblemError):
    pass


FAMILIES = ("InitBump", "InitIndent", "SideBumpI", "SideIndentI", "SideBumpII", "SideIndentII")


@dataclass(frozen=True)
class BarrierSpec:
    family: str
    part: str
    anchor: tuple
    s: float
    eps: float
    sign: int
    outside_value: float
    L: float = 0.0
    ell: float = 0.0
    tau: float = 0.0
    profile: Optional[RadialProfile] = None
    r_range: tuple = (0.0, np.inf)
    constants: dict = field(default_factory=dict, hash=False)

    @property
    def is_constant(self) -> bool:
        return self.profile is None

    @property
    def is_bump(self) -> bool:
        return self.sign > 0

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.profile.center)

    def time_factor(self, t):
        t = np.asarray(t, dtype=float)
        return self.outside_value * np.exp(self.sign * (self.L - self.ell * np.abs(t - self.s)))

    def _radius(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return np.sqrt((d * d).sum(axis=-1))

    def boundary_radius(self, t):
        """Outer radius of the section of R at time t (nan outside the time window)."""
        t = np.asarray(t, dtype=float)
        gap = self.L - self.ell * np.abs(t - self.s)
        target = np.exp(-self.sign * gap)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = self.profile.inverse(target)
        r = np.where(gap >= 0, r, np.nan)
        return np.clip(r, self.r_range[0], self.r_range[1])

    def in_region(self, x, t):
        if self.is_constant:
            return np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(t)), dtype=bool)
        t = np.asarray(t, dtype=float)
        r = self._radius(x)
        lo, hi = self.r_range
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            inside = self.sign * (self.time_factor(t) * self.profile.value(r) - self.outside_value) >= 0
        win = np.abs(t - self.s) <= self.tau
        if self.family.startswith("Init"):
            win &= t >= 0
        return inside & win & (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))

    def value(self, x, t):
        """The barrier extended by its outside value to all of space-time."""
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(t))
        if self.is_constant:
            return np.full(shape, self.outside_value)
        inside = np.broadcast_to(self.in_region(x, t), shape)
        r = np.broadcast_to(self._radius(x), shape)
        tt = np.broadcast_to(np.asarray(t, dtype=float), shape)
        out = np.full(shape, self.outside_value)
        out[inside] = self.time_factor(tt[inside]) * self.profile.value(r[inside])
        return out

    def derivatives(self, x, t, at_anchor_time: bool = False):
        """(value, Dpsi, D^2psi, psi_t) at points of R.

        On the slice t = s the time derivative is replaced by the one-sided
        worst case sigma * ell * psi.
        """
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        A = self.time_factor(t)
        r = self._radius(x)
        v = self.profile.value(r)
        p, X = radial_gradient_hessian(self.profile, x)
        val = A * v
        if at_anchor_time:
            dt = self.sign * self.ell * val
        else:
            dt = -self.sign * self.ell * np.sign(t - self.s) * val
        return val, A[..., None] * p, A[..., None, None] * X, dt

    def anchor_value(self) -> float:
        y = np.asarray(self.anchor, dtype=float)
        return float(self.value(y, self.s))

    def as_dict(self) -> dict:
        out = {
            "family": self.family, "part": self.part, "anchor": list(self.anchor), "s": self.s,
            "eps": self.eps, "kind": "bump" if self.is_bump else "indent",
            "outside_value": self.outside_value, "constant": self.is_constant,
            "L": self.L, "ell": self.ell, "tau": self.tau,
        }
        if not self.is_constant:
            out["profile"] = {"a": self.profile.a, "b": self.profile.b, "beta": self.profile.beta,
                              "center": list(self.profile.center)}
            out["region"] = {"r_min": self.r_range[0], "r_max": self.r_range[1],
                             "t_min": self.s - self.tau if not self.family.startswith("Init") else 0.0,
                             "t_max": self.s + self.tau}
        out["constants"] = {k: v for k, v in sorted(self.constants.items())}
        return out


# ---------------------------------------------------------------------------
# shared setup


def _eps(ps: ProblemSpec, eps: Optional[float]) -> float:
    e = ps.default_eps() if eps is None else float(eps)
    if not (0 < e and ps.theta / 2 <= (ps.theta - 2 * e) * (1 + 1e-12)):
        raise ConstructionError("eps must satisfy theta/2 <= theta - 2 eps")
    return e


def data_window(ps: ProblemSpec, y, s: float, eps: float, samples: int = 400) -> tuple[float, float]:
    """Largest (delta0, tau0) on the doubling ladder with |h - h(y, s)| <= eps on
    the parabolic boundary inside |x - y| <= delta0, |t - s| <= 2 tau0."""
    dom = ps.domain
    y = np.asarray(y, dtype=float)
    hy = float(ps.h(y, s))
    rng = np.random.default_rng(12345)
    n = dom.dim
    ball = rng.normal(size=(samples, n))
    ball /= np.linalg.norm(ball, axis=1, keepdims=True)
    ball *= rng.uniform(0, 1, size=(samples, 1)) ** (1.0 / n)
    tq = np.linspace(-1.0, 1.0, 21)

    def ok(d, tw):
        pts = y + d * ball
        t_lo, t_hi = max(0.0, s - 2 * tw), min(ps.T, s + 2 * tw)
        checks = []
        if t_lo <= 0.0:
            bottom = pts[dom.contains(pts)]
            if len(bottom):
                checks.append(ps.h(bottom, 0.0).ravel())
        lat = dom.project_boundary(pts)
        lat = lat[np.linalg.norm(lat - y, axis=1) <= d]
        lat = np.vstack([lat, y[None, :]]) if dom.on_boundary(y, 1e-9) else lat
        if len(lat) and t_hi >= t_lo:
            ts = np.clip(s + 2 * tw * tq, t_lo, t_hi)
            checks.append(ps.h(lat[:, None, :], ts[None, :]).ravel())
        if not checks:
            return True
        return float(np.abs(np.concatenate(checks) - hy).max()) <= eps

    d, tw = 1e-3 * dom.diameter, 1e-3 * ps.T
    halvings = 0
    while not ok(d, tw):
        d, tw = d / 2, tw / 2
        halvings += 1
        if halvings > MAX_HALVINGS:
            raise ConstructionError("no oscillation window found around the anchor")
    while d < dom.diameter and ok(2 * d, min(2 * tw, ps.T)):
        d, tw = 2 * d, min(2 * tw, ps.T)
    # keep a factor-2 margin under the last sampled window
    return d / 2, tw / 2


def _constant(ps, family, y, s, eps, sign) -> BarrierSpec:
    c = ps.theta - 2 * eps if sign > 0 else ps.M + 2 * eps
    return BarrierSpec(family, ps.part, tuple(map(float, y)), float(s), eps, sign, c,
                       constants={"theta": ps.theta, "M": ps.M})


def _A_range(c, L, sign):
    return (c, c * np.exp(L)) if sign > 0 else (c * np.exp(-L), c)


def _max_pow(A_range, expo):
    return max(a ** expo for a in A_range)


def _common(ps, y, s, eps, sign, family):
    ps.validate()
    eps = _eps(ps, eps)
    if ps.M + 2 * eps > 2 * ps.M:
        raise ConstructionError("eps too large for the bracket [theta/2, 2M]")
    hy = float(ps.h(np.asarray(y, dtype=float), s))
    if sign > 0:
        c = ps.theta - 2 * eps
        L = float(np.log((hy - 2 * eps) / c))
    else:
        c = ps.M + 2 * eps
        L = float(np.log(c / (hy + 2 * eps)))
    omega, nu = ps.f_range()
    base = {"theta": ps.theta, "M": ps.M, "omega": omega, "nu": nu, "B0": ps.B0,
            "h_anchor": hy, "L": L}
    return eps, hy, c, L, omega, nu, base


# ---------------------------------------------------------------------------
# initial-data barriers


def _build_init(ps: ProblemSpec, y, eps, delta_hint, sign, family) -> BarrierSpec:
    eps, hy, c, L, omega, nu, base = _common(ps, y, 0.0, eps, sign, family)
    if L <= 1e-14:
        return _constant(ps, family, y, 0.0, eps, sign)
    op = ps.operator
    k, k1, Gam = op.k, op.k1, ps.Gamma
    mu0 = m_mu_at(op, 0.0, ps.coer.sphere_samples)[1]
    if mu0 <= 0:
        raise Inapplicable("mu(0) must be positive")
    y = np.asarray(y, dtype=float)
    d0, t0 = data_window(ps, y, 0.0, eps)
    dist = float(ps.domain.dist_to_boundary(y))
    delta = min(delta_hint if delta_hint else np.inf, d0, dist if dist > 0 else np.inf, 1.0)
    touches_side = dist <= 0 or delta > dist
    A_rng = _A_range(c, L, sign)
    B0 = ps.B0
    for _ in range(MAX_HALVINGS):
        b = (1 - np.exp(-L)) / delta ** 2 if sign > 0 else (np.exp(L) - 1) / delta ** 2
        if ps.part == "I":
            if sign > 0:
                ell = 3 * (8 * b) ** k * delta ** k1 * mu0 * ps.M ** (2 * k - 1) / (omega * ps.theta ** k)
            else:
                ell = 3 * (4 * b) ** k * delta ** k1 * ps.M ** (k - 1) * mu0 / omega
            small = B0 * delta ** k <= 2 * mu0 * delta ** k1
        else:
            gain = np.exp(L) if sign > 0 else 1.0
            need = gain * max(
                a ** (Gam - 1) * B0 * (2 * b * delta) ** Gam + a ** (k - 1) * (2 * b) ** k * delta ** k1 * mu0
                for a in A_rng)
            ell = max(SAFETY * need, SAFETY * L / ps.T)
            if touches_side:
                ell = max(ell, L / t0)
            small = True
        tau = L / ell
        fits = tau < ps.T and (not touches_side or tau <= t0)
        if small and fits:
            break
        delta /= 2
    else:
        raise ConstructionError(f"{family}: delta-shrink exhausted")
    prof = RadialProfile(1.0, -b if sign > 0 else b, 2.0, tuple(y))
    const = dict(base, b=b, beta=2.0, delta=delta, ell=ell, tau=tau, mu0=mu0,
                 delta0=d0, tau0=t0, k=k, k1=k1, gamma=op.gamma, Gamma=Gam)
    return BarrierSpec(family, ps.part, tuple(map(float, y)), 0.0, eps, sign, c, L, ell, tau,
                       prof, (0.0, delta), const)


def build_init_bump(ps: ProblemSpec, y, eps: Optional[float] = None, delta_hint: Optional[float] = None) -> BarrierSpec:
    """Sub-solution touching h(y, 0) - 2 eps at the anchor (y, 0)."""
    return _build_init(ps, y, eps, delta_hint, +1, "InitBump")


def build_init_indent(ps: ProblemSpec, y, eps: Optional[float] = None, delta_hint: Optional[float] = None) -> BarrierSpec:
    """Super-solution touching h(y, 0) + 2 eps at the anchor (y, 0)."""
    return _build_init(ps, y, eps, delta_hint, -1, "InitIndent")


# ---------------------------------------------------------------------------
# side barriers, Case (i)


def side_case1_certificate(k, k2, gamma, Gam, beta, mu_abs, b, delta, ell, L, A_rng, nu, B0, sign):
    """Sufficient conditions for the residual sign of a Case (i) side barrier.

    Returns (gradient-term margin, time-term margin); both must be >= 0.
    """
    a = gamma - k * beta - Gam * (1 - beta)
    grad = mu_abs / 2 - B0 * _max_pow(A_rng, Gam - k) * (b * beta) ** (Gam - k) * delta ** a
    gain = 1.0 if sign > 0 else np.exp(L)
    time = (b * beta) ** k * mu_abs / (2 * delta ** (gamma - beta * k)) - nu * ell * gain * _max_pow(A_rng, 1 - k)
    return grad, time


def build_side_case1(ps: ProblemSpec, kind: str, y, s: float, eps: Optional[float] = None,
                     lambda_bar: Optional[float] = None, b_scale: float = 1.0) -> BarrierSpec:
    """Side barrier v = 1 -/+ b r^beta around a boundary point, beta = 2 - lambda_bar.

    ``b_scale`` multiplies the solved b (values below 1 produce deliberately
    invalid barriers for negative controls).
    """
    sign = _kind_sign(kind)
    family = "SideBumpI" if sign > 0 else "SideIndentI"
    if ps.coer.case_tag != "CaseI":
        raise Inapplicable("Case (i) barriers need a Case (i) coercivity certificate")
    if not 0 < s < ps.T:
        raise ConstructionError("side anchors need 0 < s < T")
    y = np.asarray(y, dtype=float)
    if not ps.domain.on_boundary(y, 1e-9):
        raise ConstructionError("side anchors must lie on the boundary")
    eps, hy, c, L, omega, nu, base = _common(ps, y, s, eps, sign, family)
    if L <= 1e-14:
        return _constant(ps, family, y, s, eps, sign)
    op = ps.operator
    lam = ps.coer.lambda_bar if lambda_bar is None else float(lambda_bar)
    if not 1 < lam < 2:
        raise Inapplicable("lambda_bar must lie in (1, 2)")
    mu = m_mu_at(op, lam, ps.coer.sphere_samples)[1]
    if not mu < 0:
        raise Inapplicable(f"mu({lam}) is not negative")
    mu_abs = -mu
    beta = 2.0 - lam
    k, k2, gamma, Gam = op.k, op.k2, op.gamma, ps.Gamma
    d0, t0 = data_window(ps, y, s, eps)
    tau = min(t0, s)
    ell = L / tau
    A_rng = _A_range(c, L, sign)
    B0 = ps.B0
    cap = min(1.0, d0 ** k2, mu_abs / (2 * B0) if B0 > 0 else np.inf) ** (1.0 / k2)
    top = (1 - np.exp(-L)) if sign > 0 else (np.exp(L) - 1)
    if ps.part == "I":
        if sign > 0:
            b = (2 * ell * nu / (mu_abs * beta ** k * (ps.theta / 2) ** (k - 1))) ** (1 / k)
        else:
            b = (8 * ps.M * ell * nu / ((ps.theta * beta) ** k * mu_abs)) ** (1 / k)
    else:
        b = 0.0
    b = max(b, top / cap ** beta)
    for _ in range(MAX_HALVINGS):
        delta = (top / b) ** (1 / beta)
        g, tm = side_case1_certificate(k, k2, gamma, Gam, beta, mu_abs, b, delta, ell, L, A_rng, nu, B0, sign)
        if g >= 0 and tm >= 0 and delta <= cap * (1 + 1e-12):
            break
        b *= 2
    else:
        raise ConstructionError(f"{family}: b-raise exhausted")
    b *= b_scale
    delta = (top / b) ** (1 / beta)
    prof = RadialProfile(1.0, -b if sign > 0 else b, beta, tuple(y))
    const = dict(base, b=b, beta=beta, delta=delta, ell=ell, tau=tau, lambda_bar=lam, mu_bar=mu,
                 delta0=d0, tau0=t0, k=k, k1=op.k1, gamma=gamma, Gamma=Gam,
                 a_exp=gamma - k * beta - Gam * (1 - beta), certificate=[g, tm])
    return BarrierSpec(family, ps.part, tuple(map(float, y)), float(s), eps, sign, c, L, ell, tau,
                       prof, (0.0, delta), const)


# ---------------------------------------------------------------------------
# side barriers, Case (ii)


def side_case2_certificate(k, gamma, Gam, beta, mu_abs, C, rho, ell, L, A_rng, nu, B0, sign):
    """Sufficient conditions for the residual sign of a Case (ii) shell barrier."""
    spread = max(1.0, 2.0 ** (beta * (k - Gam)))
    grad = mu_abs / 2 - B0 * _max_pow(A_rng, Gam - k) * (C * beta) ** (Gam - k) * (2 * rho) ** (gamma - Gam) * spread
    gain = 1.0 if sign > 0 else np.exp(L)
    main = beta ** k * mu_abs / (2 ** (beta * k + gamma + 1) * rho ** gamma)
    time = main - nu * ell * gain * _max_pow(A_rng, 1 - k) * C ** (-k)
    return grad, time


def build_side_case2(ps: ProblemSpec, kind: str, y, s: float, eps: Optional[float] = None,
                     beta_margin: float = 0.5) -> BarrierSpec:
    """Shell barrier on rho <= |x - z| <= 2 rho around an exterior ball B_rho(z) touching y."""
    sign = _kind_sign(kind)
    family = "SideBumpII" if sign > 0 else "SideIndentII"
    if ps.coer.case_tag != "CaseII":
        raise Inapplicable("Case (ii) barriers need a Case (ii) coercivity certificate")
    rho0 = ps.rho0 if ps.rho0 is not None else getattr(ps.domain, "rho0", None)
    if rho0 is None:
        raise Inapplicable("no exterior ball radius available")
    if not 0 < s < ps.T:
        raise ConstructionError("side anchors need 0 < s < T")
    y = np.asarray(y, dtype=float)
    if not ps.domain.on_boundary(y, 1e-9):
        raise ConstructionError("side anchors must lie on the boundary")
    eps, hy, c, L, omega, nu, base = _common(ps, y, s, eps, sign, family)
    if L <= 1e-14:
        return _constant(ps, family, y, s, eps, sign)
    op = ps.operator
    if beta_margin <= 0:
        raise ConstructionError("beta margin must be positive")
    beta = ps.coer.lambda_bar - 2.0 + beta_margin
    lam = beta + 2.0
    mu = m_mu_at(op, lam, ps.coer.sphere_samples)[1]
    if not mu < 0:
        raise Inapplicable(f"mu({lam}) is not negative")
    mu_abs = -mu
    k, gamma, Gam = op.k, op.gamma, ps.Gamma
    d0, t0 = data_window(ps, y, s, eps)
    tau = min(t0, s)
    ell = L / tau
    A_rng = _A_range(c, L, sign)
    C = ((1 - np.exp(-L)) if sign > 0 else (np.exp(L) - 1)) / (1 - 2.0 ** (-beta))
    rho = min(rho0, d0 / 4)
    B0 = ps.B0
    if B0 > 0 and gamma > k:
        rho = min(rho, 0.5 * (mu_abs / (2 * B0)) ** (1 / (gamma - k)))
    for _ in range(MAX_HALVINGS):
        g, tm = side_case2_certificate(k, gamma, Gam, beta, mu_abs, C, rho, ell, L, A_rng, nu, B0, sign)
        if g >= 0 and tm >= 0:
            break
        rho /= 2
    else:
        raise ConstructionError(f"{family}: rho-shrink exhausted")
    z = ps.domain.exterior_center(y, rho)
    if sign > 0:
        prof = RadialProfile(1.0 - C, C * rho ** beta, -beta, tuple(z))
    else:
        prof = RadialProfile(1.0 + C, -C * rho ** beta, -beta, tuple(z))
    const = dict(base, C=C, beta=beta, rho=rho, ell=ell, tau=tau, lambda_used=lam, mu_used=mu,
                 lambda_bar=ps.coer.lambda_bar, delta0=d0, tau0=t0, rho0=rho0, k=k, k1=op.k1,
                 gamma=gamma, Gamma=Gam, certificate=[g, tm])
    return BarrierSpec(family, ps.part, tuple(map(float, y)), float(s), eps, sign, c, L, ell, tau,
                       prof, (rho, 2 * rho), const)


def _kind_sign(kind: str) -> int:
    k = kind.lower()
    if k == "bump":
        return 1
    if k == "indent":
        return -1
    raise ValueError("kind must be 'Bump' or 'Indent'")


def build(ps: ProblemSpec, family: str, y, s: float = 0.0, eps: Optional[float] = None, **kw) -> BarrierSpec:
    """Dispatch on the family tag."""
    if family == "InitBump":
        return build_init_bump(ps, y, eps, kw.get("delta_hint"))
    if family == "InitIndent":
        return build_init_indent(ps, y, eps, kw.get("delta_hint"))
    if family in ("SideBumpI", "SideIndentI"):
        return build_side_case1(ps, "Bump" if family == "SideBumpI" else "Indent", y, s, eps,
                                kw.get("lambda_bar"), kw.get("b_scale", 1.0))
    if family in ("SideBumpII", "SideIndentII"):
        return build_side_case2(ps, "Bump" if family == "SideBumpII" else "Indent", y, s, eps,
                                kw.get("beta_margin", 0.5))
    raise ValueError(f"unknown barrier family {family!r}")


# ---------------------------------------------------------------------------
# verification


@dataclass
class ResidualReport:
    family: str
    kind: str
    samples: int
    min_residual: float = 0.0
    max_residual: float = 0.0
    worst_margin: float = 0.0
    worst_point: Optional[list] = None
    resampled: int = 0
    violations: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        return {"family": self.family, "kind": self.kind, "samples": self.samples,
                "min_residual": self.min_residual, "max_residual": self.max_residual,
                "worst_margin": self.worst_margin, "worst_point": self.worst_point,
                "resampled": self.resampled, "violations": self.violations, "passed": self.passed}


def _time_window(bar: BarrierSpec, T: float):
    if bar.family.startswith("Init"):
        return 0.0, min(bar.tau, T)
    return max(0.0, bar.s - bar.tau), min(T, bar.s + bar.tau)


def _sample_region(ps, bar, n, rng, on_slice=False):
    """Stratified draws (x, t) inside R and inside the closed domain."""
    dom = ps.domain
    lo_t, hi_t = _time_window(bar, ps.T)
    xs, ts = [], []
    got, rejected = 0, 0
    center = bar.center
    for _ in range(200):
        need = n - got
        if need <= 0:
            break
        m = max(2 * need, 16)
        if on_slice:
            t = np.full(m, bar.s)
        else:
            t = lo_t + (hi_t - lo_t) * (rng.permutation(m) + rng.uniform(size=m)) / m
        rb = bar.boundary_radius(t)
        r_lo = max(bar.r_range[0], 1e-8)
        u = (rng.permutation(m) + rng.uniform(size=m)) / m
        r = r_lo + (rb - r_lo) * u
        e = rng.normal(size=(m, dom.dim))
        e /= np.linalg.norm(e, axis=1, keepdims=True)
        x = center + r[:, None] * e
        okay = np.isfinite(r) & (rb > r_lo) & (t > 0) & (t < ps.T) & dom.contains(x)
        okay &= bar.in_region(x, t)
        if not on_slice:
            okay &= t != bar.s
        rejected += int((~okay).sum())
        take = np.flatnonzero(okay)[:need]
        xs.append(x[take])
        ts.append(t[take])
        got += len(take)
    if got == 0:
        return np.zeros((0, dom.dim)), np.zeros(0), rejected
    return np.vstack(xs), np.concatenate(ts), rejected


def residual(ps: ProblemSpec, bar: BarrierSpec, x, t, at_anchor_time: bool = False):
    """H(Dpsi, D^2psi) + chi |Dpsi|^Gamma - f(psi) psi_t and the H part alone."""
    val, p, X, dt = bar.derivatives(x, t, at_anchor_time)
    H = ps.operator(p, X)
    grad = np.sqrt((p * p).sum(axis=-1))
    res = H + ps.chi(t) * grad ** ps.Gamma - ps.nl.f(val) * dt
    return res, H


def verify_inequality(ps: ProblemSpec, bar: BarrierSpec, samples: int = 10000, rng_seed: int = 0,
                      tol: float = RES_TOL) -> ResidualReport:
    """Sample the region of ``bar`` and test the sign of the equation residual."""
    rep = ResidualReport(bar.family, "bump" if bar.is_bump else "indent", 0)
    if bar.is_constant:
        rep.samples = samples
        return rep
    rng = np.random.default_rng(rng_seed)
    slice_n = 0 if bar.family.startswith("Init") or not 0 < bar.s < ps.T else samples // 10
    x, t, rej = _sample_region(ps, bar, samples - slice_n, rng)
    parts = [(x, t, False)]
    if slice_n:
        xs, tss, rej2 = _sample_region(ps, bar, slice_n, rng, on_slice=True)
        parts.append((xs, tss, True))
        rej += rej2
    rep.resampled = rej
    worst = np.inf
    mins, maxs = [], []
    for xx, tt, sl in parts:
        if not len(tt):
            continue
        res, H = residual(ps, bar, xx, tt, sl)
        scale = np.maximum(1.0, np.abs(H))
        margin = bar.sign * res / scale
        rep.samples += len(tt)
        rep.violations += int((margin < -tol).sum())
        i = int(np.argmin(margin))
        if margin[i] < worst:
            worst = float(margin[i])
            rep.worst_point = [*map(float, xx[i]), float(tt[i])]
        mins.append(float(res.min()))
        maxs.append(float(res.max()))
    rep.min_residual = min(mins) if mins else 0.0
    rep.max_residual = max(maxs) if maxs else 0.0
    rep.worst_margin = worst if np.isfinite(worst) else 0.0
    return rep


def extend_constant(bar: BarrierSpec, pairs: int = 1000, rng_seed: int = 0, tol: float = 1e-6):
    """Total map (x, t) -> barrier value; continuity across the edge of R is checked first."""
    gap = continuity_gap(bar, pairs, rng_seed)
    if gap > tol:
        raise ConstructionError(f"{bar.family}: jump of {gap:.3e} across the region boundary")
    return bar.value


def continuity_gap(bar: BarrierSpec, pairs: int = 1000, rng_seed: int = 0) -> float:
    """Largest jump of the extended barrier over pairs straddling the edge of R."""
    if bar.is_constant:
        return 0.0
    rng = np.random.default_rng(rng_seed)
    n = bar.center.shape[0]
    lo_t = 0.0 if bar.family.startswith("Init") else bar.s - bar.tau
    hi_t = bar.s + bar.tau
    half = pairs // 2
    t = rng.uniform(lo_t, hi_t, size=half)
    e = rng.normal(size=(half, n))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    rb = bar.boundary_radius(t)
    keep = np.isfinite(rb) & (rb > bar.r_range[0] * (1 + 1e-6))
    t, e, rb = t[keep], e[keep], rb[keep]
    xin = bar.center + (rb * (1 - 1e-10))[:, None] * e
    xout = bar.center + (rb * (1 + 1e-10))[:, None] * e
    gaps = [np.abs(bar.value(xin, t) - bar.value(xout, t))]
    # time edge of the window, just next to the anchor radius
    m = pairs - half
    e = rng.normal(size=(m, n))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    r0 = max(bar.r_range[0], 0.0) + 1e-12 * max(1.0, bar.r_range[1])
    x = bar.center + r0 * e
    ends = [bar.s + bar.tau]
    if not bar.family.startswith("Init"):
        ends.append(bar.s - bar.tau)
    for te in ends:
        sgn = 1.0 if te > bar.s else -1.0
        tin = te - sgn * bar.tau * 1e-10
        tout = te + sgn * bar.tau * 1e-10
        gaps.append(np.abs(bar.value(x, tin) - bar.value(x, tout)))
    return float(np.concatenate(gaps).max())


@dataclass
class CompatibilityReport:
    family: str
    samples: int
    anchor_gap: float
    anchor_error: float
    worst_excess: float
    witness: Optional[list] = None
    bracket_ok: bool = True

    @property
    def passed(self) -> bool:
        return self.worst_excess <= 1e-12 and self.anchor_error <= 1e-9 and self.bracket_ok

    def as_dict(self) -> dict:
        return {"family": self.family, "samples": self.samples, "anchor_gap": self.anchor_gap,
                "anchor_error": self.anchor_error, "worst_excess": self.worst_excess,
                "witness": self.witness, "bracket_ok": self.bracket_ok, "passed": self.passed}


def boundary_compatibility(ps: ProblemSpec, bar: BarrierSpec, samples: int = 10000,
                           rng_seed: int = 0) -> CompatibilityReport:
    """Bumps stay below h and indents above h on sampled points of the parabolic boundary."""
    rng = np.random.default_rng(rng_seed)
    dom = ps.domain
    y = np.asarray(bar.anchor, dtype=float)
    q = samples // 4
    # global sample of the bottom and the lateral boundary
    bottom = dom.interior_grid(int(np.sqrt(q)) + 2)
    side = dom.boundary_points(max(q // 20, 8))
    ts = np.linspace(0.0, ps.T, 21)[:-1]
    X_side = np.repeat(side, len(ts), axis=0)
    T_side = np.tile(ts, len(side))
    # local sample around the anchor at the barrier's own scale
    scale = max(bar.r_range[1] if np.isfinite(bar.r_range[1]) else 0.0, 1e-12)
    if not bar.is_constant:
        scale = float(np.max(np.abs(bar.center - y))) + bar.r_range[1]
    loc = y + scale * rng.uniform(-1.5, 1.5, size=(q, dom.dim))
    loc_b = dom.project_boundary(loc)
    loc_i = loc[dom.contains(loc)]
    t_loc = np.clip(bar.s + bar.tau * rng.uniform(-1.5, 1.5, size=q), 0.0, ps.T)
    pts = [(bottom, np.zeros(len(bottom))), (X_side, T_side),
           (loc_b, t_loc), (loc_i, np.zeros(len(loc_i)))]
    worst, witness, count = -np.inf, None, 0
    lo_b, hi_b = ps.theta / 2, 2 * ps.M
    bracket_ok = True
    for X, T in pts:
        if not len(X):
            continue
        bv = bar.value(X, T)
        hv = ps.h(X, T)
        excess = bar.sign * (bv - hv)
        count += len(T)
        i = int(np.argmax(excess))
        if excess[i] > worst:
            worst = float(excess[i])
            witness = [*map(float, X[i]), float(T[i])]
        bracket_ok &= bool(np.all((bv >= lo_b - 1e-12) & (bv <= hi_b + 1e-12)))
    hy = float(ps.h(y, bar.s))
    av = bar.anchor_value()
    gap = abs(hy - av)
    expected = hy - 2 * bar.eps if bar.is_bump else hy + 2 * bar.eps
    err = abs(av - expected) if not bar.is_constant else abs(av - bar.outside_value)
    return CompatibilityReport(bar.family, count, gap, err, worst, witness, bracket_ok)


def parameter_identities(bar: BarrierSpec) -> dict:
    """Relative residuals of the defining algebraic relations, recomputed from stored constants."""
    if bar.is_constant:
        return {}
    c = bar.constants
    L, ell, tau = bar.L, bar.ell, bar.tau
    out = {}

    def rel(a, b):
        return abs(a - b) / max(abs(a), abs(b), 1e-300)

    out["ell_tau"] = rel(ell * tau, L)
    hy, th, M, eps = c["h_anchor"], c["theta"], c["M"], bar.eps
    if bar.is_bump:
        out["L_log"] = rel(L, np.log((hy - 2 * eps) / (th - 2 * eps)))
    else:
        out["L_log"] = rel(L, np.log((M + 2 * eps) / (hy + 2 * eps)))
    beta = c["beta"]
    if "delta" in c:
        top = 1 - np.exp(-L) if bar.is_bump else np.exp(L) - 1
        out["b_delta"] = rel(c["b"] * c["delta"] ** beta, top)
    if "C" in c:
        top = 1 - np.exp(-L) if bar.is_bump else np.exp(L) - 1
        out["C_shell"] = rel(c["C"] * (1 - 2.0 ** (-beta)), top)
    if bar.family.startswith("Init") and bar.part == "I":
        k, k1 = c["k"], c["k1"]
        if bar.is_bump:
            want = 3 * (8 * c["b"]) ** k * c["delta"] ** k1 * c["mu0"] * M ** (2 * k - 1) / (c["omega"] * th ** k)
        else:
            want = 3 * (4 * c["b"]) ** k * c["delta"] ** k1 * M ** (k - 1) * c["mu0"] / c["omega"]
        out["ell_formula"] = rel(ell, want)
    if "a_exp" in c:
        G, k, g = c["Gamma"], c["k"], c["gamma"]
        out["exponent_bookkeeping"] = rel(c["a_exp"] - beta * (G - k), g - G)
    return out


def time_monotonicity_gap(bar: BarrierSpec, pairs: int = 1000, rng_seed: int = 0) -> float:
    """Worst breach of monotonicity in |t - s| at fixed x.

    Bumps must not increase and indents must not decrease as |t - s| grows.
    """
    if bar.is_constant:
        return 0.0
    rng = np.random.default_rng(rng_seed)
    n = bar.center.shape[0]
    e = rng.normal(size=(pairs, n))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    lo, hi = bar.r_range
    r = lo + (hi - lo) * rng.uniform(size=pairs)
    x = bar.center + r[:, None] * e
    d1 = bar.tau * rng.uniform(0, 1.2, size=pairs)
    d2 = d1 + bar.tau * rng.uniform(0, 0.5, size=pairs)
    side = 1.0 if bar.family.startswith("Init") else np.where(rng.uniform(size=pairs) < 0.5, -1.0, 1.0)
    near = bar.value(x, bar.s + side * d1)
    far = bar.value(x, bar.s + side * d2)
    breach = bar.sign * (far - near)
    return float(max(0.0, breach.max()))
