"""Coercivity profiles m(lambda), mu(lambda) by optimisation over the unit sphere."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .operators import Operator

ZERO_BAND = 1e-8
CASE_I_STEP = 0.01
BISECT_TOL = 1e-6

GOLDEN = (1 + 5 ** 0.5) / 2


@dataclass(frozen=True)
class SphereExtrema:
    m_min: float
    m_max: float
    mu_min: float
    mu_max: float

    @property
    def m(self) -> float:
        return min(self.m_min, -self.mu_max)

    @property
    def mu(self) -> float:
        return max(self.m_max, -self.mu_min)

    def __iter__(self):
        return iter((self.m_min, self.m_max, self.mu_min, self.mu_max))


@dataclass
class CoercivityProfile:
    operator_name: str
    lambda_grid: np.ndarray
    m_values: np.ndarray
    mu_values: np.ndarray
    lambda1: float | None
    lambda0: float | None
    lambda_bar: float | None
    case_tag: str
    sphere_samples: int
    status: str = "ok"
    branches: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "operator": self.operator_name,
            "grid": [
                {"lambda": float(l), "m": float(m), "mu": float(u),
                 "m_min": b.m_min, "m_max": b.m_max, "mu_min": b.mu_min, "mu_max": b.mu_max}
                for l, m, u, b in zip(self.lambda_grid, self.m_values, self.mu_values, self.branches)
            ],
            "lambda1": self.lambda1,
            "lambda0": self.lambda0,
            "lambda_bar": self.lambda_bar,
            "case": self.case_tag,
            "status": self.status,
            "sphere_samples": self.sphere_samples,
        }


@lru_cache(maxsize=32)
def sphere_points(n: int, samples: int, seed: int = 0) -> np.ndarray:
    """Deterministic quasi-uniform unit vectors, with axes and diagonals appended."""
    if n == 2:
        ang = 2 * np.pi * ((np.arange(samples) / GOLDEN) % 1.0)
        pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    elif n == 3:
        i = np.arange(samples) + 0.5
        z = 1 - 2 * i / samples
        ang = 2 * np.pi * i / GOLDEN
        rr = np.sqrt(1 - z * z)
        pts = np.stack([rr * np.cos(ang), rr * np.sin(ang), z], axis=1)
    else:
        pts = np.random.default_rng(seed).normal(size=(samples, n))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    extra = [np.eye(n), -np.eye(n)]
    signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T if n <= 6 else np.ones((1, n))
    extra.append(signs / np.sqrt(n))
    pts = np.vstack([pts] + extra)
    pts.setflags(write=False)
    return pts


@lru_cache(maxsize=8)
def _eye(n: int) -> np.ndarray:
    out = np.eye(n)
    out.setflags(write=False)
    return out


def _pencil(op: Operator, E: np.ndarray, lam, sign) -> np.ndarray:
    """H(e, sign * (I - lam e e^T)) for each row e; ``lam`` and ``sign`` may be per row."""
    lam = np.reshape(np.asarray(lam, dtype=float), (-1, 1, 1))
    sign = np.reshape(sign, (-1, 1, 1))
    X = (sign * lam) * (E[:, :, None] * E[:, None, :])
    X = _eye(op.dim) * sign - X
    return op.fn(E, X)


def _polish(op, E, lam, sign, flip, iters, h0):
    """Coordinate search on the sphere minimising flip * H(e, sign * (I - lam e e^T))."""
    n = op.dim
    cur = E.copy()
    val = flip * _pencil(op, cur, lam, sign)
    h = np.full(len(cur), h0)
    dirs = np.vstack([np.eye(n), -np.eye(n)])
    for _ in range(iters):
        best_val = val.copy()
        best = cur.copy()
        for d in dirs:
            trial = cur + h[:, None] * d
            trial /= np.linalg.norm(trial, axis=1, keepdims=True)
            tv = flip * _pencil(op, trial, lam, sign)
            better = tv < best_val
            best_val = np.where(better, tv, best_val)
            best[better] = trial[better]
        moved = best_val < val
        h = np.where(moved, h * 1.5, h * 0.5)
        cur, val = best, best_val
        if h.max() < 1e-15:
            break
    return flip * val


def extrema_batch(op: Operator, lams, samples: int = 4096, polish_iters: int = 50,
                  keep: int = 4) -> list[SphereExtrema]:
    """``sphere_extrema`` for several lambda values in one vectorised pass."""
    if samples < 8:
        raise ValueError("need at least 8 sphere samples")
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    nl = len(lams)
    E = sphere_points(op.dim, samples)
    ns = len(E)
    h0 = 2.0 * np.pi / samples if op.dim == 2 else 2.0 / samples ** (1.0 / (op.dim - 1))
    E_all = np.tile(E, (nl, 1))
    lam_all = np.repeat(lams, ns)
    # branch order: (sign +1, min), (sign +1, max), (sign -1, min), (sign -1, max)
    raw = np.empty((nl, 4))
    starts, lam_s, signs, flips = [], [], [], []
    for si, sign in enumerate((1.0, -1.0)):
        vals = _pencil(op, E_all, lam_all, sign).reshape(nl, ns)
        for fi, flip in enumerate((1.0, -1.0)):
            key = flip * vals
            part = np.argpartition(key, keep - 1, axis=1)[:, :keep]
            order = np.take_along_axis(
                part, np.argsort(np.take_along_axis(key, part, axis=1), axis=1, kind="stable"), axis=1)
            raw[:, 2 * si + fi] = np.take_along_axis(vals, order[:, :1], axis=1)[:, 0]
            starts.append(E[order].reshape(-1, op.dim))
            lam_s.append(np.repeat(lams, keep))
            signs.append(np.full(nl * keep, sign))
            flips.append(np.full(nl * keep, flip))
    if polish_iters > 0:
        pol = _polish(op, np.vstack(starts), np.concatenate(lam_s), np.concatenate(signs),
                      np.concatenate(flips), polish_iters, h0).reshape(4, nl, keep)
        raw[:, 0] = np.minimum(raw[:, 0], pol[0].min(axis=1))
        raw[:, 1] = np.maximum(raw[:, 1], pol[1].max(axis=1))
        raw[:, 2] = np.minimum(raw[:, 2], pol[2].min(axis=1))
        raw[:, 3] = np.maximum(raw[:, 3], pol[3].max(axis=1))
    return [SphereExtrema(*(float(v) for v in row)) for row in raw]


def sphere_extrema(op: Operator, lam: float, samples: int = 4096, polish_iters: int = 50,
                   keep: int = 4) -> SphereExtrema:
    """Extremes of H(e, I - lam e e^T) and H(e, lam e e^T - I) over unit e.

    Sampling gives values attained at real directions, and polishing only
    moves towards better ones, so a reported minimum never exceeds the value
    at any sampled direction (and symmetrically for maxima).
    """
    return extrema_batch(op, [lam], samples, polish_iters, keep)[0]


def m_mu(op: Operator, lam: float, samples: int = 4096, polish_iters: int = 50) -> tuple[float, float]:
    ex = sphere_extrema(op, lam, samples, polish_iters)
    return ex.m, ex.mu


def _neg(mu: float) -> bool:
    return mu < -ZERO_BAND


def _pos(m: float) -> bool:
    return m > ZERO_BAND


def _bisect(pred, lo: float, hi: float, tol: float = BISECT_TOL, splits: int = 16) -> tuple[float, float]:
    """Bracket of width <= tol between pred(lo) False and pred(hi) True.

    ``pred`` maps an array of lambdas to booleans; each round evaluates
    ``splits - 1`` interior points at once and keeps the first False/True switch.
    """
    while hi - lo > tol:
        pts = np.linspace(lo, hi, splits + 1)[1:-1]
        flags = np.asarray(pred(pts), dtype=bool)
        i = int(np.argmax(flags)) if flags.any() else len(pts)
        lo, hi = (pts[i - 1] if i > 0 else lo), (pts[i] if i < len(pts) else hi)
    return float(lo), float(hi)


def profile(op: Operator, lambda_min: float = -4.0, lambda_max: float = 6.0, points: int = 81,
            samples: int = 4096, polish_iters: int = 50) -> CoercivityProfile:
    """Sample m, mu on a uniform lambda grid, then locate lambda1, lambda0 and lambda-bar."""
    if not lambda_min < 1 < lambda_max:
        raise ValueError("the lambda grid must straddle 1")
    if points < 16:
        raise ValueError("need at least 16 grid points")
    grid = np.linspace(lambda_min, lambda_max, points)
    ext = extrema_batch(op, grid, samples, polish_iters)
    m = np.array([e.m for e in ext])
    mu = np.array([e.mu for e in ext])

    def mu_at(l):
        return sphere_extrema(op, l, samples, polish_iters).mu

    def m_many(ls):
        return [e.m for e in extrema_batch(op, ls, samples, polish_iters)]

    def mu_many(ls):
        return [e.mu for e in extrema_batch(op, ls, samples, polish_iters)]

    # lambda1: end of the initial run with m > 0
    lambda1 = None
    pos = np.array([_pos(v) for v in m])
    if pos[0]:
        idx = np.argmin(pos) if not pos.all() else len(grid)
        if idx < len(grid):
            lambda1 = _bisect(lambda ls: [not _pos(v) for v in m_many(ls)], grid[idx - 1], grid[idx])[0]
        else:
            lambda1 = float(grid[-1])

    # lambda0: start of the final run with mu < 0
    neg = np.array([_neg(v) for v in mu])
    status = "ok"
    lambda0 = None
    if neg[-1]:
        j = len(grid) - 1
        while j > 0 and neg[j - 1]:
            j -= 1
        lambda0 = float(grid[0]) if j == 0 else _bisect(lambda ls: [_neg(v) for v in mu_many(ls)],
                                                          grid[j - 1], grid[j])[1]
    else:
        status = "inconclusive" if neg.any() else "ok"

    case_tag = "Fails"
    lambda_bar = None
    scan = [1.0 + i * CASE_I_STEP for i in range(1, int(round(1.0 / CASE_I_STEP)))]
    # sampled mu never exceeds the true mu, so polishing is only needed
    # to confirm a negative reading
    rough = extrema_batch(op, scan, samples, 0)
    for l, ex in zip(scan, rough):
        if _neg(ex.mu) and _neg(mu_at(l)):
            case_tag, lambda_bar = "CaseI", l
            break
    if case_tag == "Fails" and lambda0 is not None:
        case_tag, lambda_bar = "CaseII", max(2.0, lambda0)

    return CoercivityProfile(
        operator_name=op.name, lambda_grid=grid, m_values=m, mu_values=mu,
        lambda1=None if lambda1 is None else float(lambda1),
        lambda0=lambda0, lambda_bar=lambda_bar, case_tag=case_tag,
        sphere_samples=samples, status=status, branches=ext,
    )


# ---------------------------------------------------------------------------
# closed forms


@dataclass
class CrosscheckReport:
    operator: str
    checked: int = 0
    max_error: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def _pucci_expected(op: Operator, lam: float) -> tuple[float, float]:
    """Closed-form m, mu for the Pucci pair at lam."""
    theta, vartheta, _ = op.params
    n = op.dim
    wpos, wneg = (vartheta, theta) if op.family == "pucci_plus" else (theta, vartheta)

    def f(wp, wn):
        return wp * (n - lam) if lam <= 1 else wp * (n - 1) + wn * (1 - lam)

    here = f(wpos, wneg)
    # H(e, lam e e^T - I) = -(dual Pucci)(e, I - lam e e^T)
    other = -f(wneg, wpos)
    return min(here, -other), max(here, -other)


def _sandwich_pseudo(op: Operator, lam: float) -> tuple[float, float]:
    p, _ = op.params
    n = op.dim
    if lam <= 1:
        lo = (1 - lam) * n ** (-abs(2 - p) / 2)
    else:
        lo = (1 - lam) * n
    ind = 1.0 if lam <= n else n ** (-p / 2)
    return lo, ind * (n - lam)


def _sandwich_weighted(op: Operator, lam: float) -> tuple[float, float]:
    (q,) = op.params
    n = op.dim
    lo = (1 - lam) * n ** (-q) if lam <= 1 else 1 - lam
    c = n ** (q / 2)
    ind = 1.0 if lam <= c else n ** (-q / 2)
    return lo, ind * (1 - lam / c)


def crosscheck_closed_form(prof: CoercivityProfile, op: Operator, tol: float = 1e-6) -> CrosscheckReport:
    """Compare numeric m, mu with the exact forms or the two-sided bounds for ``op``."""
    rep = CrosscheckReport(op.name)
    fam = op.family
    if fam not in ("inf_laplacian", "p_laplacian_variant", "pucci_plus", "pucci_minus",
                   "pseudo_p", "weighted_inf"):
        raise ValueError(f"no closed form known for {op.name}")
    for lam, m, mu in zip(prof.lambda_grid, prof.m_values, prof.mu_values):
        lam = float(lam)
        if fam in ("inf_laplacian", "p_laplacian_variant"):
            want = op.lambda_profile(lam, None)
            errs = [(m, want, "eq"), (mu, want, "eq")]
        elif fam in ("pucci_plus", "pucci_minus"):
            wm, wmu = _pucci_expected(op, lam)
            errs = [(m, wm, "eq"), (mu, wmu, "eq")]
        else:
            if lam < 0:
                errs = [(m, 0.0, "ge")]
            else:
                lo, hi = (_sandwich_pseudo if fam == "pseudo_p" else _sandwich_weighted)(op, lam)
                errs = [(m, lo, "ge"), (mu, hi, "le")]
        for got, want, kind in errs:
            rep.checked += 1
            if kind == "eq":
                err = abs(got - want)
            elif kind == "ge":
                err = max(0.0, want - got)
            else:
                err = max(0.0, got - want)
            rep.max_error = max(rep.max_error, err)
            if err > tol * max(1.0, abs(want)):
                rep.violations.append({"lambda": lam, "value": float(got), "bound": float(want), "kind": kind})
    return rep
