"""Degenerate elliptic operators H(p, X) with homogeneity metadata.

Every operator evaluates on batches: ``p`` has shape ``(..., n)`` and ``X`` has
shape ``(..., n, n)``; the result has the broadcast leading shape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

GRAD_EPS = 1e-14
SYM_TOL = 1e-9


class OperatorError(ValueError):
    """Bad operator parameters or malformed evaluation input."""


@dataclass(frozen=True)
class HomogeneityExponents:
    k: float
    gamma: float

    @classmethod
    def from_degrees(cls, k1: float, k2: float) -> "HomogeneityExponents":
        return cls(k=k1 + k2, gamma=k1 + 2 * k2)


@dataclass(frozen=True)
class Operator:
    name: str
    k1: float
    k2: int
    dim: int
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    lambda_profile: Optional[Callable[[float, np.ndarray], float]] = field(default=None, repr=False)
    family: str = "custom"
    params: tuple = ()

    def __post_init__(self):
        if self.dim < 1:
            raise OperatorError("dimension must be positive")
        if self.k1 < 0:
            raise OperatorError("gradient degree k1 must be nonnegative")
        if self.k2 < 1 or int(self.k2) != self.k2 or self.k2 % 2 == 0:
            raise OperatorError("Hessian degree k2 must be a positive odd integer")

    @property
    def exponents(self) -> HomogeneityExponents:
        return HomogeneityExponents.from_degrees(self.k1, self.k2)

    @property
    def k(self) -> float:
        return self.k1 + self.k2

    @property
    def gamma(self) -> float:
        return self.k1 + 2 * self.k2

    @property
    def key(self) -> str:
        if not self.params:
            return self.family
        return f"{self.family}({','.join(_fmt(v) for v in self.params)})"

    def __call__(self, p, X) -> np.ndarray:
        return self.fn(np.asarray(p, dtype=float), np.asarray(X, dtype=float))


def _fmt(v: float) -> str:
    return repr(float(v)) if not float(v).is_integer() else str(int(v))


def evaluate(op: Operator, p, X) -> float | np.ndarray:
    """Validated evaluation of ``op`` at (p, X); accepts single points or batches."""
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    n = op.dim
    if p.shape[-1:] != (n,) or X.shape[-2:] != (n, n):
        raise OperatorError(f"expected p of length {n} and X of shape ({n},{n})")
    asym = np.abs(X - np.swapaxes(X, -1, -2)).max(initial=0.0)
    scale = max(1.0, float(np.abs(X).max(initial=0.0)))
    if asym > SYM_TOL * scale:
        raise OperatorError(f"X is not symmetric (asymmetry {asym:.3e})")
    out = op(p, X)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# symmetric eigenvalues


def jacobi_eigvalsh(A, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a stack of symmetric matrices by cyclic Jacobi rotations.

    Stops once the off-diagonal Frobenius norm is below ``tol`` times the
    matrix norm for every matrix in the batch. Eigenvalues come back sorted.
    """
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[-1]
    if n == 1:
        return A[..., 0, :].copy()
    if n == 2:
        # one rotation annihilates the off-diagonal entry exactly
        mid = 0.5 * (A[..., 0, 0] + A[..., 1, 1])
        rad = np.hypot(0.5 * (A[..., 0, 0] - A[..., 1, 1]), A[..., 0, 1])
        return np.stack([mid - rad, mid + rad], axis=-1)
    norm = np.sqrt((A * A).sum(axis=(-1, -2)))
    thresh = tol * np.maximum(norm, np.finfo(float).tiny)
    iu = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * (A[..., iu[0], iu[1]] ** 2).sum(axis=-1))
        if np.all(off <= thresh):
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                aij = A[..., i, j]
                theta = 0.5 * np.arctan2(2.0 * aij, A[..., j, j] - A[..., i, i])
                c = np.cos(theta)[..., None]
                s = np.sin(theta)[..., None]
                ci = A[..., :, i].copy()
                cj = A[..., :, j].copy()
                A[..., :, i] = c * ci - s * cj
                A[..., :, j] = s * ci + c * cj
                ri = A[..., i, :].copy()
                rj = A[..., j, :].copy()
                A[..., i, :] = c * ri - s * rj
                A[..., j, :] = s * ri + c * rj
    return np.sort(np.diagonal(A, axis1=-2, axis2=-1), axis=-1)


# ---------------------------------------------------------------------------
# zoo


def _norm(p):
    return np.sqrt((p * p).sum(axis=-1))


def _trace(X):
    return np.trace(X, axis1=-2, axis2=-1)


def _quad(p, X):
    return np.einsum("...i,...ij,...j->...", p, X, p)


def _pow(x, a):
    # 0**0 == 1 keeps |p|^0 well defined
    return np.power(x, a) if a != 0 else np.ones_like(x)


def inf_laplacian(dim: int = 2) -> Operator:
    """H = <X p, p>, degrees (2, 1)."""
    return Operator(
        name="inf_laplacian", k1=2, k2=1, dim=dim,
        fn=_quad,
        lambda_profile=lambda lam, e: 1.0 - lam,
        family="inf_laplacian",
    )


def p_laplacian_variant(q: float, a: float, dim: int = 2) -> Operator:
    """H = |p|^q tr X + a |p|^(q-2) <X p, p>; divergence form when a == q."""
    if q < 0:
        raise OperatorError("q must be nonnegative")
    if a <= -1:
        raise OperatorError("a must exceed -1")

    def fn(p, X):
        r = _norm(p)
        first = _pow(r, q) * _trace(X)
        if a == 0:
            return first
        safe = np.where(r > GRAD_EPS, r, 1.0)
        second = np.where(r > GRAD_EPS, a * safe ** (q - 2) * _quad(p, X), 0.0)
        return first + second

    return Operator(
        name=f"p_laplacian_variant(q={q},a={a})", k1=q, k2=1, dim=dim, fn=fn,
        lambda_profile=lambda lam, e: dim + a - lam * (1 + a),
        family="p_laplacian_variant", params=(q, a),
    )


def pseudo_p(p: float, q: float, dim: int = 2) -> Operator:
    """H = |P|^q sum_i |P_i|^p X_ii."""
    if p < 0 or q < 0:
        raise OperatorError("p and q must be nonnegative")

    def fn(P, X):
        w = _pow(np.abs(P), p)
        return _pow(_norm(P), q) * (w * np.diagonal(X, axis1=-2, axis2=-1)).sum(axis=-1)

    def prof(lam, e):
        ae = np.abs(np.asarray(e, dtype=float))
        return float(_pow(ae, p).sum() - lam * (ae ** (p + 2)).sum())

    return Operator(
        name=f"pseudo_p(p={p},q={q})", k1=p + q, k2=1, dim=dim, fn=fn,
        lambda_profile=prof, family="pseudo_p", params=(p, q),
    )


def weighted_inf(q: float, dim: int = 2) -> Operator:
    """H = sum_ij |p_i|^q |p_j|^q p_i p_j X_ij, degrees (2q + 2, 1)."""
    if q < 0:
        raise OperatorError("q must be nonnegative")

    def fn(p, X):
        w = _pow(np.abs(p), q) * p
        return _quad(w, X)

    def prof(lam, e):
        ae = np.abs(np.asarray(e, dtype=float))
        return float((ae ** (2 * q + 2)).sum() - lam * (ae ** (q + 2)).sum() ** 2)

    return Operator(
        name=f"weighted_inf(q={q})", k1=2 * q + 2, k2=1, dim=dim, fn=fn,
        lambda_profile=prof, family="weighted_inf", params=(q,),
    )


def _pucci(theta: float, vartheta: float, q: float, dim: int, plus: bool) -> Operator:
    if not (0 < theta <= vartheta):
        raise OperatorError("Pucci weights need 0 < theta <= vartheta")
    if q < 0:
        raise OperatorError("q must be nonnegative")
    wpos, wneg = (vartheta, theta) if plus else (theta, vartheta)

    def fn(p, X):
        ev = jacobi_eigvalsh(X)
        s = (wpos * np.clip(ev, 0, None) + wneg * np.clip(ev, None, 0)).sum(axis=-1)
        return _pow(_norm(p), q) * s

    def prof(lam, e):
        if lam <= 1:
            return wpos * (dim - lam)
        return wpos * (dim - 1) + wneg * (1 - lam)

    fam = "pucci_plus" if plus else "pucci_minus"
    return Operator(
        name=f"{fam}(theta={theta},vartheta={vartheta},q={q})", k1=q, k2=1, dim=dim,
        fn=fn, lambda_profile=prof, family=fam, params=(theta, vartheta, q),
    )


def pucci_plus(theta: float, vartheta: float, q: float = 0.0, dim: int = 2) -> Operator:
    return _pucci(theta, vartheta, q, dim, plus=True)


def pucci_minus(theta: float, vartheta: float, q: float = 0.0, dim: int = 2) -> Operator:
    return _pucci(theta, vartheta, q, dim, plus=False)


def dual(op: Operator) -> Operator:
    """The operator (p, X) -> -H(p, -X); it shares m and mu with ``op``."""
    return Operator(
        name=f"dual[{op.name}]", k1=op.k1, k2=op.k2, dim=op.dim,
        fn=lambda p, X: -op.fn(p, -X), family="dual", params=(),
    )


_BUILDERS = {
    "inf_laplacian": (inf_laplacian, 0),
    "p_laplacian_variant": (p_laplacian_variant, 2),
    "pseudo_p": (pseudo_p, 2),
    "weighted_inf": (weighted_inf, 1),
    "pucci_plus": (pucci_plus, 3),
    "pucci_minus": (pucci_minus, 3),
}

_KEY_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def from_key(key: str, dim: int = 2) -> Operator:
    """Build a zoo operator from a string such as ``pucci_minus(1,3,1)``."""
    m = _KEY_RE.match(key)
    if not m or m.group(1) not in _BUILDERS:
        raise OperatorError(f"unknown operator key {key!r}")
    builder, nargs = _BUILDERS[m.group(1)]
    raw = m.group(2)
    args = [] if raw is None or not raw.strip() else [float(t) for t in raw.split(",")]
    if len(args) != nargs:
        raise OperatorError(f"{m.group(1)} takes {nargs} parameters, got {len(args)}")
    return builder(*args, dim=dim)


def zoo(dim: int = 2) -> list[Operator]:
    """One representative of each built-in family."""
    return [
        p_laplacian_variant(1.0, 1.0, dim),
        pseudo_p(3.0, 1.0, dim),
        inf_laplacian(dim),
        weighted_inf(2.0, dim),
        pucci_plus(1.0, 2.0, 1.0, dim),
        pucci_minus(1.0, 3.0, 1.0, dim),
    ]


# ---------------------------------------------------------------------------
# condition checks


@dataclass
class ConditionReport:
    check: str
    operator: str
    samples: int
    max_error: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "check": self.check, "operator": self.operator, "samples": self.samples,
            "max_error": self.max_error, "violations": len(self.violations),
            "passed": self.passed,
        }


def random_symmetric(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    B = rng.uniform(-1.0, 1.0, size=(size, n, n))
    return 0.5 * (B + np.swapaxes(B, -1, -2))


def check_monotonicity(op: Operator, samples: int = 1000, rng_seed: int = 0,
                       tol: float = 1e-9) -> ConditionReport:
    """Sampled degenerate ellipticity: H(p, X + W) >= H(p, X) for W = V^T V."""
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(rng_seed)
    n = op.dim
    p = rng.normal(size=(samples, n))
    X = random_symmetric(rng, n, samples)
    V = rng.uniform(-1.0, 1.0, size=(samples, n, n))
    W = np.einsum("...ki,...kj->...ij", V, V)
    lo = op(p, X)
    hi = op(p, X + W)
    gap = lo - hi
    rep = ConditionReport("monotonicity", op.name, samples, float(max(gap.max(), 0.0)))
    for i in np.flatnonzero(gap > tol):
        rep.violations.append({"p": p[i].tolist(), "gap": float(gap[i])})
    return rep


def check_homogeneity(op: Operator, samples: int = 1000, rng_seed: int = 0,
                      rtol: float = 1e-9, atol: float = 1e-12) -> ConditionReport:
    """Sampled homogeneity in p (degree k1, any real factor) and in X (degree k2)."""
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(rng_seed)
    n = op.dim
    p = rng.normal(size=(samples, n))
    X = random_symmetric(rng, n, samples)
    th = rng.uniform(0.1, 4.0, size=samples) * rng.choice([-1.0, 1.0], size=samples)
    tx = rng.uniform(0.1, 4.0, size=samples)
    base = op(p, X)
    lhs_p = op(th[:, None] * p, X)
    rhs_p = np.abs(th) ** op.k1 * base
    lhs_x = op(p, tx[:, None, None] * X)
    rhs_x = tx ** op.k2 * base
    rep = ConditionReport("homogeneity", op.name, samples)
    for which, lhs, rhs in (("p", lhs_p, rhs_p), ("X", lhs_x, rhs_x)):
        err = np.abs(lhs - rhs)
        bound = rtol * np.maximum(np.abs(lhs), np.abs(rhs)) + atol
        rel = err / np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1e-300)
        rep.max_error = max(rep.max_error, float(np.where(err > atol, rel, 0.0).max()))
        for i in np.flatnonzero(err > bound):
            rep.violations.append({"scaling": which, "index": int(i), "error": float(err[i])})
    zero = op(p, np.zeros_like(X))
    for i in np.flatnonzero(zero != 0.0):
        rep.violations.append({"scaling": "zero-matrix", "index": int(i), "error": float(zero[i])})
    return rep


def check_profile(op: Operator, lambdas, directions, tol: float = 1e-9) -> ConditionReport:
    """Compare H(e, I - lam e e^T) with the operator's closed-form profile."""
    if op.lambda_profile is None:
        raise OperatorError(f"{op.name} has no closed-form profile")
    E = np.asarray(directions, dtype=float)
    E = E / np.linalg.norm(E, axis=-1, keepdims=True)
    rep = ConditionReport("profile", op.name, len(lambdas) * len(E))
    eye = np.eye(op.dim)
    for lam in lambdas:
        X = eye - lam * np.einsum("ki,kj->kij", E, E)
        got = op(E, X)
        want = np.array([op.lambda_profile(lam, e) for e in E])
        err = np.abs(got - want)
        rep.max_error = max(rep.max_error, float(err.max()))
        for i in np.flatnonzero(err > tol * np.maximum(1.0, np.abs(want))):
            rep.violations.append({"lambda": float(lam), "e": E[i].tolist(), "error": float(err[i])})
    return rep
