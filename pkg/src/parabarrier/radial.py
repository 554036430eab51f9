"""Radial profiles v(|x - z|) and the reduction of H along them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .coercivity import CoercivityProfile, sphere_extrema
from .operators import Operator

R_MIN = 1e-10


class RadialError(ValueError):
    pass


@dataclass(frozen=True)
class RadialProfile:
    """v(r) = a + b r**beta around ``center``."""

    a: float
    b: float
    beta: float
    center: tuple

    def __post_init__(self):
        if self.beta == 0:
            raise RadialError("beta must be nonzero")
        if self.b == 0:
            raise RadialError("b must be nonzero")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def value(self, r):
        return self.a + self.b * np.power(r, self.beta)

    def d1(self, r):
        return self.b * self.beta * np.power(r, self.beta - 1)

    def d2(self, r):
        return self.b * self.beta * (self.beta - 1) * np.power(r, self.beta - 2)

    def inverse(self, v):
        """Radius where the profile takes the value ``v``."""
        return np.power((np.asarray(v, dtype=float) - self.a) / self.b, 1.0 / self.beta)


@dataclass(frozen=True)
class GeneralRadial:
    """Any C^2 radial profile given by its value and first two derivatives."""

    value: Callable
    d1: Callable
    d2: Callable
    center: tuple


def radial_gradient_hessian(profile, x, kappa: float = 0.0):
    """Gradient and Hessian of v(|x - z|).

    With ``kappa`` nonzero the Hessian gains kappa * Dv (x) Dv, the augmented
    form used by the transformed equation.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(profile.center, dtype=float)
    d = x - z
    r = np.sqrt((d * d).sum(axis=-1))
    if np.any(r < R_MIN):
        raise RadialError(f"point within {R_MIN} of the profile center")
    e = d / r[..., None]
    v1 = profile.d1(r)
    v2 = profile.d2(r)
    n = x.shape[-1]
    p = v1[..., None] * e
    ee = e[..., :, None] * e[..., None, :]
    X = (v1 / r)[..., None, None] * np.eye(n) + (v2 + kappa * v1 * v1 - v1 / r)[..., None, None] * ee
    return p, X


def _unit(op: Operator, e):
    if e is None:
        e = np.zeros(op.dim)
        e[0] = 1.0
    e = np.asarray(e, dtype=float)
    return e / np.linalg.norm(e, axis=-1, keepdims=True)


def reduce(op: Operator, profile: RadialProfile, r, e=None):
    """H along v = a + b r^beta written through the one-dimensional pencil.

    Returns |b beta|^k r^(beta k - gamma) H(e, +/-(I - (2 - beta) e e^T)),
    the sign being that of b beta, for the direction ``e``.
    """
    bb = profile.b * profile.beta
    if bb == 0:
        raise RadialError("degenerate profile: b * beta = 0")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise RadialError("r must be positive")
    e = _unit(op, e)
    lam = 2.0 - profile.beta
    eye = np.eye(op.dim)
    pencil = eye - lam * e[..., :, None] * e[..., None, :]
    sign = 1.0 if bb > 0 else -1.0
    h = op(np.broadcast_to(e, np.shape(pencil)[:-1]), sign * pencil)
    return abs(bb) ** op.k * np.power(r, profile.beta * op.k - op.gamma) * h


@lru_cache(maxsize=4096)
def _m_mu(op: Operator, lam: float, samples: int) -> tuple[float, float]:
    ex = sphere_extrema(op, lam, samples)
    return ex.m, ex.mu


def m_mu_at(op: Operator, lam: float, samples: int = 4096) -> tuple[float, float]:
    """m(lam), mu(lam) from a direct sphere search (cached)."""
    return _m_mu(op, float(lam), int(samples))


def bounds(op: Operator, coer: CoercivityProfile, b: float, beta: float, r):
    """Two-sided bound on H(Dv, D^2 v) for v = a + b r^beta using m, mu at 2 - beta."""
    bb = b * beta
    if bb == 0:
        raise RadialError("degenerate profile: b * beta = 0")
    lam = 2.0 - beta
    grid = coer.lambda_grid
    if not grid[0] <= lam <= grid[-1]:
        raise RadialError(f"lambda = {lam} lies outside the profile grid [{grid[0]}, {grid[-1]}]")
    hit = np.flatnonzero(np.abs(grid - lam) <= 1e-12 * max(1.0, abs(lam)))
    if hit.size and coer.operator_name == op.name:
        m, mu = float(coer.m_values[hit[0]]), float(coer.mu_values[hit[0]])
    else:
        m, mu = m_mu_at(op, lam, coer.sphere_samples)
    scale = abs(bb) ** op.k * np.power(np.asarray(r, dtype=float), beta * op.k - op.gamma)
    if bb > 0:
        return scale * m, scale * mu
    return -scale * mu, -scale * m
