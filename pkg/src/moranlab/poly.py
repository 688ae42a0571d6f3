"""Polynomials and the Wright-Fisher generator L f = x(1-x) f''/2.

L never raises degree, so on polynomials of degree <= d the semigroup
e^{tL} is the exponential of a (d+1)x(d+1) upper-bidiagonal matrix acting
on the monomial coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import expm

MAX_DEGREE = 32
DEFAULT_GRID = 10_001


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial; ``coeffs[m]`` multiplies x**m."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.array(self.coeffs, dtype=float))
        if c.ndim != 1:
            raise ValueError("coefficients must form a vector")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c = npoly.polytrim(c) if c.size else np.zeros(1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def monomial(cls, m: int) -> "Polynomial":
        c = np.zeros(m + 1)
        c[m] = 1.0
        return cls(c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0.0

    def __call__(self, x):
        return npoly.polyval(x, self.coeffs)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(npoly.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(npoly.polysub(self.coeffs, other.coeffs))

    def __mul__(self, scalar: float) -> "Polynomial":
        return Polynomial(self.coeffs * scalar)

    __rmul__ = __mul__

    def padded(self, degree: int) -> np.ndarray:
        out = np.zeros(degree + 1)
        out[: len(self.coeffs)] = self.coeffs
        return out


def poly_derivative(p: Polynomial, order: int = 1) -> Polynomial:
    if order < 1:
        raise ValueError(f"derivative order must be positive, got {order}")
    return Polynomial(npoly.polyder(p.coeffs, order))


def apply_generator(p: Polynomial) -> Polynomial:
    """Exact L p = x(1-x) p''/2."""
    second = poly_derivative(p, 2)
    return Polynomial(npoly.polymul([0.0, 0.5, -0.5], second.coeffs))


def generator_matrix(d: int) -> np.ndarray:
    """Matrix of L on monomials 1, x, ..., x^d (columns are images of x^m)."""
    G = np.zeros((d + 1, d + 1))
    for m in range(2, d + 1):
        c = m * (m - 1) / 2.0
        G[m - 1, m] = c
        G[m, m] = -c
    return G


def semigroup_exact(p: Polynomial, t: float) -> Polynomial:
    """e^{tL} p, via the coefficient-space matrix exponential."""
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"time must be finite and nonnegative, got {t}")
    d = p.degree
    if d > MAX_DEGREE:
        raise ValueError(f"degree {d} exceeds the supported maximum {MAX_DEGREE}")
    if t == 0 or d < 2:
        return p
    return Polynomial(expm(t * generator_matrix(d)) @ p.coeffs)


def eigenpolynomial(m: int) -> Polynomial:
    """Monic degree-m eigenfunction of L, eigenvalue -m(m-1)/2.

    Found by back-substitution on the bidiagonal generator matrix.
    """
    G = generator_matrix(m)
    lam = G[m, m]
    v = np.zeros(m + 1)
    v[m] = 1.0
    for j in range(m - 1, -1, -1):
        denom = lam - G[j, j]
        v[j] = G[j, j + 1] * v[j + 1] / denom if denom != 0 else 0.0
    return Polynomial(v)


def sup_norm(p: Polynomial, grid_size: int = DEFAULT_GRID) -> float:
    """max |p| on [0, 1] from a uniform grid plus one Newton refinement.

    The result is a lower bound on the true sup norm, accurate to the
    grid resolution.
    """
    if grid_size < 2:
        raise ValueError(f"grid needs at least 2 points, got {grid_size}")
    x = np.linspace(0.0, 1.0, grid_size)
    vals = np.abs(p(x))
    j = int(np.argmax(vals))
    best = float(vals[j])
    if p.degree >= 2:
        d1, d2 = poly_derivative(p, 1), poly_derivative(p, 2)
        curv = d2(x[j])
        if curv != 0.0:
            xr = min(1.0, max(0.0, x[j] - d1(x[j]) / curv))
            best = max(best, float(abs(p(xr))))
    return best
