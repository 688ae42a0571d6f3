"""Moran and Bernstein operators on the lattice {k/n : k = 0..n}.

The lattice matrix is the object every iterate is computed from; the
clamped off-lattice formula is only available as a single application.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

ROW_SUM_TOL = 1e-12


class KernelVariant(enum.Enum):
    """Which up/down weight the Moran kernel uses.

    PAPER carries the factor 2 (weight 2i(n-i)/(n(n-1))), which makes the
    diagonal negative near i = n/2.  STANDARD halves it and is a genuine
    stochastic matrix.
    """

    PAPER = "paper"
    STANDARD = "standard"

    @classmethod
    def parse(cls, value: "str | KernelVariant") -> "KernelVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown kernel variant {value!r}; expected 'paper' or 'standard'") from None

    @property
    def weight_factor(self) -> float:
        return 2.0 if self is KernelVariant.PAPER else 1.0

    def time_scale(self, n: int) -> float:
        """Number of chain steps per unit of diffusion time."""
        return n * (n - 1) / (4.0 if self is KernelVariant.PAPER else 2.0)


def step_count(n: int, variant: KernelVariant, t: float) -> tuple[int, float]:
    """floor(scale * t) and the fractional remainder, for scale = time_scale(n).

    t is read through its shortest decimal repr so that e.g. t = 0.1 means
    1/10 exactly; a product within 1e-12 of an integer snaps to it.
    """
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"time must be finite and nonnegative, got {t}")
    denom = 4 if KernelVariant.parse(variant) is KernelVariant.PAPER else 2
    prod = Fraction(n * (n - 1), denom) * Fraction(repr(float(t)))
    k = math.floor(prod)
    frac = prod - k
    if frac > 1 - Fraction(1, 10**12):
        return k + 1, 0.0
    if frac < Fraction(1, 10**12):
        return k, 0.0
    return k, float(frac)


def jump_weights(n: int, variant: KernelVariant, x) -> np.ndarray:
    """Probability of each of the two ±1/n jumps from position x."""
    x = np.asarray(x, dtype=float)
    return variant.weight_factor * n * n * x * (1.0 - x) / (n * (n - 1))


@dataclass(frozen=True)
class LatticeFunction:
    n: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if self.n < 1:
            raise ValueError(f"lattice resolution must be positive, got {self.n}")
        if values.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} values for n={self.n}, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("lattice function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, f: Callable, n: int) -> "LatticeFunction":
        x = lattice_points(n)
        return cls(n, np.broadcast_to(np.asarray(f(x), dtype=float), x.shape))

    @property
    def points(self) -> np.ndarray:
        return lattice_points(self.n)


def lattice_points(n: int) -> np.ndarray:
    return np.arange(n + 1) / n


@dataclass(frozen=True)
class TransitionMatrix:
    n: int
    variant: KernelVariant
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def min_entry(self) -> float:
        """Most negative entry; < 0 flags a signed (non-positive) kernel."""
        return float(self.entries.min())

    @property
    def is_stochastic(self) -> bool:
        return self.min_entry >= 0.0

    @property
    def time_scale(self) -> float:
        return self.variant.time_scale(self.n)

    def negative_states(self) -> np.ndarray:
        return np.flatnonzero(np.diag(self.entries) < 0)


def build_transition_matrix(n: int, variant: "KernelVariant | str" = KernelVariant.PAPER) -> TransitionMatrix:
    """One-step kernel of the Moran chain on {0, ..., n}.

    Rows 0 and n are absorbing; interior rows move to i±1 with equal weight.
    """
    variant = KernelVariant.parse(variant)
    if int(n) != n or n < 2:
        raise ValueError(f"Moran kernel needs an integer n >= 2, got {n}")
    n = int(n)
    i = np.arange(n + 1)
    # integer numerators keep the weights exact for moderate n
    w = variant.weight_factor * (i * (n - i)) / (n * (n - 1))
    P = np.zeros((n + 1, n + 1))
    P[i[1:], i[1:] - 1] = w[1:]
    P[i[:-1], i[:-1] + 1] = w[:-1]
    P[i, i] = 1.0 - 2.0 * w
    return TransitionMatrix(n, variant, P)


def _check_dims(P: TransitionMatrix, f: LatticeFunction):
    if P.n != f.n:
        raise ValueError(f"dimension mismatch: kernel has n={P.n}, function has n={f.n}")


def apply_operator(P: TransitionMatrix, f: LatticeFunction) -> LatticeFunction:
    _check_dims(P, f)
    return LatticeFunction(f.n, P.entries @ f.values)


def defect(P: TransitionMatrix, f: LatticeFunction) -> np.ndarray:
    """(P - I) f, summed over differences f[j] - f[i] to limit cancellation."""
    _check_dims(P, f)
    v = f.values
    out = np.zeros_like(v)
    up = np.diag(P.entries, 1)
    down = np.diag(P.entries, -1)
    out[:-1] += up * (v[1:] - v[:-1])
    out[1:] += down * (v[:-1] - v[1:])
    return out


def matrix_power(P: TransitionMatrix, k: int) -> np.ndarray:
    """P^k by repeated squaring."""
    if k < 0:
        raise ValueError(f"iterate count must be nonnegative, got {k}")
    return np.linalg.matrix_power(P.entries, int(k))


def iterate_operator(P: TransitionMatrix, f: LatticeFunction, k: int, method: str = "squaring") -> LatticeFunction:
    """P^k f.  ``method="repeated"`` applies P k times and is the slow cross-check."""
    _check_dims(P, f)
    if k < 0:
        raise ValueError(f"iterate count must be nonnegative, got {k}")
    if k == 0:
        return f
    if method == "squaring":
        return LatticeFunction(f.n, matrix_power(P, k) @ f.values)
    if method == "repeated":
        v = f.values.copy()
        for _ in range(k):
            v = P.entries @ v
        return LatticeFunction(f.n, v)
    raise ValueError(f"unknown iteration method {method!r}")


def power_checkpoints(M: np.ndarray, k_max: int):
    """Yield (k, M^k) for k = 1, 2, 4, ... up to k_max, ending exactly at k_max."""
    k, Mk = 1, M.copy()
    while k <= k_max:
        yield k, Mk
        if 2 * k > k_max:
            break
        k, Mk = 2 * k, Mk @ Mk
    if k < k_max:
        yield k_max, Mk @ np.linalg.matrix_power(M, k_max - k)


def evaluate_offlattice(n: int, variant: "KernelVariant | str", f: Callable, x) -> np.ndarray | float:
    """Clamped three-point Moran operator at arbitrary x in [0, 1].

    On [1/n, (n-1)/n] this is the three-point formula with exact f values;
    on [0, 1/n) and ((n-1)/n, 1] the value at the nearest endpoint of that
    interval is used.  Vectorised over x.
    """
    variant = KernelVariant.parse(variant)
    if n < 2:
        raise ValueError(f"Moran operator needs n >= 2, got {n}")
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)) or np.any((xa < 0.0) | (xa > 1.0)):
        raise ValueError("x must lie in [0, 1]")
    lo, hi = 1.0 / n, (n - 1) / n
    y = np.where(xa < lo, lo, np.where(xa > hi, hi, xa))
    w = jump_weights(n, variant, y)
    h = 1.0 / n
    left = np.clip(y - h, 0.0, 1.0)
    right = np.clip(y + h, 0.0, 1.0)
    fy = np.asarray(f(y), dtype=float)
    out = w * (np.asarray(f(left), dtype=float) + np.asarray(f(right), dtype=float)) + (1.0 - 2.0 * w) * fy
    return float(out) if np.ndim(x) == 0 else out


def bernstein_weights(n: int, x) -> np.ndarray:
    """Binomial weights C(n,k) x^k (1-x)^(n-k); shape (len(x), n+1)."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))[:, None]
    k = np.arange(n + 1)[None, :]
    # log space; xlogy/xlog1py give 0 * log 0 = 0 at the endpoints
    log_c = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return np.exp(log_c + xlogy(k, xa) + xlog1py(n - k, -xa))


def bernstein_apply(f: Callable, n: int, x) -> np.ndarray | float:
    if n < 1:
        raise ValueError(f"Bernstein operator needs n >= 1, got {n}")
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)) or np.any((xa < 0.0) | (xa > 1.0)):
        raise ValueError("x must lie in [0, 1]")
    fk = np.asarray(f(lattice_points(n)), dtype=float)
    out = bernstein_weights(n, xa) @ np.broadcast_to(fk, (n + 1,))
    return float(out[0]) if np.ndim(x) == 0 else out


def bernstein_matrix(n: int) -> np.ndarray:
    """B_n restricted to the lattice: row i holds the weights at x = i/n."""
    return bernstein_weights(n, lattice_points(n))


def bernstein_iterate(f: LatticeFunction, k: int) -> LatticeFunction:
    if k < 0:
        raise ValueError(f"iterate count must be nonnegative, got {k}")
    if k == 0:
        return f
    return LatticeFunction(f.n, np.linalg.matrix_power(bernstein_matrix(f.n), k) @ f.values)


@dataclass(frozen=True)
class OperatorMoments:
    """Central moments of one chain step, indexed by lattice state."""

    n: int
    mean_shift: np.ndarray
    second_central: np.ndarray
    abs_third_central: np.ndarray
    fourth_central: np.ndarray


def operator_moments(P: TransitionMatrix) -> OperatorMoments:
    n = P.n
    jump = (np.arange(n + 1)[None, :] - np.arange(n + 1)[:, None]) / n
    E = P.entries
    return OperatorMoments(
        n=n,
        mean_shift=(E * jump).sum(axis=1),
        second_central=(E * jump**2).sum(axis=1),
        abs_third_central=(E * np.abs(jump) ** 3).sum(axis=1),
        fourth_central=(E * jump**4).sum(axis=1),
    )
