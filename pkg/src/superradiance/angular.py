"""Half-integer arithmetic, Clebsch-Gordan coefficients and spin-j lowering operators.

Projection bases are always ordered by descending m (m = j first), so the fully
excited level sits at index 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "HalfInt",
    "half",
    "projections",
    "cg",
    "dipole_lowering",
    "spin_lowering",
    "spin_z",
]


@dataclass(frozen=True, order=True)
class HalfInt:
    """Exact integer or half-integer, stored as twice its value."""

    twice: int

    @classmethod
    def of(cls, value) -> "HalfInt":
        if isinstance(value, HalfInt):
            return value
        if isinstance(value, str):
            value = Fraction(value)
        doubled = Fraction(value) * 2
        if doubled.denominator != 1:
            raise ValueError(f"{value!r} is not an integer or half-integer")
        return cls(int(doubled))

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice, 2)

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def __float__(self) -> float:
        return self.twice / 2

    def __int__(self) -> int:
        if self.twice % 2:
            raise ValueError(f"{self} is not an integer")
        return self.twice // 2

    def __add__(self, other):
        return HalfInt(self.twice + half(other).twice)

    __radd__ = __add__

    def __sub__(self, other):
        return HalfInt(self.twice - half(other).twice)

    def __rsub__(self, other):
        return HalfInt(half(other).twice - self.twice)

    def __neg__(self):
        return HalfInt(-self.twice)

    def __mul__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        return HalfInt(self.twice * n)

    __rmul__ = __mul__

    def __abs__(self):
        return HalfInt(abs(self.twice))

    def __str__(self) -> str:
        return str(self.twice // 2) if self.twice % 2 == 0 else f"{self.twice}/2"

    def __repr__(self) -> str:
        return f"HalfInt({self})"


def half(value) -> HalfInt:
    return HalfInt.of(value)


def projections(j) -> list[HalfInt]:
    """Projections m = j, j-1, ..., -j (descending)."""
    j = half(j)
    if j.twice < 0:
        raise ValueError("spin must be non-negative")
    return [HalfInt(j.twice - 2 * k) for k in range(j.twice + 1)]


@lru_cache(maxsize=None)
def _log_factorial(n: int) -> float:
    return math.lgamma(n + 1)


@lru_cache(maxsize=100_000)
def _cg_twice(j1: int, m1: int, j2: int, m2: int, J: int, M: int) -> float:
    # all arguments are doubled
    if M != m1 + m2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(M) > J:
        return 0.0
    if (j1 + m1) % 2 or (j2 + m2) % 2 or (J + M) % 2:
        return 0.0
    if J < abs(j1 - j2) or J > j1 + j2 or (j1 + j2 + J) % 2:
        return 0.0

    a = (j1 + j2 - J) // 2
    b = (j1 - j2 + J) // 2
    c = (-j1 + j2 + J) // 2
    d = (j1 + j2 + J) // 2 + 1
    lf = _log_factorial
    log_pref = 0.5 * (
        math.log(J + 1)
        + lf(a) + lf(b) + lf(c) - lf(d)
        + lf((j1 + m1) // 2) + lf((j1 - m1) // 2)
        + lf((j2 + m2) // 2) + lf((j2 - m2) // 2)
        + lf((J + M) // 2) + lf((J - M) // 2)
    )
    k_min = max(0, (j2 - J - m1) // 2, (j1 - J + m2) // 2)
    k_max = min(a, (j1 - m1) // 2, (j2 + m2) // 2)

    logs = []
    signs = []
    for k in range(k_min, k_max + 1):
        logs.append(
            -(lf(k) + lf(a - k) + lf((j1 - m1) // 2 - k) + lf((j2 + m2) // 2 - k)
              + lf((J - j2 + m1) // 2 + k) + lf((J - j1 - m2) // 2 + k))
        )
        signs.append(-1.0 if k % 2 else 1.0)
    if not logs:
        return 0.0
    logs = np.asarray(logs)
    top = logs.max()
    total = float(np.dot(signs, np.exp(logs - top)))
    return total * math.exp(log_pref + top)


def cg(j1, m1, j2, m2, J, M) -> float:
    """Condon-Shortley Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M>.

    Uses the Racah sum with log-factorials; selection-rule violations give 0.
    """
    args = [half(x).twice for x in (j1, m1, j2, m2, J, M)]
    return _cg_twice(*args)


def dipole_lowering(j) -> np.ndarray:
    """sigma^- = sum_m |m><m+1| with unit entries."""
    j = half(j)
    if j.twice < 1:
        raise ValueError("dipole operator needs j >= 1/2")
    dim = j.twice + 1
    return np.eye(dim, k=-1)


def spin_lowering(j) -> np.ndarray:
    """Angular-momentum lowering operator J^- in the descending basis."""
    j = half(j)
    if j.twice < 1:
        raise ValueError("ladder operator needs j >= 1/2")
    jv = float(j)
    ms = np.array([float(m) for m in projections(j)])
    # entry (m-1, m) = sqrt(j(j+1) - m(m-1)), m from j down to -j+1
    vals = np.sqrt(jv * (jv + 1) - ms[:-1] * (ms[:-1] - 1))
    return np.diag(vals, k=-1)


def spin_z(j) -> np.ndarray:
    return np.diag([float(m) for m in projections(j)])
