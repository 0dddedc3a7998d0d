"""Coherence classes of two-body matrix elements and masks that remove them.

An element rho_{ab;cd} = <a,c|rho|b,d> (particle-1 indices a,b; particle-2
indices c,d) with a + c = b + d and m = b - a != 0 is a coherence:

* same-level   |m| = 1 and (c, d) = (b, a)      e.g. rho_{a,a+1;a+1,a}
* cross        |m| = 1 otherwise                e.g. rho_{a,a+1;b+1,b}, a != b
* higher-order |m| >= 2                         rho_{a,a+m;b,b-m}

Hermitian partners (m -> -m) land in the same class. Elements with
a + c != b + d are grouped as "other" and never evolve away from zero.
"""
from __future__ import annotations

import enum
from functools import lru_cache

import numpy as np

from .angular import half, projections

__all__ = [
    "CoherenceClass",
    "PRESETS",
    "classify",
    "class_table",
    "keep_mask",
    "preset_mask",
    "apply_mask",
]


class CoherenceClass(enum.Enum):
    DIAGONAL = "diagonal"
    SAME_LEVEL = "same-level"
    CROSS = "cross"
    HIGHER_ORDER = "higher-order"
    OTHER = "other"


_ALL = frozenset(CoherenceClass)
PRESETS = {
    "full": _ALL,
    "no-offdiag": frozenset({CoherenceClass.DIAGONAL}),
    "same-level": frozenset({CoherenceClass.DIAGONAL, CoherenceClass.SAME_LEVEL}),
    "same+cross": frozenset(
        {CoherenceClass.DIAGONAL, CoherenceClass.SAME_LEVEL, CoherenceClass.CROSS}
    ),
    "same+cross+higher": frozenset(
        {
            CoherenceClass.DIAGONAL,
            CoherenceClass.SAME_LEVEL,
            CoherenceClass.CROSS,
            CoherenceClass.HIGHER_ORDER,
        }
    ),
}


def _classify_twice(a: int, b: int, c: int, d: int) -> CoherenceClass:
    if a == b and c == d:
        return CoherenceClass.DIAGONAL
    if a + c != b + d:
        return CoherenceClass.OTHER
    m = (b - a) // 2
    if abs(m) == 1:
        if c == b and d == a:
            return CoherenceClass.SAME_LEVEL
        return CoherenceClass.CROSS
    return CoherenceClass.HIGHER_ORDER


def classify(a, b, c, d, j) -> CoherenceClass:
    """Class of rho_{ab;cd} for spin j; projections must lie in [-j, j]."""
    j = half(j)
    vals = [half(x) for x in (a, b, c, d)]
    for v in vals:
        if abs(v.twice) > j.twice or (j.twice - v.twice) % 2:
            raise ValueError(f"projection {v} not allowed for j = {j}")
    return _classify_twice(*(v.twice for v in vals))


@lru_cache(maxsize=None)
def class_table(j) -> np.ndarray:
    """Object array of classes over the (2j+1)^2 x (2j+1)^2 product-basis matrix.

    Row index is (a, c), column index (b, d), both in descending order.
    """
    j = half(j)
    ms = [m.twice for m in projections(j)]
    d = len(ms)
    table = np.empty((d, d, d, d), dtype=object)
    for ia, a in enumerate(ms):
        for ic, c in enumerate(ms):
            for ib, b in enumerate(ms):
                for id_, dd in enumerate(ms):
                    table[ia, ic, ib, id_] = _classify_twice(a, b, c, dd)
    return table.reshape(d * d, d * d)


def keep_mask(j, keep) -> np.ndarray:
    keep = frozenset(keep)
    if CoherenceClass.DIAGONAL not in keep:
        raise ValueError("masks must keep the diagonal")
    table = class_table(half(j))
    return np.vectorize(lambda k: k in keep, otypes=[bool])(table)


def preset_mask(j, preset: str) -> np.ndarray | None:
    """Boolean keep-mask for a named preset; None for the unmasked "full" run."""
    if preset not in PRESETS:
        raise ValueError(f"unknown ablation preset {preset!r}; choose from {sorted(PRESETS)}")
    if preset == "full":
        return None
    return keep_mask(j, PRESETS[preset])


def apply_mask(rho: np.ndarray, keep, j=None) -> np.ndarray:
    """Zero every element whose class is not kept.

    ``keep`` is either a set of classes (``j`` required) or a precomputed
    boolean mask. Hermiticity is preserved because classes are closed under
    conjugation; the diagonal is never touched.
    """
    if isinstance(keep, np.ndarray) and keep.dtype == bool:
        mask = keep
    else:
        if j is None:
            d = int(round(np.sqrt(rho.shape[0])))
            j = half(f"{d - 1}/2")
        mask = keep_mask(j, keep)
    out = np.where(mask, rho, 0.0)
    tr = np.trace(out).real
    if abs(tr - 1.0) > 1e-12 and abs(np.trace(rho).real - 1.0) <= 1e-12:
        out = out / tr
    return out
