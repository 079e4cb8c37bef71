"""Multi-index combinatorics for jet coordinates.

A multi-index ``I = (i_1, ..., i_n)`` labels the mixed partial derivative
``d^|I| / dx_1^{i_1} ... dx_n^{i_n}``.  Within a fixed degree, indices are
always listed in graded reverse-lexicographic order (largest first), so
``enumerate_indices(2, 2) == [(2, 0), (1, 1), (0, 2)]``.  Every serialized
``u^j`` block follows this order.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

INT64_MAX = 2**63 - 1


class MultiIndex(tuple):
    """Immutable tuple of nonnegative integers with a cached degree."""

    __slots__ = ()

    def __new__(cls, entries):
        entries = tuple(int(e) for e in entries)
        if not entries:
            raise ValueError("a multi-index needs at least one entry")
        if any(e < 0 for e in entries):
            raise ValueError(f"multi-index entries must be nonnegative: {entries}")
        return super().__new__(cls, entries)

    @property
    def n(self) -> int:
        return len(self)

    @property
    def degree(self) -> int:
        return sum(self)

    def __repr__(self) -> str:
        return f"MultiIndex({tuple(self)})"


def _grevlex_key(index):
    # descending grevlex == ascending order of the reversed tuple
    return tuple(reversed(index))


@lru_cache(maxsize=None)
def _indices(n: int, j: int) -> tuple[MultiIndex, ...]:
    out = []
    for combo in combinations_with_replacement(range(n), j):
        entries = [0] * n
        for axis in combo:
            entries[axis] += 1
        out.append(MultiIndex(entries))
    out.sort(key=_grevlex_key)
    return tuple(out)


def enumerate_indices(n: int, j: int) -> list[MultiIndex]:
    """All multi-indices in ``n`` variables of degree exactly ``j``."""
    if n < 1 or j < 0:
        raise ValueError(f"need n >= 1 and j >= 0, got n={n}, j={j}")
    layer_dim(n, j)
    return list(_indices(n, j))


def layer_dim(n: int, j: int) -> int:
    """Number of degree-``j`` indices in ``n`` variables, ``C(n+j-1, j)``.

    Raises ``OverflowError`` when the count does not fit a signed 64-bit int.
    """
    if n < 1 or j < 0:
        raise ValueError(f"need n >= 1 and j >= 0, got n={n}, j={j}")
    d = math.comb(n + j - 1, j)
    if d > INT64_MAX:
        raise OverflowError(f"layer dimension C({n + j - 1}, {j}) exceeds 64 bits")
    return d


def index_position(index) -> int:
    """Position of ``index`` inside ``enumerate_indices(len(index), |index|)``."""
    index = MultiIndex(index)
    return _positions(index.n, index.degree)[index]


@lru_cache(maxsize=None)
def _positions(n: int, j: int) -> dict:
    return {I: p for p, I in enumerate(_indices(n, j))}


def factorial_of(index) -> int:
    """``I! = i_1! ... i_n!``."""
    return math.prod(math.factorial(i) for i in index)


def monomial(x, index):
    """``x^I`` with the convention ``0^0 = 1``.  Vectorized over leading axes of ``x``."""
    x = np.asarray(x)
    if x.shape[-1] != len(index):
        raise ValueError(f"point has {x.shape[-1]} coordinates, index has {len(index)}")
    out = np.ones(x.shape[:-1], dtype=np.result_type(x, float))
    for m, p in enumerate(index):
        if p:
            out = out * x[..., m] ** p
    return out if out.ndim else out.item()


def add_unit(index, axis: int) -> MultiIndex:
    """``I + e_axis`` with a 1-based ``axis``."""
    if not 1 <= axis <= len(index):
        raise IndexError(f"axis {axis} out of range 1..{len(index)}")
    entries = list(index)
    entries[axis - 1] += 1
    return MultiIndex(entries)


def sub_unit(index, axis: int) -> MultiIndex | None:
    """``I - e_axis``, or ``None`` when the entry is already zero."""
    if not 1 <= axis <= len(index):
        raise IndexError(f"axis {axis} out of range 1..{len(index)}")
    if index[axis - 1] == 0:
        return None
    entries = list(index)
    entries[axis - 1] -= 1
    return MultiIndex(entries)


def all_indices(n: int, max_degree: int) -> list[MultiIndex]:
    """Every index of degree ``0..max_degree``, grouped by degree."""
    return [I for j in range(max_degree + 1) for I in enumerate_indices(n, j)]
