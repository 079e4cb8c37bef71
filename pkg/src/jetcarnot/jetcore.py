"""Jet space coordinates, dilations and the left-invariant frame.

Points of J^k(R^n) are stored as a flat coordinate vector laid out as
``(x, u^k, u^{k-1}, ..., u^0)``; each ``u^j`` block is ordered by
:func:`jetcarnot.multiindex.enumerate_indices`.  Tangent vectors are stored by
their coefficients in the orthonormal frame ``(X_1..X_n, d/du^j_I)`` using the
same layout, so ``a_i`` sits in the x-slots and ``b^j_I`` in the u-slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .multiindex import add_unit, enumerate_indices, index_position, layer_dim


@dataclass(frozen=True)
class JetShape:
    n: int
    k: int

    def __post_init__(self):
        if self.n < 1 or self.k < 0:
            raise ValueError(f"need n >= 1 and k >= 0, got n={self.n}, k={self.k}")
        # surfaces overflow for absurd (n, k) before anything is allocated
        for j in range(self.k + 1):
            layer_dim(self.n, j)

    @cached_property
    def layer_dims(self) -> list[int]:
        """``[d_k, ..., d_0]`` in storage order."""
        return [layer_dim(self.n, j) for j in range(self.k, -1, -1)]

    @cached_property
    def total_dim(self) -> int:
        return self.n + sum(self.layer_dims)

    @cached_property
    def _offsets(self) -> dict[int, int]:
        off, pos = {}, self.n
        for j in range(self.k, -1, -1):
            off[j] = pos
            pos += layer_dim(self.n, j)
        return off

    def block(self, j: int) -> slice:
        """Slice of the ``u^j`` block inside a coordinate vector."""
        if not 0 <= j <= self.k:
            raise IndexError(f"stratum {j} outside 0..{self.k}")
        start = self._offsets[j]
        return slice(start, start + layer_dim(self.n, j))

    def slot(self, j: int, index) -> int:
        """Flat position of ``u^j_I``."""
        if len(index) != self.n or sum(index) != j:
            raise ValueError(f"{tuple(index)} is not a {j}-index in {self.n} variables")
        return self._offsets[j] + index_position(index)

    @property
    def x_slice(self) -> slice:
        return slice(0, self.n)

    @property
    def horizontal_slice(self) -> slice:
        """The ``(x, u^k)`` coordinates, i.e. the horizontal frame slots."""
        return slice(0, self.n + layer_dim(self.n, self.k))

    @cached_property
    def weights(self) -> np.ndarray:
        """Homogeneous degree of every coordinate under dilation."""
        w = np.ones(self.total_dim)
        for j in range(self.k + 1):
            w[self.block(j)] = self.k + 1 - j
        return w

    @cached_property
    def structure(self) -> np.ndarray:
        """Array ``G`` of shape (n, D, D) with ``X_i(p) = e_{x_i} + G[i] @ p``."""
        return _structure(self.n, self.k)


@lru_cache(maxsize=None)
def _structure(n: int, k: int) -> np.ndarray:
    shape = JetShape(n, k)
    G = np.zeros((n, shape.total_dim, shape.total_dim))
    for j in range(k):
        for index in enumerate_indices(n, j):
            row = shape.slot(j, index)
            for i in range(1, n + 1):
                G[i - 1, row, shape.slot(j + 1, add_unit(index, i))] = 1.0
    G.setflags(write=False)
    return G


@dataclass(frozen=True, eq=False)
class JetPoint:
    shape: JetShape
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords)
        if coords.dtype != object:
            coords = coords.astype(float)
        if coords.shape != (self.shape.total_dim,):
            raise ValueError(
                f"expected {self.shape.total_dim} coordinates for J^{self.shape.k}(R^{self.shape.n}),"
                f" got shape {coords.shape}"
            )
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_blocks(cls, x, blocks, k: int | None = None) -> JetPoint:
        """Build from ``x`` and ``[u^k, ..., u^0]``."""
        x = np.atleast_1d(np.asarray(x))
        blocks = [np.atleast_1d(np.asarray(b)) for b in blocks]
        shape = JetShape(len(x), len(blocks) - 1 if k is None else k)
        if [len(b) for b in blocks] != shape.layer_dims:
            raise ValueError(f"block lengths {[len(b) for b in blocks]} != {shape.layer_dims}")
        return cls(shape, np.concatenate([x, *blocks]))

    @classmethod
    def origin(cls, shape: JetShape) -> JetPoint:
        return cls(shape, np.zeros(shape.total_dim))

    @property
    def n(self) -> int:
        return self.shape.n

    @property
    def k(self) -> int:
        return self.shape.k

    @property
    def x(self) -> np.ndarray:
        return self.coords[self.shape.x_slice]

    def u(self, j: int) -> np.ndarray:
        return self.coords[self.shape.block(j)]

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.u(j) for j in range(self.k, -1, -1)]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "x": [float(v) for v in self.x],
            "u": [[float(v) for v in b] for b in self.blocks],
        }

    @classmethod
    def from_dict(cls, data: dict) -> JetPoint:
        p = cls.from_blocks(data["x"], data["u"], k=data.get("k"))
        if "n" in data and data["n"] != p.n:
            raise ValueError(f"declared n={data['n']} but x has {p.n} entries")
        return p

    def __eq__(self, other):
        if not isinstance(other, JetPoint):
            return NotImplemented
        return self.shape == other.shape and bool(np.all(self.coords == other.coords))

    def __repr__(self):
        return f"JetPoint(n={self.n}, k={self.k}, x={self.x.tolist()}, u={[b.tolist() for b in self.blocks]})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector at ``base`` given by its g0-orthonormal frame coefficients."""

    base: JetPoint
    frame: np.ndarray = field(repr=True)

    def __post_init__(self):
        frame = np.array(self.frame, dtype=float)
        if frame.shape != (self.base.shape.total_dim,):
            raise ValueError(f"frame vector must have {self.base.shape.total_dim} entries")
        frame.setflags(write=False)
        object.__setattr__(self, "frame", frame)

    @property
    def a(self) -> np.ndarray:
        return self.frame[self.base.shape.x_slice]

    def b(self, j: int) -> np.ndarray:
        return self.frame[self.base.shape.block(j)]

    def is_horizontal(self, tol: float = 0.0) -> bool:
        shape = self.base.shape
        vertical = self.frame[shape.horizontal_slice.stop:]
        return bool(np.all(np.abs(vertical) <= tol))

    def __add__(self, other: TangentVector) -> TangentVector:
        if other.base is not self.base and not other.base == self.base:
            raise ValueError("cannot add tangent vectors at different points")
        return TangentVector(self.base, self.frame + other.frame)

    def __mul__(self, s: float) -> TangentVector:
        return TangentVector(self.base, s * self.frame)

    __rmul__ = __mul__


def dilate(L: float, p: JetPoint) -> JetPoint:
    """``delta_L(x, u^k, ..., u^0) = (L x, L u^k, L^2 u^{k-1}, ..., L^{k+1} u^0)``."""
    if not L > 0:
        raise ValueError(f"dilation factor must be positive, got {L}")
    return JetPoint(p.shape, dilate_coords(p.shape, L, p.coords))


def dilate_coords(shape: JetShape, L, coords):
    """Dilation on raw coordinate arrays (last axis); ``L = 0`` allowed here."""
    coords = np.asarray(coords)
    if coords.dtype == object:
        return np.array([c * L ** int(w) for c, w in zip(coords, shape.weights)], dtype=object)
    return coords * np.power(float(L), shape.weights)


def frame_field(p: JetPoint, i: int) -> np.ndarray:
    """Coordinate components of ``X_i(p)`` (``i`` is 1-based)."""
    if not 1 <= i <= p.n:
        raise IndexError(f"axis {i} out of range 1..{p.n}")
    out = p.shape.structure[i - 1] @ np.asarray(p.coords, dtype=float)
    out[i - 1] = 1.0
    return out


def horizontal_fields(shape: JetShape, coords) -> np.ndarray:
    """Coordinate components of all ``X_i`` at a batch of points: shape (..., n, D)."""
    coords = np.asarray(coords, dtype=float)
    X = np.einsum("iab,...b->...ia", shape.structure, coords)
    X[..., np.arange(shape.n), np.arange(shape.n)] = 1.0
    return X


def coords_to_frame_array(shape: JetShape, coords, velocity) -> np.ndarray:
    """Vectorized change of basis; ``velocity`` has the coordinate axis last."""
    coords = np.asarray(coords, dtype=float)
    v = np.array(velocity, dtype=float)
    a = v[..., shape.x_slice]
    # sum_i a_i G_i p gives the u-part carried along by the X_i
    carried = np.einsum("...i,iab,...b->...a", a, shape.structure, coords)
    carried[..., shape.x_slice] = 0.0
    return v - carried


def frame_to_coords_array(shape: JetShape, coords, frame) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    f = np.array(frame, dtype=float)
    a = f[..., shape.x_slice]
    carried = np.einsum("...i,iab,...b->...a", a, shape.structure, coords)
    carried[..., shape.x_slice] = 0.0
    return f + carried


def coords_to_frame(p: JetPoint, v) -> TangentVector:
    v = np.asarray(v, dtype=float)
    if v.shape != (p.shape.total_dim,):
        raise ValueError(f"velocity must have {p.shape.total_dim} components, got {v.shape}")
    return TangentVector(p, coords_to_frame_array(p.shape, p.coords, v))


def frame_to_coords(V: TangentVector) -> np.ndarray:
    return frame_to_coords_array(V.base.shape, V.base.coords, V.frame)


def g0_inner(V: TangentVector, W: TangentVector) -> float:
    return float(V.frame @ W.frame)


def g0_norm(V: TangentVector) -> float:
    return float(np.linalg.norm(V.frame))


def frame_vector(p: JetPoint, i: int | None = None, j: int | None = None, index=None) -> TangentVector:
    """Unit frame vector ``X_i`` (give ``i``) or ``d/du^j_I`` (give ``j`` and ``index``)."""
    e = np.zeros(p.shape.total_dim)
    if i is not None:
        if not 1 <= i <= p.n:
            raise IndexError(f"axis {i} out of range 1..{p.n}")
        e[i - 1] = 1.0
    else:
        e[p.shape.slot(j, index)] = 1.0
    return TangentVector(p, e)


# Heisenberg group J^1(R^n): y = u^1, z = u^0.

def _heis_parts(p: JetPoint):
    if p.k != 1:
        raise ValueError(f"the Heisenberg law is only defined for k = 1, got k = {p.k}")
    return p.x, p.u(1), p.u(0)[0]


def heisenberg_product(p: JetPoint, q: JetPoint) -> JetPoint:
    """``(x, y, z) * (x', y', z') = (x + x', y + y', z + z' + <y, x'>)``."""
    if p.shape != q.shape:
        raise ValueError("points live in different jet spaces")
    x, y, z = _heis_parts(p)
    x2, y2, z2 = _heis_parts(q)
    cross = sum((yi * xi for yi, xi in zip(y, x2)), start=0 * z)
    return JetPoint(p.shape, np.concatenate([x + x2, y + y2, np.array([z + z2 + cross], dtype=p.coords.dtype)]))


def heisenberg_inverse(p: JetPoint) -> JetPoint:
    x, y, z = _heis_parts(p)
    cross = sum((yi * xi for yi, xi in zip(y, x)), start=0 * z)
    return JetPoint(p.shape, np.concatenate([-x, -y, np.array([-z + cross], dtype=p.coords.dtype)]))


# Lie brackets of vector fields given as coordinate-component callables.

def lie_bracket(V, W, coords, h: float = 1e-3) -> np.ndarray:
    """``[V, W](p) = DW(p) V(p) - DV(p) W(p)`` with central-difference Jacobians."""
    coords = np.asarray(coords, dtype=float)
    v, w = V(coords), W(coords)
    return _directional(W, coords, v, h) - _directional(V, coords, w, h)


def _directional(F, coords, direction, h):
    return (F(coords + h * direction) - F(coords - h * direction)) / (2 * h)


def bracket_check(shape: JetShape, j: int, index, i: int, point=None, seed: int = 0) -> float:
    """Max deviation of ``[d/du^{j+1}_{I+e_i}, X_i]`` from ``d/du^j_I`` at a point."""
    if not 0 <= j <= shape.k - 1:
        raise ValueError(f"stratum {j} outside 0..{shape.k - 1}")
    if len(index) != shape.n or sum(index) != j:
        raise ValueError(f"{tuple(index)} is not a {j}-index")
    if point is None:
        point = np.random.default_rng(seed).uniform(-1, 1, shape.total_dim)
    partial = np.zeros(shape.total_dim)
    partial[shape.slot(j + 1, add_unit(index, i))] = 1.0
    got = lie_bracket(lambda c: partial, lambda c: _X(shape, i, c), point)
    want = np.zeros(shape.total_dim)
    want[shape.slot(j, index)] = 1.0
    return float(np.max(np.abs(got - want)))


def _X(shape: JetShape, i: int, coords):
    out = shape.structure[i - 1] @ coords
    out[i - 1] = 1.0
    return out
