"""The calibration form ``omega = dx_1 ^ ... ^ dx_n ^ du^0`` and Stokes quadrature.

A :class:`CoordinateMapGrid` holds ``m = n + 1`` real functions
``h_1, ..., h_m`` sampled on the uniform lattice of ``[0, 1]^m``.  The two
sides of

    int_Q dh_1 ^ ... ^ dh_m  =  int_{dQ} h_1 dh_2 ^ ... ^ dh_m

are evaluated by quadrature.  With ``N`` even and ``N >= 4`` partials are
fourth-order finite differences (central inside, one-sided at the two
outermost layers) and integrals use composite Simpson weights, so for
smooth maps the residual decays like ``N^-4``.  Otherwise the scheme drops
to second-order differences with trapezoid weights.
"""

from __future__ import annotations

import io
import struct
from itertools import product

import numpy as np

from .jetcore import JetPoint, TangentVector

_MAGIC = b"JCGRID1\x00"

# one-sided fourth-order stencils for the first two nodes of an edge
_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


class DegenerateGridError(ValueError):
    """Grid too coarse or values malformed."""


class CoordinateMapGrid:
    """Samples of ``h_1, ..., h_m`` on the ``(N + 1)^m`` lattice of the unit cube.

    Parameters
    ----------
    values : array_like
        Shape ``(m, N + 1, ..., N + 1)`` with ``m`` lattice axes.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim < 2:
            raise DegenerateGridError("values need shape (m, N+1, ..., N+1)")
        m = values.shape[0]
        if m < 2:
            raise DegenerateGridError("need at least two functions on a 2-cube")
        if values.ndim != m + 1 or len(set(values.shape[1:])) != 1:
            raise DegenerateGridError(f"expected {m} lattice axes of equal length, got shape {values.shape}")
        if values.shape[1] < 3:
            raise DegenerateGridError("need N >= 2")
        if not np.all(np.isfinite(values)):
            raise DegenerateGridError("grid values must be finite")
        self.values = values
        self.values.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1] - 1

    @property
    def node_count(self) -> int:
        return (self.N + 1) ** self.dim

    @property
    def spacing(self) -> float:
        return 1.0 / self.N

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(N + 1, ..., N + 1, m)``."""
        s = np.linspace(0.0, 1.0, self.N + 1)
        return np.stack(np.meshgrid(*([s] * self.dim), indexing="ij"), axis=-1)

    @classmethod
    def from_function(cls, func, dim: int, N: int) -> CoordinateMapGrid:
        """Sample ``func(points) -> values`` with points of shape ``(..., dim)``."""
        s = np.linspace(0.0, 1.0, N + 1)
        pts = np.stack(np.meshgrid(*([s] * dim), indexing="ij"), axis=-1)
        vals = np.asarray(func(pts), dtype=float)
        return cls(np.moveaxis(vals, -1, 0))

    @property
    def high_order(self) -> bool:
        return self.N >= 4 and self.N % 2 == 0

    # ------------------------------------------------------------------ io
    def to_csv(self) -> str:
        """Node-major CSV: one row per node, lattice indices then values."""
        m = self.dim
        buf = io.StringIO()
        buf.write(f"# dim={m} N={self.N}\n")
        buf.write(",".join([f"i{a + 1}" for a in range(m)] + [f"h{a + 1}" for a in range(m)]) + "\n")
        flat = self.values.reshape(m, -1).T
        for idx, row in zip(product(range(self.N + 1), repeat=m), flat):
            buf.write(",".join([str(i) for i in idx] + [repr(float(v)) for v in row]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> CoordinateMapGrid:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = dict(item.split("=") for item in lines[0].lstrip("# ").split())
        m, N = int(header["dim"]), int(header["N"])
        rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
        if rows.shape != ((N + 1) ** m, 2 * m):
            raise DegenerateGridError(f"expected {(N + 1) ** m} rows of {2 * m} columns")
        values = np.empty((m,) + (N + 1,) * m)
        idx = tuple(rows[:, a].astype(int) for a in range(m))
        for a in range(m):
            values[(a,) + idx] = rows[:, m + a]
        return cls(values)

    def to_bytes(self) -> bytes:
        """Binary layout: magic, little-endian uint32 ``dim`` and ``N``, then float64 values."""
        return _MAGIC + struct.pack("<II", self.dim, self.N) + self.values.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> CoordinateMapGrid:
        if data[:8] != _MAGIC:
            raise DegenerateGridError("not a coordinate grid file")
        m, N = struct.unpack("<II", data[8:16])
        vals = np.frombuffer(data[16:], dtype="<f8")
        if vals.size != m * (N + 1) ** m:
            raise DegenerateGridError("truncated grid file")
        return cls(vals.reshape((m,) + (N + 1,) * m).astype(float))


def omega_eval(p: JetPoint, V) -> float:
    """``omega(p)(V_1, ..., V_{n+1})`` from frame coefficients.

    Row ``i`` of the determinant is ``(a^i_1, ..., a^i_n, b^{0,i})``: the
    ``X``-coefficients and the ``d/du^0`` coefficient of ``V_i``.
    """
    V = list(V)
    if len(V) != p.n + 1:
        raise ValueError(f"omega takes {p.n + 1} vectors, got {len(V)}")
    rows = []
    for v in V:
        if not isinstance(v, TangentVector):
            raise TypeError("expected TangentVector arguments")
        rows.append(np.concatenate([v.a, v.b(0)]))
    return float(np.linalg.det(np.array(rows)))


def omega_frames(shape, frames) -> np.ndarray:
    """Vectorized ``omega`` on frame coefficients of shape ``(..., n + 1, D)``.

    The value does not depend on the base point, since the frame already
    absorbs it.
    """
    frames = np.asarray(frames, dtype=float)
    if frames.shape[-2:] != (shape.n + 1, shape.total_dim):
        raise ValueError(f"expected frames of shape (..., {shape.n + 1}, {shape.total_dim})")
    cols = list(range(shape.n)) + [shape.block(0).start]
    return np.linalg.det(frames[..., cols])


def _simpson(N: int) -> np.ndarray:
    w = np.ones(N + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * N)


def _trapezoid(N: int) -> np.ndarray:
    w = np.full(N + 1, 1.0 / N)
    w[[0, -1]] *= 0.5
    return w


def _diff(h: np.ndarray, axis: int, N: int, high: bool) -> np.ndarray:
    if not high:
        return np.gradient(h, 1.0 / N, axis=axis, edge_order=2)
    h = np.moveaxis(h, axis, 0)
    out = np.empty_like(h)
    out[2:-2] = (h[:-4] - 8 * h[1:-3] + 8 * h[3:-1] - h[4:]) / 12.0
    out[0] = np.tensordot(_EDGE0, h[:5], 1)
    out[1] = np.tensordot(_EDGE1, h[:5], 1)
    out[-1] = -np.tensordot(_EDGE0, h[::-1][:5], 1)
    out[-2] = -np.tensordot(_EDGE1, h[::-1][:5], 1)
    return np.moveaxis(out * N, 0, axis)


def _weighted_sum(f: np.ndarray, w: np.ndarray) -> float:
    # contract one axis at a time: fixed order, deterministic
    for _ in range(f.ndim):
        f = np.tensordot(f, w, axes=([f.ndim - 1], [0]))
    return float(f)


def _partials(g: CoordinateMapGrid) -> np.ndarray:
    """``P[..., i, j] = d_{x_j} h_i`` at every node."""
    high = g.high_order
    P = np.stack([np.stack([_diff(h, j, g.N, high) for j in range(g.dim)], axis=-1) for h in g.values], axis=-2)
    return P


def _weights(g: CoordinateMapGrid) -> np.ndarray:
    return _simpson(g.N) if g.high_order else _trapezoid(g.N)


def interior_integral(g: CoordinateMapGrid) -> float:
    """``int_{Q^m} det(d_{x_j} h_i) dx`` by quadrature."""
    return _weighted_sum(np.linalg.det(_partials(g)), _weights(g))


def boundary_integral(g: CoordinateMapGrid) -> float:
    """``int_{dQ^m} h_1 dh_2 ^ ... ^ dh_m`` summed over faces with the outward orientation.

    Face ``x_j = l`` carries the sign ``(-1)^{j+1}`` for ``l = 1`` and the
    opposite sign for ``l = 0``; its integrand is ``h_1`` times the minor of
    rows ``2..m`` and columns ``k != j`` (in increasing order).
    """
    m = g.dim
    P = _partials(g)
    w = _weights(g)
    total = 0.0
    for j in range(m):
        cols = [c for c in range(m) if c != j]
        minor = np.linalg.det(P[..., 1:, :][..., cols])
        integrand = g.values[0] * minor
        sign = 1.0 if j % 2 == 0 else -1.0
        top = np.take(integrand, -1, axis=j)
        bottom = np.take(integrand, 0, axis=j)
        total += sign * (_weighted_sum(top, w) - _weighted_sum(bottom, w))
    return total


def stokes_residual(g: CoordinateMapGrid) -> float:
    """``|interior - boundary| / (1 + |interior|)``."""
    inner = interior_integral(g)
    return abs(inner - boundary_integral(g)) / (1.0 + abs(inner))


def extension_boundary_value(spec) -> float:
    """``L^{n+k+1} int_{Q^n} (f_1 - f_0) dx``: the boundary integral every extension must have.

    With lattice axes ``(x_1, ..., x_n, t)`` and ``h = (x-part, u^0)`` the
    Jacobian of any extension integrates to this value; for ``n = 1`` it equals
    ``(-1)^n L^{n+k+1} int (f_0 - f_1)``.
    """
    if not spec.compatible:
        raise ValueError("boundary data are not compatible")
    n, k = spec.n, spec.k
    return float(-(spec.L ** (n + k + 1)) * spec.integral_gap)


def polynomial_test_map(dim: int, degree: int, seed: int):
    """A random polynomial map ``[0, 1]^dim -> R^dim`` of total degree ``degree``."""
    rng = np.random.default_rng(seed)
    exps = [e for e in product(range(degree + 1), repeat=dim) if sum(e) <= degree]
    coeffs = rng.uniform(-1.0, 1.0, (dim, len(exps)))

    def h(x):
        mono = np.stack([np.prod(x ** np.array(e), axis=-1) for e in exps], axis=-1)
        return mono @ coeffs.T

    return h


def piecewise_linear_test_map(dim: int, seed: int):
    """A Lipschitz, non-C^1 map: affine plus absolute values of oblique affine functions."""
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1.0, 1.0, (dim, dim))
    B = rng.uniform(-1.0, 1.0, (dim, dim))
    W = rng.normal(size=(dim, dim))
    c = W @ rng.uniform(0.3, 0.7, dim)

    def h(x):
        return x @ A.T + np.abs(x @ W.T - c) @ B.T

    return h


def identity_map(x):
    return np.array(x, dtype=float)
