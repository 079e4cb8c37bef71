"""Scalar fields, Taylor polynomials and jet prolongation ``j^k(f)``."""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from .jetcore import JetPoint, JetShape, TangentVector
from .multiindex import MultiIndex, add_unit, all_indices, enumerate_indices, factorial_of
from .polynomial import Polynomial, univariate_piece_bounds


class DerivativeOrderError(ValueError):
    """Requested derivative order exceeds what the field guarantees."""


class BlackBoxField:
    """A field known only through point evaluations (and optionally derivatives).

    Parameters
    ----------
    func : callable
        ``func(x) -> float`` for a point ``x`` of shape ``(n,)``.
    n : int
        Number of variables.
    max_order : int
        Highest derivative order the caller vouches for.
    derivative : callable, optional
        ``derivative(index, x) -> float`` returning exact mixed partials.  When
        absent, partials come from Richardson-extrapolated central differences;
        expect roughly 1e-10 relative accuracy up to order 3 and a few digits
        lost per order beyond that.
    step : float
        Base step of the difference stencil.
    """

    def __init__(self, func, n: int, max_order: int, derivative=None, step: float = 0.2, levels: int = 4):
        self.func = func
        self.n = n
        self.max_order = max_order
        self.derivative_fn = derivative
        self.step = step
        self.levels = levels

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.func(x))
        return np.array([self.func(p) for p in x.reshape(-1, self.n)]).reshape(x.shape[:-1])

    def partial(self, index, x):
        index = MultiIndex(index)
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            return np.array([self.partial(index, p) for p in x.reshape(-1, self.n)]).reshape(x.shape[:-1])
        if index.degree == 0:
            return float(self.func(x))
        if self.derivative_fn is not None:
            return float(self.derivative_fn(index, x))
        table = [self._central(index, x, self.step / 2**level) for level in range(self.levels)]
        for m in range(1, self.levels):
            table = [(4**m * table[i + 1] - table[i]) / (4**m - 1) for i in range(len(table) - 1)]
        return float(table[0])

    def _central(self, index, x, h):
        # tensor product of 1-D central stencils, p-th difference with half steps for odd p
        axes = [(m, p) for m, p in enumerate(index) if p]
        stencils = [[(s, (-1) ** s * math.comb(p, s)) for s in range(p + 1)] for _, p in axes]
        total = 0.0
        for combo in product(*stencils):
            shift = np.zeros(self.n)
            weight = 1.0
            for (m, p), (s, w) in zip(axes, combo):
                shift[m] = (p / 2 - s) * h
                weight *= w
            total += weight * self.func(x + shift)
        return total / h**index.degree


def _field_n(f) -> int:
    return f.n


def partial(f, index, x):
    """``d_I f(x)``; exact for polynomials."""
    index = MultiIndex(index)
    if index.n != _field_n(f):
        raise ValueError(f"index {tuple(index)} does not match a field in {f.n} variables")
    if index.degree > f.max_order:
        raise DerivativeOrderError(f"order {index.degree} exceeds max_order {f.max_order}")
    return f.partial(index, x)


def taylor(f, x0, k: int) -> Polynomial:
    """k-th order Taylor polynomial of ``f`` at ``x0``, expanded in powers of ``x``."""
    if k > f.max_order:
        raise DerivativeOrderError(f"order {k} exceeds max_order {f.max_order}")
    n = _field_n(f)
    x0 = np.asarray(x0, dtype=float).reshape(n)
    shifted = [Polynomial.variable(n, m + 1) - float(x0[m]) for m in range(n)]
    out = Polynomial(n)
    for index in all_indices(n, k):
        c = partial(f, index, x0)
        if c == 0:
            continue
        term = Polynomial.constant(n, c / factorial_of(index))
        for m, p in enumerate(index):
            if p:
                term = term * shifted[m] ** p
        out = out + term
    return out


def taylor_from_jet(p: JetPoint) -> Polynomial:
    """The degree-k polynomial whose k-jet at ``p.x`` is ``p``."""
    n = p.n
    shifted = [Polynomial.variable(n, m + 1) - float(p.x[m]) for m in range(n)]
    out = Polynomial(n)
    for j in range(p.k + 1):
        block = p.u(j)
        for index, c in zip(enumerate_indices(n, j), block):
            if c == 0:
                continue
            term = Polynomial.constant(n, float(c) / factorial_of(index))
            for m, e in enumerate(index):
                if e:
                    term = term * shifted[m] ** e
            out = out + term
    return out


def prolong(f, k: int, x) -> JetPoint:
    """``j^k_x(f)``: the point ``(x, (d_I f(x))_{|I| = k}, ..., f(x))``."""
    if k > f.max_order:
        raise DerivativeOrderError(f"order {k} exceeds max_order {f.max_order}")
    n = _field_n(f)
    x = np.asarray(x, dtype=float).reshape(n)
    blocks = [[partial(f, I, x) for I in enumerate_indices(n, j)] for j in range(k, -1, -1)]
    return JetPoint.from_blocks(x, blocks, k=k)


class JetEvaluator:
    """Vectorized ``j^k(f)`` for polynomial fields: derivative polynomials cached once."""

    def __init__(self, f: Polynomial, k: int, extra_order: int = 0):
        self.f = f
        self.k = k
        self.shape = JetShape(f.n, k)
        self.derivs = {I: f.derivative(I) for I in all_indices(f.n, k + extra_order)}
        self._order = [I for j in range(k, -1, -1) for I in enumerate_indices(f.n, j)]

    def coords(self, x) -> np.ndarray:
        """Jet coordinates for a batch of points, shape (..., D)."""
        x = np.asarray(x, dtype=float)
        flat_x = x.reshape(-1, self.f.n)
        flat = np.column_stack([flat_x, *(self.derivs[I](flat_x) for I in self._order)])
        return flat.reshape(x.shape[:-1] + (self.shape.total_dim,))


def _top_gradient(f, k: int, z) -> np.ndarray:
    """Matrix ``G[I, i] = d_{I + e_i} f(z)`` over ``I in I(k)``."""
    n = _field_n(f)
    if k + 1 > f.max_order:
        raise DerivativeOrderError(f"needs derivatives of order {k + 1}, field guarantees {f.max_order}")
    return np.array([[partial(f, add_unit(I, i), z) for i in range(1, n + 1)] for I in enumerate_indices(n, k)])


def segment_curve_derivative(f, k: int, x, y, t: float) -> TangentVector:
    """Frame decomposition of ``d/dt j^k(f)((1 - t) x + t y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    z = (1 - t) * x + t * y
    base = prolong(f, k, z)
    frame = np.zeros(base.shape.total_dim)
    frame[: base.n] = d
    frame[base.shape.block(k)] = _top_gradient(f, k, z) @ d
    return TangentVector(base, frame)


def _speed_polys(f: Polynomial, k: int, x, d) -> list[np.ndarray]:
    """Univariate coefficient arrays of ``sum_i d_i d_{I+e_i} f(x + t d)`` for each ``I in I(k)``."""
    n = f.n
    out = []
    for I in enumerate_indices(n, k):
        poly = Polynomial(n)
        for i in range(1, n + 1):
            if d[i - 1] != 0:
                poly = poly + f.derivative(add_unit(I, i)) * float(d[i - 1])
        out.append(poly.compose_affine(x, d))
    return out


def jet_lip_bound(f, k: int, x, y, samples: int = 64) -> float:
    """Upper bound on ``d_c(j^k f(x), j^k f(y))`` from the prolonged segment.

    For polynomial fields the supremum of the speed factor is bounded with
    Bernstein enclosures on ``samples`` sub-intervals, so the result is a
    certified upper bound; for black-box fields it is the maximum over a
    uniform grid of ``samples`` points.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    if k + 1 > f.max_order:
        raise DerivativeOrderError(f"needs derivatives of order {k + 1}, field guarantees {f.max_order}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = float(np.linalg.norm(y - x))
    if dist == 0:
        return 0.0
    return sup_speed_factor(f, k, x, y, samples) * dist


def sup_speed_factor(f, k: int, x, y, samples: int = 64) -> float:
    """``sup_t (1 + sum_{I, i} (d_{I+e_i} f(gamma(t)))^2)^{1/2}`` along the segment."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = _field_n(f)
    if isinstance(f, Polynomial):
        total = np.ones(samples)
        for I in enumerate_indices(n, k):
            for i in range(1, n + 1):
                g = f.derivative(add_unit(I, i)).compose_affine(x, y - x)
                total = total + univariate_piece_bounds(g, samples) ** 2
        return float(np.sqrt(total.max()))
    ts = np.linspace(0.0, 1.0, samples)
    best = 0.0
    for t in ts:
        G = _top_gradient(f, k, (1 - t) * x + t * y)
        best = max(best, float(np.sqrt(1.0 + np.sum(G**2))))
    return best


def sup_speed_factor_on_cube(f: Polynomial, k: int, pieces: int = 8) -> float:
    """Certified ``sup_{x in Q^n} (1 + sum (d_{I+e_i} f(x))^2)^{1/2}`` for a polynomial."""
    n = f.n
    total = 1.0
    for I in enumerate_indices(n, k):
        for i in range(1, n + 1):
            total += f.derivative(add_unit(I, i)).abs_bound(0.0, 1.0, pieces) ** 2
    return math.sqrt(total)


def cube_boundary_grid(n: int, points_per_edge: int = 17) -> np.ndarray:
    """Sample points of the boundary of ``[0, 1]^n``; for ``n = 1`` just ``{0, 1}``."""
    if n == 1:
        return np.array([[0.0], [1.0]])
    s = np.linspace(0.0, 1.0, points_per_edge)
    pts = []
    for axis in range(n):
        for value in (0.0, 1.0):
            grids = np.meshgrid(*([s] * (n - 1)), indexing="ij")
            face = np.stack([g.ravel() for g in grids], axis=-1)
            pts.append(np.insert(face, axis, value, axis=1))
    return np.unique(np.concatenate(pts), axis=0)


def boundary_compatible(f0, f1, k: int, tol: float = 1e-10, points_per_edge: int = 17) -> bool:
    """Whether ``d_I f0 = d_I f1`` on the boundary of the unit cube for all ``|I| <= k``."""
    return boundary_mismatch(f0, f1, k, points_per_edge) <= tol


def boundary_mismatch(f0, f1, k: int, points_per_edge: int = 17) -> float:
    n = _field_n(f0)
    pts = cube_boundary_grid(n, points_per_edge)
    worst = 0.0
    if isinstance(f0, Polynomial) and isinstance(f1, Polynomial):
        diff = f0 - f1
        for I in all_indices(n, k):
            worst = max(worst, float(np.max(np.abs(diff.derivative(I)(pts)))))
        return worst
    for I in all_indices(n, k):
        for p in pts:
            worst = max(worst, abs(partial(f0, I, p) - partial(f1, I, p)))
    return worst


def canonical_pair(n: int, k: int) -> tuple[Polynomial, Polynomial]:
    """``f0 = 0`` and ``f1(x) = prod_i (x_i (1 - x_i))^{k+1}``.

    ``f1`` vanishes to order ``k`` on the boundary of the unit cube and
    integrates to ``(((k+1)!)^2 / (2k+3)!)^n`` over it.
    """
    f1 = Polynomial.constant(n, 1)
    for axis in range(1, n + 1):
        x = Polynomial.variable(n, axis)
        f1 = f1 * (x * (1 - x)) ** (k + 1)
    return Polynomial(n), f1


def zero_field(n: int) -> Polynomial:
    return Polynomial(n)
