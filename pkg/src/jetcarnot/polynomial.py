"""Sparse multivariate polynomials with exact differentiation and range bounds."""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import product
from numbers import Number

import numpy as np

from .multiindex import MultiIndex


class Polynomial:
    """Polynomial in ``n`` variables stored as ``{MultiIndex: coefficient}``.

    Coefficients may be ints, floats or Fractions; arithmetic keeps whatever
    type Python produces.  Zero coefficients are dropped.
    """

    max_order = math.inf

    def __init__(self, n: int, coeffs=None):
        if n < 1:
            raise ValueError("need at least one variable")
        self.n = n
        self.coeffs: dict[MultiIndex, Number] = {}
        for index, c in (coeffs or {}).items():
            index = MultiIndex(index)
            if index.n != n:
                raise ValueError(f"index {tuple(index)} does not have {n} entries")
            if c != 0:
                self.coeffs[index] = self.coeffs.get(index, 0) + c
        self.coeffs = {I: c for I, c in self.coeffs.items() if c != 0}

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, n: int, c) -> Polynomial:
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, axis: int) -> Polynomial:
        """The coordinate ``x_axis`` (1-based)."""
        e = [0] * n
        e[axis - 1] = 1
        return cls(n, {tuple(e): 1})

    @classmethod
    def from_terms(cls, n: int, terms) -> Polynomial:
        out = cls(n)
        for index, c in terms:
            index = MultiIndex(index)
            out.coeffs[index] = out.coeffs.get(index, 0) + c
        out.coeffs = {I: c for I, c in out.coeffs.items() if c != 0}
        return out

    def to_terms(self) -> list:
        return [[list(I), float(c)] for I, c in sorted(self.coeffs.items(), key=lambda t: (t[0].degree, tuple(-e for e in t[0])))]

    # basic properties ---------------------------------------------------
    @property
    def degree(self) -> int:
        return max((I.degree for I in self.coeffs), default=0)

    def max_partial_degrees(self) -> tuple[int, ...]:
        return tuple(max((I[m] for I in self.coeffs), default=0) for m in range(self.n))

    def is_zero(self) -> bool:
        return not self.coeffs

    def __repr__(self):
        if not self.coeffs:
            return f"Polynomial(n={self.n}, 0)"
        terms = " + ".join(f"{c}*x^{tuple(I)}" for I, c in self.coeffs.items())
        return f"Polynomial(n={self.n}, {terms})"

    def __eq__(self, other):
        if isinstance(other, Number):
            other = Polynomial.constant(self.n, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self.coeffs == other.coeffs

    # arithmetic ---------------------------------------------------------
    def _lift(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise ValueError("polynomials in different numbers of variables")
            return other
        if isinstance(other, Number):
            return Polynomial.constant(self.n, other)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self.coeffs)
        for I, c in other.coeffs.items():
            out[I] = out.get(I, 0) + c
        return Polynomial(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {I: -c for I, c in self.coeffs.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return Polynomial(self.n, {I: c * other for I, c in self.coeffs.items()})
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out: dict = {}
        for I, a in self.coeffs.items():
            for J, b in other.coeffs.items():
                K = MultiIndex(i + j for i, j in zip(I, J))
                out[K] = out.get(K, 0) + a * b
        return Polynomial(self.n, out)

    __rmul__ = __mul__

    def __pow__(self, p: int):
        if p < 0 or int(p) != p:
            raise ValueError("only nonnegative integer powers")
        out = Polynomial.constant(self.n, 1)
        base = self
        while p:
            if p & 1:
                out = out * base
            base = base * base
            p >>= 1
        return out

    # calculus -----------------------------------------------------------
    def derivative(self, index) -> Polynomial:
        """Exact mixed partial ``d_I`` as a new polynomial."""
        index = MultiIndex(index)
        if index.n != self.n:
            raise ValueError(f"index {tuple(index)} does not have {self.n} entries")
        out = {}
        for J, c in self.coeffs.items():
            if all(j >= i for j, i in zip(J, index)):
                factor = math.prod(math.perm(j, i) for j, i in zip(J, index))
                out[MultiIndex(j - i for j, i in zip(J, index))] = c * factor
        return Polynomial(self.n, out)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"expected points with {self.n} coordinates, got {x.shape}")
        if not self.coeffs:
            return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0
        degs = self.max_partial_degrees()
        powers = [x[..., m, None] ** np.arange(degs[m] + 1) for m in range(self.n)]
        total = np.zeros(x.shape[:-1])
        for I, c in self.coeffs.items():
            term = float(c)
            for m, p in enumerate(I):
                if p:
                    term = term * powers[m][..., p]
            total = total + term
        return total if x.ndim > 1 else float(total)

    def partial(self, index, x):
        return self.derivative(index)(x)

    def integrate_unit_cube(self) -> Fraction:
        """Exact integral over ``[0, 1]^n`` (float coefficients converted exactly)."""
        total = Fraction(0)
        for I, c in self.coeffs.items():
            term = Fraction(c)
            for p in I:
                term /= p + 1
            total += term
        return total

    # restrictions and range bounds ---------------------------------------
    def compose_affine(self, origin, direction) -> np.ndarray:
        """Power coefficients (ascending) of ``t -> p(origin + t * direction)``."""
        origin = np.asarray(origin, dtype=float)
        direction = np.asarray(direction, dtype=float)
        out = np.zeros(self.degree + 1)
        lines = [np.array([o, d]) for o, d in zip(origin, direction)]
        for I, c in self.coeffs.items():
            term = np.array([float(c)])
            for m, p in enumerate(I):
                if p:
                    term = np.polynomial.polynomial.polymul(term, np.polynomial.polynomial.polypow(lines[m], p))
            out[: len(term)] += term
        return out

    def dense(self) -> np.ndarray:
        """Dense coefficient tensor ``C[i_1, ..., i_n]``."""
        degs = self.max_partial_degrees()
        C = np.zeros(tuple(d + 1 for d in degs))
        for I, c in self.coeffs.items():
            C[tuple(I)] += float(c)
        return C

    def abs_bound(self, lo, hi, pieces: int = 1) -> float:
        """Rigorous bound on ``max |p|`` over the box ``[lo, hi]`` (up to rounding).

        Uses Bernstein coefficients on a uniform ``pieces``-per-axis subdivision.
        """
        if not self.coeffs:
            return 0.0
        return dense_abs_bound(self.dense(), np.broadcast_to(lo, (self.n,)), np.broadcast_to(hi, (self.n,)), pieces)


def _affine_matrix(deg: int, lo: float, width: float) -> np.ndarray:
    # T[i, j] = coefficient of s^j in (lo + width * s)^i
    T = np.zeros((deg + 1, deg + 1))
    for i in range(deg + 1):
        for j in range(i + 1):
            T[i, j] = math.comb(i, j) * lo ** (i - j) * width**j
    return T


def _to_bernstein_matrix(deg: int) -> np.ndarray:
    # b_j = sum_{i <= j} C(j, i) / C(deg, i) a_i
    B = np.zeros((deg + 1, deg + 1))
    for j in range(deg + 1):
        for i in range(j + 1):
            B[j, i] = math.comb(j, i) / math.comb(deg, i)
    return B


def _apply_axis(C, M, axis):
    return np.moveaxis(np.tensordot(M, C, axes=([1], [axis])), 0, axis)


def dense_abs_bound(C, lo, hi, pieces: int = 1) -> float:
    """Bernstein enclosure of ``max |sum C[I] x^I|`` over a box, subdivided."""
    C = np.asarray(C, dtype=float)
    n = C.ndim
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    width = (hi - lo) / pieces
    best = 0.0
    to_b = [_to_bernstein_matrix(C.shape[m] - 1) for m in range(n)]
    for cell in product(range(pieces), repeat=n):
        D = C
        for m in range(n):
            T = _affine_matrix(C.shape[m] - 1, lo[m] + cell[m] * width[m], width[m])
            D = _apply_axis(D, to_b[m] @ T.T, m)
        best = max(best, float(np.max(np.abs(D))))
    return best


def univariate_abs_bound(coeffs, pieces: int = 1) -> float:
    """Bernstein bound of ``max |sum coeffs[i] t^i|`` over ``t in [0, 1]``."""
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if coeffs.size == 0:
        return 0.0
    return dense_abs_bound(coeffs, [0.0], [1.0], pieces)


def univariate_piece_bounds(coeffs, pieces: int) -> np.ndarray:
    """Per-piece Bernstein bounds of ``|p(t)|`` on ``[m/pieces, (m+1)/pieces]``."""
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if coeffs.size == 0:
        return np.zeros(pieces)
    deg = coeffs.size - 1
    to_b = _to_bernstein_matrix(deg)
    width = 1.0 / pieces
    out = np.empty(pieces)
    for m in range(pieces):
        T = _affine_matrix(deg, m * width, width)
        out[m] = np.max(np.abs(to_b @ (T.T @ coeffs)))
    return out
