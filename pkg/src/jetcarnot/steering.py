"""Explicit horizontal connections between jets with certified length bounds.

The curve joining jet ``w`` at ``a`` to jet ``v`` at ``b`` is the
prolongation of ``g = T_w + chi(s) (T_v - T_w)`` along the segment, where
``T_w, T_v`` are the degree-k Taylor polynomials carrying the two jets and
``chi`` is the degree ``2k+1`` smoothstep in the segment parameter.  Only
the ``(k+1)``-st derivatives of ``chi (T_v - T_w)`` enter the speed, and
those are bounded with Bernstein enclosures, so the returned number is an
upper bound for ``d_c`` (rounding aside).  When ``a`` and ``b`` are close the
route first detours to a point at distance ``rho`` and comes back.
"""

from __future__ import annotations

import math

import numpy as np

from .jetcore import JetPoint
from .multiindex import enumerate_indices, factorial_of
from .jetmaps import _speed_polys
from .polynomial import Polynomial, univariate_piece_bounds


def smoothstep_coeffs(k: int) -> np.ndarray:
    """Ascending coefficients of ``chi(s) = s^{k+1} sum_m C(k+m, m) (1-s)^m``."""
    P = np.polynomial.polynomial
    out = np.zeros(1)
    for m in range(k + 1):
        term = math.comb(k + m, m) * P.polypow([1.0, -1.0], m)
        out = P.polyadd(out, term)
    return P.polymul(out, P.polypow([0.0, 1.0], k + 1))


def _local_taylor(n: int, k: int, coords, shape, center) -> Polynomial:
    """Taylor polynomial of the jet ``coords`` based at ``center`` (local variables)."""
    shifted = [Polynomial.variable(n, m + 1) - float(center[m]) for m in range(n)]
    out = Polynomial(n)
    for j in range(k + 1):
        for index, c in zip(enumerate_indices(n, j), coords[shape.block(j)]):
            if c == 0:
                continue
            term = Polynomial.constant(n, float(c) / factorial_of(index))
            for m, e in enumerate(index):
                if e:
                    term = term * shifted[m] ** e
            out = out + term
    return out


def _leg_bound(delta: Polynomial, start, direction, k: int, pieces: int) -> float:
    """Length bound of the leg from ``start`` along ``direction`` blending in ``delta``."""
    n = delta.n
    d2 = float(direction @ direction)
    if d2 == 0.0:
        raise ValueError("degenerate leg")
    # s(y) = <y - start, d> / |d|^2, composed into chi
    s = Polynomial.constant(n, -float(start @ direction) / d2)
    for m in range(n):
        if direction[m] != 0:
            s = s + Polynomial.variable(n, m + 1) * float(direction[m] / d2)
    chi = Polynomial(n)
    s_pow = Polynomial.constant(n, 1)
    for c in smoothstep_coeffs(k):
        if c != 0:
            chi = chi + s_pow * float(c)
        s_pow = s_pow * s
    bump = chi * delta
    speed_sq = np.full(pieces, d2)
    for coeffs in _speed_polys(bump, k, start, direction):
        speed_sq += univariate_piece_bounds(coeffs, pieces) ** 2
    return float(np.sum(np.sqrt(speed_sq)) / pieces)


def _homogeneous_gap(p: JetPoint, q: JetPoint) -> float:
    diff = q.coords - p.coords
    shape = p.shape
    rho = float(np.linalg.norm(diff[shape.x_slice]))
    for j in range(shape.k + 1):
        rho = max(rho, float(np.linalg.norm(diff[shape.block(j)])) ** (1.0 / (shape.k + 1 - j)))
    return rho


def connector_bound(p: JetPoint, q: JetPoint, pieces: int = 16, scales=(0.5, 1.0, 2.0, 4.0)) -> float:
    """Certified upper bound on ``d_c(p, q)`` from explicit prolonged-polynomial routes."""
    if p.shape != q.shape:
        raise ValueError("points live in different jet spaces")
    if np.array_equal(p.coords, q.coords):
        return 0.0
    n, k = p.n, p.k
    # work in variables centred at p.x; x-translation is a symmetry of the frame
    a = np.zeros(n)
    b = np.asarray(q.x - p.x, dtype=float)
    Tw = _local_taylor(n, k, p.coords, p.shape, a)
    Tv = _local_taylor(n, k, q.coords, q.shape, b)
    delta = Tv - Tw
    best = math.inf
    dist = float(np.linalg.norm(b))
    if dist > 0:
        best = _leg_bound(delta, a, b, k, pieces)
        axis = b / dist
    else:
        axis = np.eye(n)[0]
    rho0 = _homogeneous_gap(p, q)
    # coefficients of delta carry rounding noise of size ~eps |coords|; a detour
    # shorter than noise^{1/(k+1)} would divide that noise by rho^k
    scale = 1.0 + float(np.max(np.abs(np.concatenate([p.coords, q.coords]).astype(float))))
    noise = 64.0 * np.finfo(float).eps * scale ** (k + 1)
    rho0 = max(rho0, noise ** (1.0 / (k + 1)))
    for sign in (1.0, -1.0):
        for scale in scales:
            rho = scale * rho0
            m = a + sign * rho * axis
            if np.allclose(m, b, rtol=0, atol=1e-300):
                continue
            # first leg follows T_w's own prolongation: speed exactly rho
            best = min(best, rho + _leg_bound(delta, m, b - m, k, pieces))
    return best


def riemannian_correction(p: JetPoint, q: JetPoint) -> float:
    """Length of an explicit g0 path: straight x-move at frozen u, then a straight u-move."""
    shape = p.shape
    dx = np.asarray(q.x - p.x, dtype=float)
    carried = np.einsum("i,iab,b->a", dx, shape.structure, np.asarray(p.coords, dtype=float))
    carried[shape.x_slice] = 0.0
    x_leg = math.sqrt(float(dx @ dx) + float(carried @ carried))
    du = np.asarray(q.coords - p.coords, dtype=float)[shape.n :]
    return x_leg + float(np.linalg.norm(du))
