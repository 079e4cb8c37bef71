"""Boundary maps into jet space that admit no Lipschitz extension.

A compatible pair ``(f_0, f_1)`` (equal k-jets on the boundary of the unit
cube) defines ``F`` on the boundary of ``Q^{n+1}``: the jet of ``f_0`` on the
bottom and side faces, the jet of ``f_1`` on the top face.  Any extension of
``delta_L o F`` to the whole cube has ``d_0``-Lipschitz constant at least
``L^{1 + k/(n+1)} |int (f_0 - f_1)|^{1/(n+1)}``, which outgrows the linear
``L lambda`` of a dilated ``lambda``-Lipschitz extension.  This module
computes that bound, measures concrete extensions against it, assembles
the multi-scale witness set and the isometric embeddings between jet spaces.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy.stats import qmc

from .calibration import CoordinateMapGrid
from .jetcore import JetPoint, JetShape, coords_to_frame_array, dilate_coords
from .jetmaps import (
    JetEvaluator,
    boundary_mismatch,
    canonical_pair,
    cube_boundary_grid,
    sup_speed_factor_on_cube,
)
from .multiindex import layer_dim
from .paths import PathOptions, cc_upper_bound
from .polynomial import Polynomial

BOUNDARY_TOL = 1e-12


class IncompatibleBoundaryError(ValueError):
    """The two fields do not share their k-jets on the boundary of the cube."""


# boundary data ------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryMapSpec:
    """Compatible pair ``(f0, f1)`` of polynomial fields and a dilation scale ``L``.

    ``integral_gap`` is the exact value of ``int_{Q^n} (f0 - f1) dx`` (a
    Fraction), so its quadrature error is zero.
    """

    n: int
    k: int
    f0: Polynomial
    f1: Polynomial
    L: float = 1.0
    tol: float = 1e-10

    def __post_init__(self):
        if not (isinstance(self.f0, Polynomial) and isinstance(self.f1, Polynomial)):
            raise TypeError("boundary fields must be polynomials")
        if self.f0.n != self.n or self.f1.n != self.n:
            raise ValueError(f"fields must have {self.n} variables")
        if self.L < 0:
            raise ValueError("L must be nonnegative")
        mismatch = boundary_mismatch(self.f0, self.f1, self.k)
        if mismatch > self.tol:
            raise IncompatibleBoundaryError(f"k-jets differ on the boundary by {mismatch:.3e}")
        gap = (self.f0 - self.f1).integrate_unit_cube()
        object.__setattr__(self, "_gap", gap)

    @property
    def compatible(self) -> bool:
        return True

    @property
    def integral_gap(self) -> Fraction:
        return self._gap

    @property
    def integral_gap_error(self) -> float:
        return 0.0

    @property
    def shape(self) -> JetShape:
        return JetShape(self.n, self.k)

    def with_L(self, L: float) -> BoundaryMapSpec:
        return replace(self, L=L)

    @classmethod
    def canonical(cls, n: int, k: int, L: float = 1.0) -> BoundaryMapSpec:
        f0, f1 = canonical_pair(n, k)
        return cls(n, k, f0, f1, L)


def _on_cube_boundary(z, tol: float = BOUNDARY_TOL) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.any((np.abs(z) <= tol) | (np.abs(z - 1.0) <= tol), axis=-1)


def eval_F_coords(spec: BoundaryMapSpec, z) -> np.ndarray:
    """Vectorized ``delta_L o F`` at boundary points ``z = (x, t)`` of shape (..., n+1)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != spec.n + 1:
        raise ValueError(f"expected points in R^{spec.n + 1}")
    if np.any(z < -BOUNDARY_TOL) or np.any(z > 1 + BOUNDARY_TOL):
        raise ValueError("point outside the unit cube")
    if not np.all(_on_cube_boundary(z)):
        raise ValueError("F is only defined on the boundary of the cube")
    x, t = z[..., :-1], z[..., -1]
    top = (np.abs(t - 1.0) <= BOUNDARY_TOL) & ~_on_cube_boundary(x)
    c0 = JetEvaluator(spec.f0, spec.k).coords(x)
    c1 = JetEvaluator(spec.f1, spec.k).coords(x)
    out = np.where(top[..., None], c1, c0)
    return dilate_coords(spec.shape, spec.L, out)


def eval_F(spec: BoundaryMapSpec, x, t: float) -> JetPoint:
    """``delta_L o F(x, t)`` for ``(x, t)`` on the boundary of ``Q^{n+1}``."""
    z = np.append(np.asarray(x, dtype=float).reshape(spec.n), float(t))
    return JetPoint(spec.shape, eval_F_coords(spec, z))


def certified_lower_bound(spec: BoundaryMapSpec) -> float:
    """``L^{1 + k/(n+1)} |integral_gap|^{1/(n+1)}``: lower bound on ``Lip_{d_0}`` of every extension."""
    if not spec.L > 0:
        raise ValueError("L must be positive")
    n, k = spec.n, spec.k
    return float(spec.L ** (1 + k / (n + 1)) * abs(float(spec.integral_gap)) ** (1 / (n + 1)))


def lip_dc_upper(spec: BoundaryMapSpec, pieces: int = 8) -> float:
    """Upper bound on ``Lip_{d_c}`` of ``F`` (at ``L = 1``) on the cube boundary.

    Within a face the map is a prolonged field (or constant in ``t``), so a
    segment costs at most ``S`` times its length, ``S`` being the certified
    supremum of the speed factor.  Points on opposite ``t``-faces are joined
    through a side face, which costs at most another factor ``sqrt(2)``.
    """
    S = max(sup_speed_factor_on_cube(f, spec.k, pieces) for f in (spec.f0, spec.f1))
    return math.sqrt(2.0) * S


# extensions -----------------------------------------------------------------------

@dataclass
class ExtensionCandidate:
    """A map ``Q^{n+1} -> J^k(R^n)`` agreeing with ``delta_L o F`` on the boundary.

    ``evaluator`` maps points of shape (..., n+1) to coordinates (..., D).
    """

    spec: BoundaryMapSpec
    evaluator: object
    kind: str = "user-grid"
    check_points: int = 9
    boundary_gap: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.kind not in ("canonical-interpolation", "user-grid"):
            raise ValueError(f"unknown candidate kind {self.kind!r}")
        z = cube_boundary_grid(self.spec.n + 1, self.check_points)
        got = np.asarray(self.evaluator(z), dtype=float)
        want = eval_F_coords(self.spec, z)
        self.boundary_gap = float(np.max(np.abs(got - want)))
        if self.boundary_gap > 1e-9 * (1.0 + float(np.max(np.abs(want)))):
            raise ValueError(f"candidate misses the boundary data by {self.boundary_gap:.3e}")

    def coords(self, z) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(z, dtype=float)), dtype=float)

    def __call__(self, z) -> JetPoint:
        return JetPoint(self.spec.shape, self.coords(z))

    def grid(self, N: int) -> CoordinateMapGrid:
        """Sample ``(h_1, ..., h_n, h_{n+1}) = (x-part, u^0)`` on the lattice."""
        shape = self.spec.shape
        x_idx = list(range(shape.n))
        u0 = shape.block(0).start

        def h(z):
            c = self.coords(z)
            return c[..., x_idx + [u0]]

        return CoordinateMapGrid.from_function(h, shape.n + 1, N)


def canonical_extension(spec: BoundaryMapSpec) -> ExtensionCandidate:
    """``(x, t) -> delta_L j^k((1 - t) f0 + t f1)(x)``."""
    e0 = JetEvaluator(spec.f0, spec.k)
    e1 = JetEvaluator(spec.f1, spec.k)

    def evaluator(z):
        z = np.asarray(z, dtype=float)
        x, t = z[..., :-1], z[..., -1:]
        return dilate_coords(spec.shape, spec.L, (1.0 - t) * e0.coords(x) + t * e1.coords(x))

    return ExtensionCandidate(spec, evaluator, kind="canonical-interpolation")


@dataclass(frozen=True)
class Sampling:
    """Pair sampling for measured Lipschitz constants.

    ``pairs`` quasi-random points (or pairs) start the search and are doubled
    up to ``max_rounds`` times until the estimate moves by less than
    ``rel_tol``.  ``face_points`` per edge add a deterministic grid.
    """

    pairs: int = 256
    face_points: int = 5
    seed: int = 0
    max_rounds: int = 4
    rel_tol: float = 0.01
    step: float = 1e-6


def _sobol(dim: int, count: int, seed: int) -> np.ndarray:
    m = max(1, math.ceil(math.log2(count)))
    return qmc.Sobol(dim, scramble=True, seed=seed).random_base2(m)[:count]


def _lattice(dim: int, points: int) -> np.ndarray:
    s = np.linspace(0.0, 1.0, points)
    return np.stack(np.meshgrid(*([s] * dim), indexing="ij"), axis=-1).reshape(-1, dim)


def _lower_round(cand: ExtensionCandidate, count: int, sampling: Sampling) -> float:
    m = cand.spec.n + 1
    pq = _sobol(2 * m, count, sampling.seed)
    p, q = pq[:, :m], pq[:, m:]
    # axis-aligned pairs on a lattice catch directions random pairs miss
    base = _lattice(m, sampling.face_points)
    h = 1.0 / max(sampling.face_points - 1, 1)
    extra_p, extra_q = [], []
    for axis in range(m):
        shifted = base.copy()
        shifted[:, axis] += h
        keep = shifted[:, axis] <= 1.0 + 1e-12
        extra_p.append(base[keep])
        extra_q.append(shifted[keep])
    p = np.concatenate([p, *extra_p])
    q = np.concatenate([q, *extra_q])
    Fp, Fq = cand.coords(p), cand.coords(q)
    hs = cand.spec.shape.horizontal_slice
    num = np.linalg.norm(Fq[:, hs] - Fp[:, hs], axis=1)
    den = np.linalg.norm(q - p, axis=1)
    ok = den > 0
    return float(np.max(num[ok] / den[ok], initial=0.0))


def _upper_round(cand: ExtensionCandidate, count: int, sampling: Sampling) -> float:
    m = cand.spec.n + 1
    shape = cand.spec.shape
    z = np.concatenate([_sobol(m, count, sampling.seed), _lattice(m, sampling.face_points)])
    h = sampling.step
    base = cand.coords(z)
    cols = []
    for axis in range(m):
        e = np.zeros(m)
        e[axis] = h
        cols.append((cand.coords(z + e) - cand.coords(z - e)) / (2 * h))
    Dcoords = np.stack(cols, axis=-1)  # (P, D, m)
    frame = coords_to_frame_array(shape, base[:, None, :], np.moveaxis(Dcoords, -1, 1))  # (P, m, D)
    if not np.all(np.isfinite(frame)):
        raise FloatingPointError("non-finite differential")
    return float(np.max(np.linalg.norm(frame, ord=2, axis=(1, 2)), initial=0.0))


def measured_lip(cand: ExtensionCandidate, mode: str = "upper", sampling: Sampling | None = None) -> float:
    """Sampled estimate of ``Lip_{d_0}`` of a candidate extension.

    ``mode="lower"``: max of ``coordinate_lower_bound(F(p), F(q)) / |p - q|``
    over sampled pairs, a certified lower estimate.  ``mode="upper"``: max
    over sampled points of the g0 operator norm of the differential (central
    differences), which converges from below to the true constant.
    """
    sampling = sampling or Sampling()
    if sampling.pairs < 1:
        raise ValueError("need at least one sample")
    round_fn = {"lower": _lower_round, "upper": _upper_round}.get(mode)
    if round_fn is None:
        raise ValueError(f"mode must be 'lower' or 'upper', got {mode!r}")
    count = sampling.pairs
    est = round_fn(cand, count, sampling)
    for _ in range(sampling.max_rounds):
        count *= 2
        new = round_fn(cand, count, sampling)
        settled = abs(new - est) <= sampling.rel_tol * max(abs(est), 1e-300)
        est = max(est, new)
        if settled:
            break
    return est


# growth table ----------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthRow:
    L: float
    certified: float
    measured_upper: float
    slope_so_far: float

    @property
    def ratio(self) -> float:
        return self.measured_upper / self.certified if self.certified > 0 else math.inf

    def ok(self, rel_tol: float = 0.01) -> bool:
        return self.measured_upper >= self.certified * (1.0 - rel_tol)


def _loglog_slope(xs, ys) -> float:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if len(xs) < 2 or np.any(ys <= 0):
        return math.nan
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def growth_table(spec: BoundaryMapSpec, Ls, sampling: Sampling | None = None) -> list[GrowthRow]:
    """Certified bound and measured upper estimate of the canonical extension for each ``L``."""
    rows = []
    Ls = [float(L) for L in Ls]
    if any(not L > 0 for L in Ls):
        raise ValueError("all L must be positive")
    certs = []
    for i, L in enumerate(Ls):
        s = spec.with_L(L)
        cert = certified_lower_bound(s)
        certs.append(cert)
        upper = measured_lip(canonical_extension(s), "upper", sampling)
        rows.append(GrowthRow(L, cert, upper, _loglog_slope(Ls[: i + 1], certs)))
    return rows


def growth_table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L", "certified", "measured_upper", "ratio", "slope_so_far"])
    for r in rows:
        w.writerow([repr(r.L), repr(r.certified), repr(r.measured_upper), repr(r.ratio), repr(r.slope_so_far)])
    return buf.getvalue()


# multi-scale witness ------------------------------------------------------------------

def shell_half_edge(L: int) -> Fraction:
    """``A_L = [-2^{L-1}, 2^{L-1}]^{n+1}``."""
    return Fraction(2) ** (L - 1)


def shell_distance(L: int, Lp: int) -> Fraction:
    """Exact Euclidean distance between the boundaries of ``A_L`` and ``A_{L'}``."""
    return abs(shell_half_edge(L) - shell_half_edge(Lp))


@dataclass
class UnboundedWitness:
    """Sampled shells ``dA_0, ..., dA_{L_max}`` with the map ``f(2^L (z - e)) = delta_{2^L} F(z)``."""

    spec: BoundaryMapSpec
    L_max: int
    samples: np.ndarray  # boundary points z of the unit cube
    dc_to_origin: np.ndarray  # cc upper bounds for d_c(0, F(z))
    c: float
    lipF_upper: float
    checks: dict = field(default_factory=dict)

    @property
    def levels(self) -> range:
        return range(self.L_max + 1)

    def shell_points(self, L: int) -> np.ndarray:
        e = np.full(self.spec.n + 1, 0.5)
        return 2.0**L * (self.samples - e)

    def shell_values(self, L: int) -> np.ndarray:
        return dilate_coords(self.spec.shape, 2.0**L, eval_F_coords(self.spec, self.samples))

    def to_dict(self) -> dict:
        return {
            "n": self.spec.n,
            "k": self.spec.k,
            "f0": self.spec.f0.to_terms(),
            "f1": self.spec.f1.to_terms(),
            "integral_gap": str(self.spec.integral_gap),
            "integral_gap_float": float(self.spec.integral_gap),
            "c": self.c,
            "lipF_upper": self.lipF_upper,
            "checks": self.checks,
            "shells": [
                {
                    "L": L,
                    "half_edge": float(shell_half_edge(L)),
                    "points": self.shell_points(L).tolist(),
                    "values": self.shell_values(L).tolist(),
                }
                for L in self.levels
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def build_witness(
    spec: BoundaryMapSpec,
    L_max: int,
    points_per_edge: int = 5,
    cross_pairs: int = 10_000,
    within_pairs: int = 200,
    seed: int = 0,
    opts: PathOptions | None = None,
) -> UnboundedWitness:
    """Sample the witness set and run its Lipschitz checks.

    ``c`` is the largest cc upper bound of ``d_c(0, F(z))`` over the sampled
    ``z``.  Cross-shell ratios are bounded through the origin,
    ``d_c(f(y), f(y')) <= 2^L c_z + 2^{L'} c_{z'}``; within-shell ratios use
    the prolonged-segment bound on a common face.
    """
    if L_max < 1:
        raise ValueError("L_max must be at least 1")
    spec = spec.with_L(1.0)
    opts = opts or PathOptions(seed=seed)
    shape = spec.shape
    z = cube_boundary_grid(spec.n + 1, points_per_edge)
    values = eval_F_coords(spec, z)
    origin = JetPoint.origin(shape)
    cache: dict[bytes, float] = {}
    dc = np.empty(len(z))
    for i, v in enumerate(values):
        key = np.round(v, 14).tobytes()
        if key not in cache:
            cache[key] = cc_upper_bound(origin, JetPoint(shape, v), opts)
        dc[i] = cache[key]
    c = float(dc.max())
    w = UnboundedWitness(spec, L_max, z, dc, c, lip_dc_upper(spec))

    rng = np.random.default_rng(seed)
    # shell separation, exact
    sep_ok = all(
        shell_distance(L, Lp) >= Fraction(2) ** (max(L, Lp) - 2)
        for L in range(L_max + 1)
        for Lp in range(L_max + 1)
        if L != Lp
    )
    # cross-shell pairs
    e = np.full(spec.n + 1, 0.5)
    L1 = rng.integers(0, L_max + 1, cross_pairs)
    L2 = (L1 + rng.integers(1, L_max + 1, cross_pairs)) % (L_max + 1)
    i1 = rng.integers(0, len(z), cross_pairs)
    i2 = rng.integers(0, len(z), cross_pairs)
    y1 = 2.0 ** L1[:, None] * (z[i1] - e)
    y2 = 2.0 ** L2[:, None] * (z[i2] - e)
    num = 2.0**L1 * dc[i1] + 2.0**L2 * dc[i2]
    cross = num / np.linalg.norm(y1 - y2, axis=1)
    # within-shell pairs on a common face of the unit cube; the ratio is scale free
    within = _within_shell_ratios(spec, z, rng, within_pairs)
    w.checks = {
        "shell_separation_ok": bool(sep_ok),
        "cross_pairs": int(cross_pairs),
        "cross_max_ratio": float(cross.max()),
        "cross_bound_8c": 8.0 * c,
        "cross_ok": bool(cross.max() <= 8.0 * c),
        "within_pairs": int(len(within)),
        "within_max_ratio": float(max(within, default=0.0)),
        "within_ok": bool(max(within, default=0.0) <= w.lipF_upper),
    }
    return w


def _within_shell_ratios(spec: BoundaryMapSpec, z, rng, count: int) -> list[float]:
    from .jetmaps import jet_lip_bound

    out = []
    m = spec.n + 1
    for _ in range(count):
        axis = int(rng.integers(0, m))
        side = float(rng.integers(0, 2))
        a, b = rng.random(m), rng.random(m)
        a[axis] = b[axis] = side
        dist = float(np.linalg.norm(a - b))
        if dist == 0:
            continue
        if axis == m - 1 and side == 1.0:
            field_ = spec.f1
        else:
            # bottom face, or a side face where F does not depend on t
            field_ = spec.f0
        out.append(jet_lip_bound(field_, spec.k, a[:-1], b[:-1]) / dist)
    return out


def contradiction_level(n: int, k: int, gap, lam: float) -> int:
    """Least integer ``L >= 0`` with ``(2^L lam)^{n+1} < 2^{L(n+k+1)} |gap|``, decided exactly."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    gap = abs(Fraction(gap))
    if gap == 0:
        raise ValueError("zero integral gap: no contradiction at any scale")
    lam_p = Fraction(lam) ** (n + 1)
    # the condition reads lam^{n+1} < 2^{Lk} |gap| and is monotone in L
    L = 0
    while not lam_p < Fraction(2) ** (L * k) * gap:
        L += 1
    return L


def witness_contradiction_curve(w: UnboundedWitness, lam: float) -> int:
    """First dyadic scale at which a ``lam``-Lipschitz extension would violate the calibration bound."""
    return contradiction_level(w.spec.n, w.spec.k, w.spec.integral_gap, lam)


# isometric copies of Euclidean space --------------------------------------------------

def check_embedding_dims(l: int, m: int, n: int) -> None:
    """Raise unless ``binom(m + l - 1, l) >= n + 1``."""
    if layer_dim(m, l) < n + 1:
        raise ValueError(f"J^{l}(R^{m}) top layer has dimension {layer_dim(m, l)} < {n + 1}")


def embed_E(l: int, m: int, v) -> JetPoint:
    """``s(v) = (0, v, 0, ..., 0)`` in ``J^l(R^m)``."""
    shape = JetShape(m, l)
    v = np.asarray(v, dtype=float).ravel()
    if v.size != layer_dim(m, l):
        raise ValueError(f"expected a vector of length {layer_dim(m, l)}, got {v.size}")
    coords = np.zeros(shape.total_dim)
    coords[shape.block(l)] = v
    return JetPoint(shape, coords)


def project_E(p: JetPoint) -> np.ndarray:
    """``pi(x, u^l, ..., u^0) = u^l``."""
    return np.array(p.u(p.k), dtype=float)
