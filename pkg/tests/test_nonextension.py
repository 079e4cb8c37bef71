import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jetcarnot.calibration import boundary_integral, extension_boundary_value, interior_integral
from jetcarnot.jetcore import JetPoint, JetShape, dilate
from jetcarnot.jetmaps import canonical_pair, cube_boundary_grid, prolong, zero_field
from jetcarnot.nonextension import (
    BoundaryMapSpec,
    ExtensionCandidate,
    IncompatibleBoundaryError,
    Sampling,
    build_witness,
    canonical_extension,
    certified_lower_bound,
    check_embedding_dims,
    contradiction_level,
    embed_E,
    eval_F,
    eval_F_coords,
    growth_table,
    growth_table_csv,
    lip_dc_upper,
    measured_lip,
    project_E,
    shell_distance,
    shell_half_edge,
    witness_contradiction_curve,
)
from jetcarnot.paths import PathOptions, cc_upper_bound, coordinate_lower_bound, r0_upper_bound
from jetcarnot.polynomial import Polynomial

FAST = Sampling(pairs=128, max_rounds=2)


def _x(n=1, i=1):
    return Polynomial.variable(n, i)


# boundary spec ---------------------------------------------------------------------


def test_canonical_gap_is_exact():
    assert BoundaryMapSpec.canonical(1, 1).integral_gap == Fraction(-1, 30)
    assert BoundaryMapSpec.canonical(2, 1).integral_gap == -Fraction(1, 30) ** 2
    # Beta(4, 4) = 3!^2 / 7!
    assert BoundaryMapSpec.canonical(1, 2).integral_gap == -Fraction(36, 5040)
    assert BoundaryMapSpec.canonical(1, 1).integral_gap_error == 0.0


def test_incompatible_pair_is_rejected():
    x = _x()
    with pytest.raises(IncompatibleBoundaryError):
        BoundaryMapSpec(1, 1, zero_field(1), x * (1 - x))
    # (x(1-x))^2 matches the zero jet of order 1 but not of order 2
    with pytest.raises(IncompatibleBoundaryError):
        BoundaryMapSpec(1, 2, zero_field(1), (x * (1 - x)) ** 2)
    with pytest.raises(ValueError):
        BoundaryMapSpec(2, 1, zero_field(1), zero_field(1))
    with pytest.raises(ValueError):
        BoundaryMapSpec.canonical(1, 1, L=-1.0)


def test_spec_is_immutable_and_rescalable():
    s = BoundaryMapSpec.canonical(1, 1)
    t = s.with_L(3.0)
    assert (s.L, t.L) == (1.0, 3.0)
    assert t.integral_gap == s.integral_gap
    with pytest.raises(AttributeError):
        s.L = 2.0


# eval_F -------------------------------------------------------------------------------


def test_eval_F_branches():
    spec = BoundaryMapSpec.canonical(1, 1, L=2.0)
    f0, f1 = canonical_pair(1, 1)
    assert eval_F(spec, [0.3], 0.0) == dilate(2.0, prolong(f0, 1, [0.3]))
    assert eval_F(spec, [0.3], 1.0) == dilate(2.0, prolong(f1, 1, [0.3]))
    # side face: f0 regardless of t
    assert eval_F(spec, [1.0], 0.6) == dilate(2.0, prolong(f0, 1, [1.0]))


@pytest.mark.parametrize("n,k", [(1, 1), (1, 2), (2, 1)])
def test_eval_F_branches_agree_on_the_boundary_of_the_base(n, k):
    spec = BoundaryMapSpec.canonical(n, k, L=1.7)
    xs = cube_boundary_grid(n, 7) if n > 1 else np.array([[0.0], [1.0]])
    for x in xs:
        a = eval_F(spec, x, 0.0).coords
        b = eval_F(spec, x, 1.0).coords
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_eval_F_errors():
    spec = BoundaryMapSpec.canonical(1, 1)
    with pytest.raises(ValueError):
        eval_F(spec, [0.5], 0.5)
    with pytest.raises(ValueError):
        eval_F(spec, [1.5], 0.0)
    with pytest.raises(ValueError):
        eval_F_coords(spec, np.zeros((3, 3)))


def test_eval_F_at_zero_scale_collapses_to_the_origin():
    spec = BoundaryMapSpec.canonical(2, 2, L=0.0)
    z = cube_boundary_grid(3, 4)
    np.testing.assert_array_equal(eval_F_coords(spec, z), 0.0)


# certified bound -----------------------------------------------------------------------


def test_certified_examples():
    assert certified_lower_bound(BoundaryMapSpec.canonical(1, 1)) == pytest.approx(math.sqrt(1 / 30), rel=1e-15)
    assert certified_lower_bound(BoundaryMapSpec.canonical(1, 1, L=4.0)) == pytest.approx(8 / math.sqrt(30), rel=1e-15)
    f = _x() ** 4
    assert certified_lower_bound(BoundaryMapSpec(1, 1, f, f, L=5.0)) == 0.0
    with pytest.raises(ValueError):
        certified_lower_bound(BoundaryMapSpec.canonical(1, 1, L=0.0))


@given(st.floats(0.01, 100.0), st.sampled_from([(1, 1), (1, 2), (2, 1), (2, 2)]))
def test_certified_bound_is_homogeneous(L, nk):
    n, k = nk
    base = certified_lower_bound(BoundaryMapSpec.canonical(n, k))
    got = certified_lower_bound(BoundaryMapSpec.canonical(n, k, L=L))
    assert got == pytest.approx(L ** (1 + k / (n + 1)) * base, rel=1e-13)


# extensions -----------------------------------------------------------------------------


def test_canonical_extension_midpoint():
    for L in (1.0, 2.0, 3.0):
        cand = canonical_extension(BoundaryMapSpec.canonical(1, 1, L=L))
        assert cand([0.5, 0.5]).u(0)[0] == pytest.approx(L**2 / 32, rel=1e-14)
        assert cand.kind == "canonical-interpolation"


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (1, 3)])
def test_canonical_extension_matches_on_the_boundary(n, k):
    spec = BoundaryMapSpec.canonical(n, k, L=2.5)
    cand = canonical_extension(spec)
    rng = np.random.default_rng(0)
    z = rng.random((1000, n + 1))
    axis = rng.integers(0, n + 1, 1000)
    z[np.arange(1000), axis] = rng.integers(0, 2, 1000)
    assert np.max(np.abs(cand.coords(z) - eval_F_coords(spec, z))) <= 1e-12
    assert cand.boundary_gap <= 1e-12


def test_candidate_with_wrong_boundary_is_rejected():
    spec = BoundaryMapSpec.canonical(1, 1)
    with pytest.raises(ValueError):
        ExtensionCandidate(spec, lambda z: np.zeros(np.shape(z)[:-1] + (3,)))
    with pytest.raises(ValueError):
        ExtensionCandidate(spec, canonical_extension(spec).evaluator, kind="other")


def test_user_candidate_accepted():
    spec = BoundaryMapSpec.canonical(1, 1, L=2.0)
    canon = canonical_extension(spec)

    def bumped(z):
        z = np.asarray(z, dtype=float)
        out = canon.coords(z)
        bump = np.prod(z * (1 - z), axis=-1)
        out[..., 1] += 5.0 * bump
        return out

    cand = ExtensionCandidate(spec, bumped)
    # the bump sits in u^1, which the calibration does not see
    g = cand.grid(64)
    assert boundary_integral(g) == pytest.approx(extension_boundary_value(spec), abs=1e-6)
    assert measured_lip(cand, "upper", FAST) >= measured_lip(canon, "upper", FAST)


# measured Lipschitz constants ---------------------------------------------------------------


@pytest.mark.parametrize("mode", ["lower", "upper"])
def test_constant_candidate_measures_zero(mode):
    cand = canonical_extension(BoundaryMapSpec.canonical(1, 1, L=0.0))
    assert measured_lip(cand, mode, FAST) == 0.0


@pytest.mark.parametrize("mode", ["lower", "upper"])
@pytest.mark.parametrize("L", [0.5, 1.0, 3.0])
def test_flat_pair_measures_L(mode, L):
    z = zero_field(2)
    cand = canonical_extension(BoundaryMapSpec(2, 1, z, z, L=L))
    assert measured_lip(cand, mode, FAST) == pytest.approx(L, rel=1e-6)


def test_upper_estimate_dominates_certified_bound():
    spec = BoundaryMapSpec.canonical(1, 1)
    assert measured_lip(canonical_extension(spec), "upper", FAST) >= certified_lower_bound(spec)


def test_measured_lip_validates_arguments():
    cand = canonical_extension(BoundaryMapSpec.canonical(1, 1))
    with pytest.raises(ValueError):
        measured_lip(cand, "middle")
    with pytest.raises(ValueError):
        measured_lip(cand, "upper", Sampling(pairs=0))


def test_measured_lip_is_deterministic():
    cand = canonical_extension(BoundaryMapSpec.canonical(1, 2, L=2.0))
    assert measured_lip(cand, "upper", FAST) == measured_lip(cand, "upper", FAST)
    assert measured_lip(cand, "lower", FAST) == measured_lip(cand, "lower", FAST)


@pytest.mark.parametrize("L", [1.0, 2.0, 4.0])
def test_calibration_chain(L):
    spec = BoundaryMapSpec.canonical(1, 1, L=L)
    cand = canonical_extension(spec)
    upper = measured_lip(cand, "upper", FAST)
    inner = interior_integral(cand.grid(64))
    assert abs(inner) <= upper**2 * 1.01
    assert abs(inner) >= certified_lower_bound(spec) ** 2 * (1 - 1e-6)


# growth table -------------------------------------------------------------------------------


@pytest.mark.parametrize("n,k,slope", [(1, 1, 1.5), (1, 2, 2.0), (2, 1, 4 / 3), (2, 2, 5 / 3)])
def test_growth_slope(n, k, slope):
    rows = growth_table(BoundaryMapSpec.canonical(n, k), [1, 2, 4, 8], FAST)
    assert math.isnan(rows[0].slope_so_far)
    assert rows[-1].slope_so_far == pytest.approx(slope, abs=1e-12)
    assert all(r.ok() for r in rows)
    assert all(r.ratio >= 0.99 for r in rows)


def test_growth_table_csv_layout():
    rows = growth_table(BoundaryMapSpec.canonical(1, 1), [1, 2], FAST)
    lines = growth_table_csv(rows).splitlines()
    assert lines[0] == "L,certified,measured_upper,ratio,slope_so_far"
    assert len(lines) == 3
    assert float(lines[2].split(",")[-1]) == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(ValueError):
        growth_table(BoundaryMapSpec.canonical(1, 1), [1, 0], FAST)


def test_flat_pair_growth_rows_all_pass():
    f = _x() ** 2
    rows = growth_table(BoundaryMapSpec(1, 1, f, f), [1, 2], FAST)
    assert [r.certified for r in rows] == [0.0, 0.0]
    assert all(r.ok() for r in rows)


# witness ------------------------------------------------------------------------------------


def test_shell_geometry_is_exact():
    assert shell_half_edge(0) == Fraction(1, 2)
    assert shell_distance(2, 5) == 14
    assert shell_distance(2, 5) >= 2**3
    for L in range(11):
        for Lp in range(11):
            if L != Lp:
                assert shell_distance(L, Lp) >= Fraction(2) ** (max(L, Lp) - 2)


@pytest.fixture(scope="module")
def witness():
    return build_witness(BoundaryMapSpec.canonical(1, 1), 6, points_per_edge=4, cross_pairs=2000, within_pairs=50)


def test_witness_checks(witness):
    assert witness.checks["shell_separation_ok"]
    assert witness.checks["cross_ok"]
    assert witness.checks["within_ok"]
    assert witness.checks["cross_max_ratio"] <= 8 * witness.c


def test_witness_constant_bounds_distances(witness):
    spec = witness.spec
    origin = JetPoint.origin(spec.shape)
    values = eval_F_coords(spec, witness.samples)
    lower = [coordinate_lower_bound(origin, JetPoint(spec.shape, v)) for v in values]
    assert witness.c >= max(lower) - 1e-12
    assert np.all(witness.dc_to_origin >= np.array(lower) - 1e-12)


def test_witness_shells(witness):
    for L in witness.levels:
        pts = witness.shell_points(L)
        assert np.allclose(np.max(np.abs(pts), axis=1), float(shell_half_edge(L)))
    # the map is the dilated F
    v3 = witness.shell_values(3)
    assert v3.shape == (len(witness.samples), 3)
    np.testing.assert_allclose(v3[:, 0], 8 * witness.samples[:, 0])


def test_witness_json(witness):
    data = json.loads(witness.to_json())
    assert data["integral_gap"] == "-1/30"
    assert len(data["shells"]) == 7
    assert data["c"] == witness.c


def test_witness_rejects_zero_levels():
    with pytest.raises(ValueError):
        build_witness(BoundaryMapSpec.canonical(1, 1), 0)


# contradiction level ---------------------------------------------------------------------------


def test_contradiction_level_examples(witness):
    assert witness_contradiction_curve(witness, 1.0) == 5
    # 2^L > 30 first at L = 5
    assert 2**4 < 30 < 2**5
    with pytest.raises(ValueError):
        contradiction_level(1, 1, Fraction(-1, 30), 0.0)
    with pytest.raises(ValueError):
        contradiction_level(1, 1, 0, 1.0)


def _float_level(n, k, gap, lam):
    # solve lam^{n+1} < 2^{Lk} |gap| for the least integer L >= 0
    thr = ((n + 1) * math.log2(lam) - math.log2(abs(gap))) / k
    return max(0, math.floor(thr) + 1)


@given(st.floats(0.01, 1e6), st.sampled_from([(1, 1), (1, 2), (2, 1), (2, 2)]))
def test_contradiction_level_matches_closed_form(lam, nk):
    n, k = nk
    gap = BoundaryMapSpec.canonical(n, k).integral_gap
    got = contradiction_level(n, k, gap, lam)
    thr = ((n + 1) * math.log2(lam) - math.log2(abs(float(gap)))) / k
    if abs(thr - round(thr)) > 1e-9:
        assert got == _float_level(n, k, float(gap), lam)
    # defining inequality, exactly
    g = abs(gap)
    assert Fraction(lam) ** (n + 1) < Fraction(2) ** (got * k) * g
    if got > 0:
        assert not Fraction(lam) ** (n + 1) < Fraction(2) ** ((got - 1) * k) * g


def test_contradiction_level_is_monotone_and_grows_logarithmically():
    gap = Fraction(-1, 30)
    assert contradiction_level(1, 1, gap, 0.1) == 0
    levels = [contradiction_level(1, 1, gap, lam) for lam in (0.1, 1, 2, 4, 10, 100, 1000)]
    assert levels == sorted(levels)
    big = [contradiction_level(1, 1, gap, 2.0**e) for e in (20, 40)]
    assert (big[1] - big[0]) == 2 * 20


# embedding ----------------------------------------------------------------------------------------


def test_embedding_round_trip_and_origin():
    assert embed_E(1, 2, [0, 0]) == JetPoint.origin(JetShape(2, 1))
    v = np.array([0.3, -1.2, 2.0])
    np.testing.assert_array_equal(project_E(embed_E(2, 2, v)), v)
    with pytest.raises(ValueError):
        embed_E(1, 2, [1.0, 2.0, 3.0])


def test_embedding_dimension_check():
    check_embedding_dims(1, 2, 1)
    check_embedding_dims(2, 2, 2)
    with pytest.raises(ValueError):
        check_embedding_dims(1, 2, 2)


@pytest.mark.parametrize("seed", range(3))
def test_embedding_is_isometric(seed):
    rng = np.random.default_rng(seed)
    v, w = rng.normal(size=2), rng.normal(size=2)
    p, q = embed_E(1, 2, v), embed_E(1, 2, w)
    d = np.linalg.norm(v - w)
    opts = PathOptions(steps=32, starts=4)
    assert coordinate_lower_bound(p, q) == pytest.approx(d, rel=1e-15)
    assert r0_upper_bound(p, q, opts) == pytest.approx(d, rel=0.01)
    assert cc_upper_bound(p, q, opts) == pytest.approx(d, rel=0.01)


def test_lip_dc_upper_dominates_prolonged_segments():
    spec = BoundaryMapSpec.canonical(1, 1)
    S = lip_dc_upper(spec)
    # slope factor of j^1(f1) is sqrt(1 + f1''^2) with max |f1''| = 2 at the ends
    assert S >= math.sqrt(5.0)
