import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treebolic.heights import LogHeight
from treebolic.htspace import (
    LINE,
    R1,
    R2,
    AmbiguousRay,
    BaseRay,
    HTPoint,
    TMap,
    TreePointT,
    TSpace,
    busemann_height,
    coarse_heightify_T,
    d_function,
    extend_to_T,
    extension_bound,
    fiber_distance,
    h2_distance,
    horocyclic_extension,
    ht_distance_bounds,
    measure_constants,
    point_on_geodesic,
    qi_certificate,
    swap_halves,
    t_distance_units,
)
from treebolic.trees import IsotropicTree, c1_embedding, c2_rough_isometry, distortion_report, identity_map

SPACE = TSpace(2, Fraction(2))


def arccosh_distance(a, b):
    """Oracle: the textbook arccosh form."""
    (x1, y1), (x2, y2) = a, b
    return math.acosh(1 + ((x1 - x2) ** 2 + (y1 - y2) ** 2) / (2 * y1 * y2))


def test_h2_examples():
    assert h2_distance((0.3, 2.0), (0.3, 2.0)) == 0
    assert h2_distance((0, 1), (0, math.e)) == pytest.approx(1, abs=1e-12)
    assert h2_distance((0, 1), (3, 1)) == pytest.approx(math.acosh(5.5), abs=1e-12)
    with pytest.raises(ValueError):
        h2_distance((0, 0), (0, 1))


@given(st.floats(-50, 50), st.floats(0.01, 50), st.floats(-50, 50), st.floats(0.01, 50))
def test_h2_matches_arccosh_oracle(x1, y1, x2, y2):
    # the arccosh form loses about half the digits near zero distance
    assert h2_distance((x1, y1), (x2, y2)) == pytest.approx(arccosh_distance((x1, y1), (x2, y2)), rel=1e-9, abs=1e-7)


def test_busemann_examples():
    ray = BaseRay()
    assert busemann_height(TreePointT(R1), ray, 2) == LogHeight.ZERO
    assert busemann_height(TreePointT(R1, (0, 0, 0)), ray, 2) == LogHeight(-3, 2)
    # meets the ray after one edge, then goes down two more: d = 3, overlap 1
    assert busemann_height(TreePointT(R1, (0, 1, 1)), ray, 2) == LogHeight(1, 2)
    assert busemann_height(TreePointT(R2, (1,)), ray, 2) == LogHeight(2, 2)
    assert busemann_height(TreePointT(LINE, (), Fraction(1, 4)), ray, 2) == LogHeight(Fraction(1, 4), 2)


def test_busemann_on_truncated_ray():
    ray = BaseRay(R1, (0, 1), zeros_after=False)
    assert ray.height_units(TreePointT(R1, (0, 1))) == -2
    # leaves the segment after one edge, two more edges down: 3 - 2*1
    assert ray.height_units(TreePointT(R1, (0, 0, 1))) == 1
    with pytest.raises(AmbiguousRay):
        ray.height_units(TreePointT(R1, (0, 1, 0)))


def test_tree_distances():
    a, b = TreePointT(R1, (0, 1)), TreePointT(R2, (1,), Fraction(1, 2))
    assert t_distance_units(a, b) == 2 + 1 + Fraction(1, 2)
    assert t_distance_units(TreePointT(LINE, (), Fraction(1, 3)), TreePointT(R2)) == Fraction(2, 3)
    assert t_distance_units(TreePointT(R1, (0, 1)), TreePointT(R1, (0, 1), Fraction(1, 4))) == Fraction(3, 4)
    assert t_distance_units(TreePointT(R1, (0, 1)), TreePointT(R1, (0, 0))) == 2


def test_geodesic_midpoint():
    a, b = TreePointT(R1, (1, 0)), TreePointT(R2, (1, 1))
    mid = point_on_geodesic(a, b, Fraction(1, 2))
    assert mid == TreePointT(LINE, (), Fraction(1, 2))
    assert point_on_geodesic(a, TreePointT(R2, (1,)), Fraction(1, 2)) == TreePointT(R1)
    assert point_on_geodesic(a, TreePointT(R1, (1, 1)), Fraction(1, 4)) == TreePointT(R1, (1, 0), Fraction(1, 2))
    assert point_on_geodesic(a, b, 0) == a and point_on_geodesic(a, b, 1) == b


def test_d_function_examples():
    x = HTPoint(TreePointT(R2), 1.0)
    assert d_function(SPACE, x, HTPoint(TreePointT(R1, (1,)), 1.0)) == 0
    # same fibre over b2 (height log 2)
    y = HTPoint(TreePointT(R2), 3.5)
    expect = math.acosh(1 + 2.5**2 / (2 * math.exp(2 * math.log(2))))
    assert d_function(SPACE, x, y) == pytest.approx(expect, abs=1e-12)
    # both at height 0, depth gap 2
    a, b = HTPoint(TreePointT(R1), 0.0), HTPoint(TreePointT(R1, (0, 1)), 2.0)
    assert SPACE.height(b.tree_point) == LogHeight.ZERO
    assert d_function(SPACE, a, b) == pytest.approx(math.acosh(3), abs=1e-12)


def test_bounds_examples():
    x = HTPoint(TreePointT(R1, (0, 1)), 0.5)
    same = ht_distance_bounds(SPACE, x, x)
    assert same.lower == same.upper == 0
    y = HTPoint(TreePointT(R1, (0, 1)), -2.0)
    b = ht_distance_bounds(SPACE, x, y)
    assert b.lower == b.upper == pytest.approx(arccosh_distance((0.5, 1.0), (-2.0, 1.0)), abs=1e-12)


def _random_ht(rng, depth=4):
    pts = SPACE.domain(depth)
    return HTPoint(rng.choice(pts), rng.uniform(-5, 5))


@given(st.integers(0, 10**6))
@settings(max_examples=100)
def test_bound_sandwich_and_symmetry(seed):
    rng = random.Random(seed)
    x, y = _random_ht(rng), _random_ht(rng)
    b = ht_distance_bounds(SPACE, x, y)
    d_t = float(SPACE.distance(x.tree_point, y.tree_point))
    D = d_function(SPACE, x, y)
    assert 0 <= b.lower <= b.upper <= 2 * b.lower + 1e-12
    assert abs(d_function(SPACE, y, x) - D) <= 1e-12
    if d_t == 0 or D == 0:
        assert b.lower == pytest.approx(b.upper, abs=1e-12)


@given(st.floats(0.1, 10), st.floats(-5, 5), st.floats(0.01, 3))
def test_fiber_distance_decreasing_in_height(dz, h, step):
    assert fiber_distance(dz, h + step) < fiber_distance(dz, h)
    assert fiber_distance(dz, h) == pytest.approx(arccosh_distance((0, math.exp(h)), (dz, math.exp(h))), rel=1e-9)


def test_identity_extension_and_certificate():
    f = identity_map(IsotropicTree.regular(2, 2, 6))
    F = extend_to_T(f)
    for x in F.source.domain(4):
        assert F(x) == x
    G = coarse_heightify_T(F, 6)
    cert = qi_certificate(horocyclic_extension(G), 300, 4, seed=3)
    assert cert.additive == 0 and cert.height_deviation == 0
    assert cert.ok and cert.worst_slack_i >= 0 and cert.worst_slack_ii >= 0


@pytest.mark.parametrize("build", [lambda: c2_rough_isometry(2, 2, 4, 4, 7), lambda: c1_embedding(2, 4, 2, 2, 7)])
def test_extension_constant_within_bound(build):
    f = build()
    F = extend_to_T(f)
    A = distortion_report(f, surjectivity=False).additive_constant
    measured = measure_constants(F, F.source.domain(5, midpoints=False))
    assert measured.additive <= extension_bound(f, A)


def test_heightified_deviation_within_proof_bound():
    f = c2_rough_isometry(2, 2, 4, 4, 7)
    F = extend_to_T(f)
    domain = F.source.domain(5)
    A_T = measure_constants(F, domain).additive
    G = coarse_heightify_T(F, 7)
    assert measure_constants(G, domain).height_deviation <= A_T + G.target.edge


def test_swapped_halves_give_same_deviation():
    F = extend_to_T(c2_rough_isometry(2, 2, 4, 4, 7))
    S = TMap(F.source, F.target, lambda x: swap_halves(F(x)))
    domain = F.source.domain(4)
    a = measure_constants(coarse_heightify_T(F, 7), domain)
    b = measure_constants(coarse_heightify_T(S, 7), domain)
    assert (a.additive, a.height_deviation) == (b.additive, b.height_deviation)
    assert coarse_heightify_T(S, 7).target.ray.half == R2


def test_tracking_rejects_collapsed_ray():
    t = IsotropicTree.regular(2, 2, 4)
    from treebolic.trees import TreeMap

    collapse = TreeMap(t, t, {w: t.point(()) for w in t.vertices()})
    with pytest.raises(AmbiguousRay):
        coarse_heightify_T(extend_to_T(collapse), 4)


def test_horocyclic_contract():
    F = coarse_heightify_T(extend_to_T(c1_embedding(2, 4, 2, 2, 6)), 6)
    fhat = horocyclic_extension(F)
    rng = random.Random(11)
    for _ in range(1000):
        x = _random_ht(rng)
        y = fhat(x)
        assert y.depth == x.depth
        assert y.tree_point == F(x.tree_point)


@pytest.mark.parametrize("build", [lambda: c2_rough_isometry(2, 2, 4, 4, 7), lambda: c1_embedding(2, 4, 2, 2, 7)])
def test_certificates_have_no_witnesses(build):
    F = coarse_heightify_T(extend_to_T(build()), 7)
    cert = qi_certificate(horocyclic_extension(F), 1000, 5, seed=0)
    assert cert.ok
    assert cert.max_D_deviation <= 2 * cert.height_deviation + 1e-9
    out = cert.to_json()
    assert {"pairs_checked", "max_D_deviation", "worst_slack_i", "worst_slack_ii", "witnesses"} <= set(out)


def test_certificate_reproducible():
    F = coarse_heightify_T(extend_to_T(c2_rough_isometry(2, 2, 4, 4, 6)), 6)
    a = qi_certificate(horocyclic_extension(F), 200, 3, seed=5).to_json()
    b = qi_certificate(horocyclic_extension(F), 200, 3, seed=5).to_json()
    assert a == b


def test_certificate_reports_witnesses_for_bad_map():
    # fold R1 onto the base ray: heights of off-ray points flip sign
    t = IsotropicTree.regular(2, 2, 5)
    F = extend_to_T(identity_map(t))
    bad = TMap(F.source, F.target, lambda x: TreePointT(R1, (0,) * len(x.word), x.t) if x.half == R1 else x)
    bad = coarse_heightify_T(bad, 5)
    domain = F.source.domain(3)
    # hand the certificate deliberately small constants
    from treebolic.htspace import TMapConstants

    cert = qi_certificate(horocyclic_extension(bad), 200, 3, seed=1, constants=TMapConstants(LogHeight.ZERO, LogHeight.ZERO, len(domain)))
    assert not cert.ok and cert.witnesses


def test_point_validation():
    with pytest.raises(ValueError):
        TreePointT(LINE, (), Fraction(0))
    with pytest.raises(ValueError):
        TreePointT(R1, (0,), Fraction(3, 2))
    with pytest.raises(ValueError):
        TreePointT("R3")
