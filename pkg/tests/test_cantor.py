import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treebolic.cantor import (
    Clone,
    FiniteWord,
    QWindow,
    WordMap,
    bilipschitz_report,
    boundary_functor,
    cantor_distance,
    minimal_clone,
    random_order_preserving_map,
    random_word_map,
    rho,
    round_trip_bound_check,
    tree_functor,
)
from treebolic.heights import LogHeight
from treebolic.trees import (
    IsotropicTree,
    c2_rough_isometry,
    distortion_report,
    heightify,
    identity_map,
    power_rough_isometry,
    tree_distance,
)


def brute_ratios(g):
    """Oracle: ratios rho'(gx, gy) / rho(x, y) over every unordered pair."""
    ratios, collisions = [], 0
    for x, y in itertools.combinations(sorted(g.table), 2):
        gx, gy = g.table[x], g.table[y]
        if gx == gy:
            collisions += 1
            continue
        n = next(i for i in range(len(x)) if x[i] != y[i])
        m = next(i for i in range(len(gx)) if gx[i] != gy[i])
        ratios.append(Fraction(g.q_prime) ** -m / Fraction(g.q) ** -n)
    return ratios, collisions


def test_distance_examples():
    a = FiniteWord((0, 1, 1), 2, Fraction(3))
    b = FiniteWord((1, 1, 1), 2, Fraction(3))
    c = FiniteWord((0, 1, 0), 2, Fraction(3))
    assert cantor_distance(a, b).value == 1
    assert cantor_distance(a, c).value == Fraction(1, 9)
    same = cantor_distance(a, a)
    assert same.below_resolution and same.value == Fraction(1, 27)


def test_word_validation():
    with pytest.raises(ValueError):
        FiniteWord((), 2, Fraction(2))
    with pytest.raises(ValueError):
        FiniteWord((2,), 2, Fraction(2))


def test_minimal_clone_examples():
    assert minimal_clone([(0, 1, 1)]).prefix == (0, 1, 1)
    assert minimal_clone([(0, 0), (0, 1)]).prefix == (0,)
    assert minimal_clone([(0, 1), (1, 0)]).prefix == ()
    assert Clone((0, 1), Fraction(2)).diameter == Fraction(1, 4)
    assert (0, 1, 1) in Clone((0, 1), Fraction(2))


def test_qwindow_leading_zeros():
    x = QWindow(-2, (1, 0, 1), 2, Fraction(2))
    y = QWindow(0, (1, 1), 2, Fraction(2))
    assert x.letter(-5) == 0
    # first disagreement at index -2
    assert x.distance(y).value == Fraction(2) ** 3


def test_identity_boundary_is_identity():
    t = IsotropicTree.regular(3, 2, 4)
    g = boundary_functor(identity_map(t), 4)
    assert all(g(w) == w for w in g.words())
    assert bilipschitz_report(g).lambda_upper == 1
    assert bilipschitz_report(g).lambda_lower == 1


def test_power_map_boundary_regroups_digits():
    g = boundary_functor(power_rough_isometry(2, 2, 2, 6), 6)
    assert g((1, 0, 1, 1, 0, 0)) == (2, 3, 0)
    assert g.target_length == 3


def test_boundary_bilipschitz_bound():
    f = power_rough_isometry(2, 2, 2, 6)
    r = distortion_report(f)
    lam = bilipschitz_report(boundary_functor(f, 6))
    bound = (r.height_deviation * 3 + r.additive_constant)
    assert LogHeight.of_rational(lam.lambda_upper) <= bound


def test_prefix_distortion_bound_on_word_pairs():
    f = c2_rough_isometry(2, 2, 4, 4, 6)
    r = distortion_report(f)
    g = boundary_functor(f, 6)
    slack = r.height_deviation * 3 + r.additive_constant
    for x, y in itertools.combinations(g.words(), 2):
        n = next(i for i in range(6) if x[i] != y[i])
        m = next((i for i in range(3) if g(x)[i] != g(y)[i]), 3)
        diff = LogHeight(n, 2) - LogHeight(m, 4)
        assert abs(diff) <= slack


@pytest.mark.parametrize("build", [
    lambda: c2_rough_isometry(2, 2, 4, 4, 6),
    lambda: power_rough_isometry(3, 2, 2, 4),
    lambda: identity_map(IsotropicTree.regular(2, 3, 5)),
])
def test_bilipschitz_report_matches_oracle(build):
    g = boundary_functor(build(), build().source.depth)
    ratios, collisions = brute_ratios(g)
    rep = bilipschitz_report(g)
    assert collisions == rep.collisions == 0
    assert rep.lambda_upper == max(ratios)
    assert rep.lambda_lower == min(ratios)


def test_non_injective_map_flagged():
    g = WordMap(2, Fraction(2), 2, Fraction(2), 2, 1, {(0, 0): (0,), (0, 1): (0,), (1, 0): (1,), (1, 1): (1,)})
    rep = bilipschitz_report(g)
    assert rep.collisions == 2 and rep.lambda_lower == 0 and not rep.bilipschitz


def test_tree_functor_examples():
    ident = WordMap(2, Fraction(2), 2, Fraction(2), 3, 3, {w: w for w in itertools.product(range(2), repeat=3)})
    f = tree_functor(ident)
    assert all(f.images[w].word == w for w in f.images)
    const = WordMap(2, Fraction(2), 3, Fraction(3), 2, 2, {w: (1, 2) for w in itertools.product(range(2), repeat=2)})
    f = tree_functor(const)
    assert all(f.images[w].word == (1, 2) for w in f.images)
    assert f.is_order_preserving()


def test_delta_recovers_c2_map_up_to_bounded_distance():
    f = c2_rough_isometry(2, 2, 4, 4, 6)
    back = tree_functor(boundary_functor(f, 6))
    B = distortion_report(f).height_deviation
    assert all(tree_distance(f.target, back.images[w], f.images[w]) <= B * 2 for w in f.images)


def test_round_trip_bound_for_heightified_map():
    h = heightify(c2_rough_isometry(2, 2, 4, 4, 11), 6)
    res = round_trip_bound_check(h, 6)
    assert res["violations"] == []
    assert res["B"] == LogHeight(1, 2)


def test_boundary_needs_margin():
    h = heightify(c2_rough_isometry(2, 2, 4, 4, 8), 4)
    with pytest.raises(ValueError):
        boundary_functor(h, 6)


def test_clone_vertex_bijection():
    t = IsotropicTree.regular(3, 2, 4)
    for v in t.vertices():
        words = [v + tail for tail in itertools.product(range(3), repeat=4 - len(v))]
        assert minimal_clone(words).prefix == v


def test_serialization():
    g = boundary_functor(c2_rough_isometry(2, 2, 4, 4, 4), 4)
    text = g.serialize()
    assert text.splitlines()[0] == "0000 -> 00"
    assert WordMap.deserialize(text, 2, 2, 4, 4) == g


@given(st.integers(0, 10**6), st.integers(2, 4))
@settings(max_examples=40, deadline=None)
def test_ultrametric(seed, p):
    rng = random.Random(seed)
    x, y, z = (tuple(rng.randrange(p) for _ in range(6)) for _ in range(3))
    assert rho(3, x, z) <= max(rho(3, x, y), rho(3, y, z))
    assert rho(3, x, y) == rho(3, y, x)


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_round_trip_exact_random(seed):
    rng = random.Random(seed)
    g = random_word_map(2, 2, 3, 3, 4, 3, rng)
    assert boundary_functor(tree_functor(g), 4) == g


@given(st.integers(0, 10**6))
@settings(max_examples=15, deadline=None)
def test_descendant_distance_law(seed):
    rng = random.Random(seed)
    f = random_order_preserving_map(2, 2, 2, 3, 5, rng)
    g = boundary_functor(f, 5)
    delta = tree_functor(g)
    for v in delta.images:
        for k in range(len(v)):
            u = v[:k]
            w, w2 = delta.images[u].word, delta.images[v].word
            diam = Fraction(3) ** -len(w) / Fraction(3) ** -len(w2)
            assert tree_distance(delta.target, delta.images[u], delta.images[v]) == LogHeight(1, diam)


@given(st.integers(0, 10**6))
@settings(max_examples=15, deadline=None)
def test_random_order_preserving_round_trip(seed):
    f = random_order_preserving_map(2, 2, 3, 2, 5, random.Random(seed))
    g = boundary_functor(f, 5)
    assert boundary_functor(tree_functor(g), 5) == g
