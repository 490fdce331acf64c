import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coarsegeo.cayley import VertexSet, build_ball
from coarsegeo.groups import GroupSpec, make_group
from coarsegeo.invariants import (NotTwoSeparating, RangeTooShort, almost_invariant_set, coarse_zero_connected,
                                  coend_lower_bound, commensurizer_probe, distortion_profile, growth_series,
                                  interlaced_probe, pattern_growth, polynomial_growth_verdict, profile_from_pairs,
                                  subgroup_growth, trend_verdict, weakly_dominates, write_coends_csv,
                                  write_growth_csv)
from coarsegeo.patterns import SubgroupOrbit, realize, vec
from coarsegeo.separation import SHALLOW, complement_components, estimate_moduli

from conftest import F2, F2xZ, Z1, Z2


# -- coends

def test_coends_z2_line():
    est = coend_lower_bound(Z2, ["x"], 4, 64)
    assert [c for _, c in est.samples] == [2] * 5
    assert est.lower_bound == 2 and not est.unbounded_flag


def test_coends_free_axis_unbounded():
    est = coend_lower_bound(F2, ["a"], 3, 9)
    counts = [c for _, c in est.samples]
    assert all(x < y for x, y in zip(counts, counts[1:]))
    assert est.unbounded_flag


def test_coends_finite_index():
    est = coend_lower_bound(Z2, ["x", "y"], 2, 10)
    assert est.lower_bound == 0


def test_coends_csv(tmp_path):
    p = tmp_path / "coends.csv"
    write_coends_csv(p, coend_lower_bound(Z2, ["x"], 1, 16))
    assert p.read_text().splitlines() == ["r,deep_count", "0,2", "1,2"]


# -- growth

def test_growth_examples(tmp_path):
    assert growth_series(Z2, 3)[3] == 25
    assert growth_series(F2, 2)[2] == 17
    ball = build_ball(Z2, 8)
    single = pattern_growth(ball, VertexSet.from_ids(ball, [0]))
    assert set(single.values.tolist()) == {1}
    p = tmp_path / "g.csv"
    write_growth_csv(p, growth_series(F2, 2))
    assert p.read_text().splitlines() == ["n,beta", "0,1", "1,5", "2,17"]


@pytest.mark.parametrize("spec", [Z2, F2, F2xZ, GroupSpec.surface(2), GroupSpec.free_product_of_cyclics([2, 3])])
def test_growth_strictly_increasing(spec):
    v = growth_series(spec, 4).values
    assert v[0] == 1 and np.all(np.diff(v) > 0)


def test_pattern_growth_of_diagonal():
    ball = build_ball(Z2, 40)
    pg = pattern_growth(ball, realize(SubgroupOrbit([vec(1, 1)]), ball), n_max=20)
    assert pg.values.tolist() == [2 * (n // 2) + 1 for n in range(21)]


def test_subgroup_growth_dominated_by_orbit_growth():
    beta_h = subgroup_growth(Z2, [vec(1, 1)], 20)
    assert beta_h.values.tolist() == [2 * n + 1 for n in range(21)]
    ball = build_ball(Z2, 120)
    orbit = pattern_growth(ball, realize(SubgroupOrbit([vec(1, 1)]), ball), n_max=120)
    assert weakly_dominates(beta_h, orbit, 4, 4, range(21)).holds


# -- domination

def test_domination_examples():
    n = np.arange(0, 401)
    dom = weakly_dominates(n ** 2, n ** 3, 8, 8, range(51))
    assert dom.holds and dom.witness == (1, 0)
    same = weakly_dominates(n ** 2, n ** 2, 8, 8, range(51))
    assert same.witness == (1, 0)


def test_free_growth_not_dominated_by_plane():
    f2 = lambda k: 2 * 3 ** k - 1  # noqa: E731
    z2 = lambda k: 2 * k * k + 2 * k + 1  # noqa: E731
    dom = weakly_dominates(f2, z2, 8, 8, range(16))
    assert not dom.holds
    assert len(dom.refutation) == 8 * 9


def test_range_too_short():
    with pytest.raises(RangeTooShort):
        weakly_dominates(np.arange(5), np.arange(100), 2, 2, range(10))
    # beta' must cover Lambda * n + C for every grid point tried before a witness
    with pytest.raises(RangeTooShort):
        weakly_dominates(np.arange(10) ** 2, np.arange(12), 2, 2, range(10))


def test_polynomial_label():
    assert polynomial_growth_verdict(growth_series(Z2, 20))["polynomial"]
    assert not polynomial_growth_verdict(growth_series(F2, 9))["polynomial"]


# -- coarse connectedness

def test_coarse_zero_connected():
    ball = build_ball(Z2, 40)
    assert coarse_zero_connected(ball, realize(SubgroupOrbit([vec(1, 1)]), ball), 3) == 1
    assert coarse_zero_connected(ball, realize(SubgroupOrbit(["x"]), ball), 3) == 0
    squares = VertexSet.from_keys(ball, [(n * n, 0) for n in range(7)])
    assert coarse_zero_connected(ball, squares, 3) is None


# -- distortion

@pytest.mark.parametrize("spec,gens,slope", [(Z2, [vec(1, 1)], 2.0), (F2, ["a"], 1.0), (Z2, [vec(2, 0)], 2.0)])
def test_distortion_slopes(spec, gens, slope):
    prof = distortion_profile(spec, gens, 20, 1000, seed=0)
    assert abs(prof.upper[0] - slope) <= 0.05
    assert abs(prof.lower[0] - slope) <= 0.05
    assert np.all(prof.min_ambient <= prof.max_ambient)
    assert np.all(np.diff(prof.min_ambient) >= 0)
    L = max(make_group(spec).length(make_group(spec).element(g if not isinstance(g, tuple) else {"vector": g[1:]}))
            for g in gens)
    assert np.all(prof.max_ambient <= L * prof.r)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 30), st.integers(0, 60)), min_size=2, max_size=60))
def test_envelopes_monotone(pairs):
    prof = profile_from_pairs(np.array(pairs))
    assert np.all(np.diff(prof.phi) >= 0) and np.all(np.diff(prof.Phi) >= 0)
    assert np.all(prof.phi <= prof.min_ambient) and np.all(prof.Phi >= prof.max_ambient)


def test_distortion_is_seeded():
    a = distortion_profile(F2, ["ab", "ba"], 10, 300, seed=4).to_dict()
    b = distortion_profile(F2, ["ab", "ba"], 10, 300, seed=4).to_dict()
    assert a == b


# -- commensurizer

def test_commensurizer():
    assert commensurizer_probe(Z2, ["x"], "x^5", [20, 30, 40]).values == [0, 0, 0]
    p = commensurizer_probe(Z2, ["x"], "y^3", [20, 30, 40])
    assert p.values == [3, 3, 3] and p.verdict == "Stable"
    q = commensurizer_probe(F2, ["a"], "b", [6, 8, 10])
    assert q.verdict == "Growing"


def test_trend_verdict():
    assert trend_verdict([3, 3, 3]) == "Stable"
    assert trend_verdict([1, 2, 3]) == "Growing"
    assert trend_verdict([1, 2]) == "Inconclusive"
    assert trend_verdict([3, 1, 2]) == "Inconclusive"


# -- interlaced cosets

def test_interlaced():
    z = interlaced_probe(Z2, ["x"], 1, 20, 4)
    assert z.deep_count == 2 and z.edges == [] and z.verdict == "Not Interlaced"
    f = interlaced_probe(F2, ["a"], 1, 8, 4)
    assert f.graph_components > 1 and f.verdict == "Not Interlaced"


def test_interlaced_vacuous():
    # the complement of N_1 of a point in Z^2 has one Deep component
    p = interlaced_probe(Z2, [], 1, 20, 2)
    assert p.deep_count == 1 and p.verdict == "Interlaced"


# -- almost-invariant sets

def test_almost_invariant_z2():
    ais = almost_invariant_set(Z2, ["x"], 1, "y^5", 0, 24)
    ball = ais.B.ball
    inside = {k for k, m in zip(ball.keys, ais.B.members & ais.region) if m}
    region = {k for k, m in zip(ball.keys, ais.region) if m}
    assert inside == {k for k in region if k[1] >= 2}
    assert ais.coboundary_radius <= 1 <= ais.k + 1
    assert ais.invariant


def test_almost_invariant_neighborhood_variant():
    ais = almost_invariant_set(Z2, ["x"], 1, "y^5", 0, 24, member_test="neighborhood")
    ball = ais.B.ball
    inside = {k for k, m in zip(ball.keys, ais.B.members & ais.region) if m}
    assert inside == {k for k, m in zip(ball.keys, ais.region) if m and k[1] >= 3}
    assert ais.coboundary_radius == 2


def test_almost_invariant_product():
    ais = almost_invariant_set(F2xZ, ["z"], 0, "a", 0, (6, 8))
    ball = ais.B.ball
    for key, m, reg in zip(ball.keys, ais.B.members, ais.region):
        if reg:
            assert m == (len(key[0]) > 0 and key[0][0] == 1)
    assert ais.invariant


def test_almost_invariant_needs_two_deep():
    with pytest.raises(NotTwoSeparating):
        almost_invariant_set(Z2, [], 1, 0, 0, 12)


# -- finite-scale moduli checks

@pytest.mark.parametrize("spec,gens,radii", [(Z2, ["x"], [24, 32]), (Z2, [vec(1, 1)], [24, 32]),
                                             (F2xZ, ["z"], [(5, 8), (6, 9)]), (F2, ["a"], [6, 8])])
def test_shallow_depth_bounded(spec, gens, radii):
    for r in range(0, 5):
        m1 = []
        for R in radii:
            ball = build_ball(spec, factor_radii=R) if isinstance(R, tuple) else build_ball(spec, R)
            H = realize(SubgroupOrbit(gens), ball)
            a = complement_components(ball, H, r)
            shallow = [c.depth for c in a.components if c.label == SHALLOW]
            m1.append(max(shallow, default=0))
        assert m1[0] == m1[1]


def test_deep_condition_for_cyclic_subgroups():
    assert not estimate_moduli(F2xZ, SubgroupOrbit(["z"]), [(5, 10), (7, 12)], [0]).failed
    assert estimate_moduli(F2, SubgroupOrbit(["a"]), [6, 8], [0]).failed
