import math

import pytest

from coarsegeo.cayley import VertexSet, build_ball
from coarsegeo.detection import (DEEP_VIOLATED, DETECTED, NOT_3_SEPARATING, PRECONDITION_FAILURES, cluster_translates,
                                 collect_translates, detect_subgroup, inclusion_radius, verify_detection)
from coarsegeo.groups import make_group
from coarsegeo.patterns import DigitizedLine, Fiber, GeodesicWordLine, SubgroupOrbit, realize, vec

from conftest import F2, F2xZ, Z2


def _family(spec, pattern, k, R):
    ball = build_ball(spec, factor_radii=R) if isinstance(R, tuple) else build_ball(spec, R)
    return ball, collect_translates(ball, realize(pattern, ball), k)


def test_translates_of_axis():
    ball, fam = _family(Z2, SubgroupOrbit(["x"]), 1, 24)
    shifts = {t.g[1] for t in fam.members}
    assert len(fam.members) == 3 and shifts == {-1, 0, 1}
    assert fam.members[0].g == make_group(Z2).identity


def test_translates_of_fiber():
    ball, fam = _family(F2xZ, Fiber(2), 1, (5, 10))
    bases = sorted(t.g[0] for t in fam.members)
    assert bases == sorted([(), (1,), (-1,), (2,), (-2,)])


def test_translates_k0_contains_y():
    ball, fam = _family(Z2, SubgroupOrbit(["x"]), 0, 24)
    assert len(fam.members) >= 1 and fam.members[0].g == (0, 0)


def test_clusters_axis_and_fiber():
    for spec, pattern, R in [(Z2, SubgroupOrbit(["x"]), 24), (F2xZ, Fiber(2), (5, 10))]:
        ball, fam = _family(spec, pattern, 1, R)
        cl = cluster_translates(fam, 4)
        assert len(cl.clusters) == 1 and cl.mu == 2


def test_cluster_of_one():
    ball, fam = _family(Z2, SubgroupOrbit(["x"]), 0, 24)
    cl = cluster_translates(fam, 4)
    assert len(cl.clusters) == 1 and cl.mu == 1


def test_inclusion_radius():
    r1 = inclusion_radius(lambda r: 2 * r + 2)
    # m0(1) = 4, m0(5) = 12, so r1(1) = 2 * 12 + 4
    assert r1(1) == 28
    assert inclusion_radius(lambda r: None)(3) is None


def test_verify_examples():
    ball = build_ball(Z2, 30)
    diag = realize(SubgroupOrbit([vec(1, 1)]), ball)
    assert verify_detection(ball, diag, [(1, 1)]).residual == 0
    fb = build_ball(F2xZ, factor_radii=(4, 8))
    fiber = realize(Fiber(2), fb)
    assert verify_detection(fb, fiber, ["z"]).residual == 0


def _golden_residual(R):
    ball = build_ball(Z2, R)
    v = verify_detection(ball, realize(DigitizedLine(tag="golden"), ball), [(1, 1)], guard=R // 10)
    r = v.residual
    return r if isinstance(r, int) else r.lower_bound


def test_verify_golden_line_grows():
    a, b = _golden_residual(200), _golden_residual(400)
    assert a >= 5 and b > a


@pytest.fixture(scope="module")
def flagship():
    return detect_subgroup(F2xZ, Fiber(2), 1, (5, 10))


def test_flagship_detects_center(flagship):
    cert = flagship
    assert cert.status == DETECTED
    group = make_group(F2xZ)
    assert cert.generators
    for key in cert.generator_keys:
        assert key[0] == () and key != group.identity
    assert isinstance(cert.residual, int) and cert.residual <= 1
    assert cert.residual <= cert.residual_bound == max(cert.R_rep + 1, 2 * cert.mu)
    assert cert.stability["count_stable"] and cert.stability["mu_stable"]
    assert cert.stability["cluster_count"] == cert.cluster_count


def test_offset_fiber_is_pretranslated():
    cert = detect_subgroup(F2xZ, Fiber(2, "a"), 1, (5, 10))
    assert cert.status == DETECTED and cert.shift != "e"
    assert all(k[0] == () for k in cert.generator_keys)
    assert cert.residual <= cert.residual_bound


def test_axis_not_three_separating():
    cert = detect_subgroup(Z2, SubgroupOrbit(["x"]), 1, 32)
    assert cert.status == NOT_3_SEPARATING
    assert cert.preconditions["separating"]["stable_count"] == 2


def test_thue_morse_violates_deep_condition():
    cert = detect_subgroup(F2, GeodesicWordLine(tag="thue_morse"), 1, 6)
    assert cert.status == DEEP_VIOLATED and cert.status in PRECONDITION_FAILURES
    m0 = [s["m0_hat"] for s in cert.preconditions["deep"]["samples"]]
    assert m0[1] > m0[0]


def test_sparse_orbit_is_not_separating():
    # the complement of the orbit of z^2 stays connected through odd levels
    cert = detect_subgroup(F2xZ, SubgroupOrbit(["z^2"]), 1, (5, 10))
    assert cert.status == NOT_3_SEPARATING


def test_certificates_are_deterministic():
    a = detect_subgroup(F2, GeodesicWordLine(tag="thue_morse"), 1, 6).to_dict()
    b = detect_subgroup(F2, GeodesicWordLine(tag="thue_morse"), 1, 6).to_dict()
    assert a == b
