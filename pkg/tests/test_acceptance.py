"""Acceptance suite: each test is tagged with the criterion it certifies and the
terminal summary prints one PASS/FAIL line per criterion."""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from coarsegeo.cayley import VertexSet, build_ball, neighborhood, restricted_hausdorff
from coarsegeo.cli import main
from coarsegeo.detection import DEEP_VIOLATED, DETECTED, NOT_3_SEPARATING, detect_subgroup, inclusion_radius
from coarsegeo.groups import make_group
from coarsegeo.invariants import (almost_invariant_set, coend_lower_bound, commensurizer_probe, distortion_profile,
                                  growth_series, interlaced_probe)
from coarsegeo.patterns import (DigitizedLine, GeodesicWordLine, Neighborhood, QiImage, SubgroupOrbit, Fiber, realize,
                                vec)
from coarsegeo.separation import complement_components, estimate_moduli, measure_m0, noncrossing_check

from conftest import F2, F2xZ, Z2

SCENARIOS = sorted((Path(__file__).parent / "scenarios").glob("*.json"))
X_AXIS = SubgroupOrbit(["x"])


# -- 1. growth exactness

@pytest.mark.criterion(1)
def test_growth_exact():
    t = time.perf_counter()
    z2 = growth_series(Z2, 30).values
    f2 = growth_series(F2, 9).values
    assert z2.tolist() == [2 * n * n + 2 * n + 1 for n in range(31)]
    assert f2.tolist() == [2 * 3 ** n - 1 for n in range(10)]
    assert time.perf_counter() - t < 10


# -- 2. flagship detection

@pytest.mark.criterion(2)
def test_flagship_detection():
    t = time.perf_counter()
    cert = detect_subgroup(F2xZ, Fiber(2), 1, (5, 10))
    assert time.perf_counter() - t < 60
    assert cert.status == DETECTED
    assert isinstance(cert.residual, int) and cert.residual <= 1
    group = make_group(F2xZ)
    assert cert.generator_keys
    assert all(h[0] == () and not group.is_identity(h) for h in cert.generator_keys)
    assert tuple(cert.stability["region"]) == (7, 12)
    assert cert.stability["cluster_count"] == cert.cluster_count


# -- 3. negative controls

@pytest.mark.criterion(3)
def test_thue_morse_deep_condition_violated():
    cert = detect_subgroup(F2, GeodesicWordLine(tag="thue_morse"), 1, 6)
    assert cert.status == DEEP_VIOLATED
    samples = cert.preconditions["deep"]["samples"]
    assert [s["R"] for s in samples[:2]] == [6, 8]
    assert samples[1]["m0_hat"] > samples[0]["m0_hat"]


@pytest.mark.criterion(3)
def test_axis_not_three_separating():
    cert = detect_subgroup(Z2, X_AXIS, 1, 32)
    assert cert.status == NOT_3_SEPARATING
    assert cert.preconditions["separating"]["stable_count"] == 2


PRIMITIVE = [(p, q) for p in range(-5, 6) for q in range(-5, 6) if (p, q) > (0, 0) and math.gcd(p, q) == 1]


def _golden_distances(R):
    # guard 0 with truncated partners is the most generous reading: it uses the whole ball
    ball = build_ball(Z2, R)
    Y = realize(DigitizedLine(tag="golden"), ball)
    return {v: restricted_hausdorff(ball, Y, realize(SubgroupOrbit([vec(*v)]), ball), guard=0, policy="reach")
            for v in PRIMITIVE}


@pytest.fixture(scope="module")
def golden():
    return {R: _golden_distances(R) for R in (50, 100, 200, 400)}


@pytest.mark.criterion(3)
@pytest.mark.xfail(strict=True, reason="orbit((3,5)) stays at distance 4 through R=200: |phi - 5/3| ~ 0.049 "
                                       "drifts less than the orbit spacing inside B_200")
def test_golden_line_far_from_every_orbit(golden):
    for v in PRIMITIVE:
        seq = [golden[R][v] for R in (50, 100, 200)]
        assert seq[0] < seq[1] < seq[2] and seq[2] > 5, (v, seq)


def _brute_force(R, v):
    phi = (1 + math.sqrt(5)) / 2
    Y = np.array([(x, math.floor(phi * x)) for x in range(-R, R + 1) if abs(x) + abs(math.floor(phi * x)) <= R])
    O = np.array([(k * v[0], k * v[1]) for k in range(-R, R + 1) if abs(k * v[0]) + abs(k * v[1]) <= R])
    D = np.abs(Y[:, None, :] - O[None, :, :]).sum(axis=2)
    return int(max(D.min(axis=1).max(), D.min(axis=0).max()))


def test_golden_distances_match_brute_force(golden):
    for v in [(3, 5), (2, 3), (1, 2), (1, 0)]:
        for R in (50, 100, 200):
            assert golden[R][v] == _brute_force(R, v)
    assert [golden[R][(3, 5)] for R in (50, 100, 200)] == [4, 4, 4]


def test_golden_line_separates_from_orbits_at_larger_radius(golden):
    for v in PRIMITIVE:
        assert golden[400][v] > max(5, golden[200][v]), v


# -- 4. neighborhood inclusion bound

LINES = [DigitizedLine(d) for d in [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (3, 2), (2, -3)]]
LINES += [DigitizedLine(tag="golden"), DigitizedLine(tag="sqrt2")]
R_INCL = 96


def _line_keys(line, R):
    return list(realize(line, build_ball(Z2, R)).keys())


def _nearby_sets(ball, line, Y, r):
    """Sets inside N_r(Y): the thickening, a transverse translate and a staircase
    that switches to the translate at x = 0."""
    keys = _line_keys(line, ball.R + r)
    steep = line.direction is not None and abs(line.direction[1]) > abs(line.direction[0])
    dx, dy = (r, 0) if steep else (0, r)
    shifted = [(x + dx, y + dy) for x, y in keys]
    yield "thick", neighborhood(ball, Y, r)
    yield "shift", VertexSet.from_keys(ball, shifted)
    if steep:
        lo = [(x, y) for x, y in keys if y < 0]
        hi = [(x + dx, y) for x, y in keys if y >= 0]
        x0 = min(x for x, y in keys if y == 0)
        bridge = [(x0 + j, 0) for j in range(r + 1)]
    else:
        lo = [(x, y) for x, y in keys if x < 0]
        hi = [(x, y + dy) for x, y in keys if x >= 0]
        y0 = min(y for x, y in keys if x == 0)
        bridge = [(0, y0 + j) for j in range(r + 1)]
    yield "stair", VertexSet.from_keys(ball, lo + hi + bridge)


def _inclusion_instances():
    ball = build_ball(Z2, R_INCL)
    out = []
    for line in LINES:
        Y = realize(line, ball)
        m0_cache = {}

        def m0(s):
            if s not in m0_cache:
                a = complement_components(ball, Y, s)
                m0_cache[s] = measure_m0(a) if a.deep_count == 2 else None
            return m0_cache[s]

        for r in (1, 2):
            for name, Yp in _nearby_sets(ball, line, Y, r):
                out.append((line.direction or line.tag, r, name, ball, Y, Yp, m0))
    return out


@pytest.mark.criterion(4)
def test_inclusion_bound_holds():
    instances = _inclusion_instances()
    assert len(instances) >= 20
    violations = []
    for label, r, name, ball, Y, Yp, m0 in instances:
        dY = ball.bfs(Y.members)
        assert dY[Yp.members].max() <= r, (label, r, name)
        assert complement_components(ball, Yp, r).deep_count == 2, (label, r, name)
        r1 = inclusion_radius(m0)(r)
        assert r1 is not None, (label, r, name)
        g = 2 * m0(r + m0(r))
        assert g < ball.R
        trusted = Y.members & (ball.margin >= g)
        assert trusted.any()
        worst = int(ball.bfs(Yp.members)[trusted].max())
        if worst > r1:
            violations.append((label, r, name, worst, r1))
    assert violations == []


# -- 5. QI invariance

@pytest.mark.criterion(5)
def test_rotation_preserves_separation():
    rotated = estimate_moduli(Z2, QiImage(math.pi / 6, X_AXIS), [32, 64], [0])
    plain = estimate_moduli(Z2, X_AXIS, [32, 64], [0])
    for s, p in zip(rotated.samples, plain.samples):
        assert s.deep_count == p.deep_count == 2
        assert s.m1_hat <= 4


# -- 6. coends

@pytest.mark.criterion(6)
def test_coends():
    z2 = coend_lower_bound(Z2, ["x"], 4, 64)
    assert z2.lower_bound == 2 and not z2.unbounded_flag
    assert {c for _, c in z2.samples} == {2}
    assert coend_lower_bound(F2, ["a"], 3, 9).unbounded_flag
    assert coend_lower_bound(F2xZ, ["z"], 0, (5, 10)).lower_bound >= 3


# -- 7. commensurizer probe

@pytest.mark.criterion(7)
def test_commensurizer():
    p = commensurizer_probe(Z2, ["x"], "y^3", [20, 30, 40])
    assert p.verdict == "Stable" and p.values[-1] == 3
    q = commensurizer_probe(F2, ["a"], "b", [6, 8, 10])
    assert q.verdict == "Growing"


# -- 8. almost-invariant set

@pytest.mark.criterion(8)
def test_almost_invariant_set():
    ais = almost_invariant_set(Z2, ["x"], 1, "y^5", 0, 24)
    ball = ais.B.ball
    region = {k for k, m in zip(ball.keys, ais.region) if m}
    inside = {k for k, m in zip(ball.keys, ais.B.members) if m}
    assert inside & region == {k for k in region if k[1] >= 2}
    assert ais.coboundary_radius <= 1
    assert ais.invariant
    for x, y in region:
        if (x + 1, y) in region:
            assert ((x, y) in inside) == ((x + 1, y) in inside)


# -- 9. interlaced cosets

@pytest.mark.criterion(9)
def test_interlaced_probes():
    z = interlaced_probe(Z2, ["x"], 1, 20, 4)
    assert z.verdict == "Not Interlaced" and z.deep_count == 2 and z.graph_components == 2 and z.edges == []
    f = interlaced_probe(F2, ["a"], 1, 8, 4)
    assert f.graph_components > 1


# -- 10. noncrossing

@pytest.mark.criterion(10)
def test_noncrossing():
    par = noncrossing_check(Z2, X_AXIS, 5, 0, 64)
    assert par.verdict == "Pass" and par.tested > 0
    axes = noncrossing_check(Z2, None, 0, 16, 64, family=[X_AXIS, SubgroupOrbit(["y"])])
    assert axes.verdict == "Fail"
    assert all(e["k_min"] is None for e in axes.entries)
    thick = noncrossing_check(F2, Neighborhood(GeodesicWordLine(period="a"), 1), 3, 4, 10)
    assert thick.verdict == "Fail"


# -- 11. distortion

@pytest.mark.criterion(11)
def test_diagonal_distortion():
    prof = distortion_profile(Z2, [vec(1, 1)], 20, 1000, seed=0)
    assert abs(prof.upper[0] - 2) <= 0.05 and abs(prof.lower[0] - 2) <= 0.05
    assert np.all(prof.min_ambient <= prof.max_ambient)
    assert np.all(np.diff(prof.phi) >= 0) and np.all(np.diff(prof.Phi) >= 0)
    assert np.all(prof.phi <= prof.min_ambient) and np.all(prof.Phi >= prof.max_ambient)


# -- 12. determinism

@pytest.mark.criterion(12)
@pytest.mark.parametrize("path", SCENARIOS, ids=[p.stem for p in SCENARIOS])
def test_scenario_reports_are_byte_identical(tmp_path, path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        code = main(["run", str(path), "--output-dir", str(out)])
        assert code in (0, 2)
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert json.loads(outs[0]["report.json"])["version"] == 1
