"""Coarse invariants of subgroups and subsets measured on finite balls:
coends, growth and weak domination, coarse 0-connectedness, distortion,
commensurizer and interlaced-coset probes, and almost-invariant sets."""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .cayley import (DEFAULT_BUDGET, UNREACHED, CayleyBall, Exceeds, VertexSet, build_ball,
                     default_hausdorff_guard, neighborhood, restricted_hausdorff)
from .groups import GroupSpec, make_group
from .patterns import SubgroupOrbit, _orbit_bfs, realize, resolve_word, subgroup_generators
from .separation import ComplementEmpty, ball_for, complement_components, region_label


def _orbit(ball: CayleyBall, subgroup_gens) -> VertexSet:
    return realize(SubgroupOrbit(subgroup_gens), ball)


def _value(x):
    """JSON-friendly form of a Hausdorff value."""
    if isinstance(x, Exceeds):
        return {"exceeds": x.lower_bound, "observed": None if math.isinf(x.observed) else x.observed}
    return x


# ---------------------------------------------------------------------------
# coends


@dataclass
class CoendEstimate:
    R: object
    samples: list[tuple[int, int]]
    lower_bound: int
    unbounded_flag: bool
    theta: list[int]

    def to_dict(self) -> dict:
        return {"R": region_label(self.R), "samples": [{"r": r, "deep_count": c} for r, c in self.samples],
                "lower_bound": self.lower_bound, "unbounded_flag": self.unbounded_flag, "theta": self.theta}


def coend_lower_bound(spec: GroupSpec, subgroup_gens, r_max: int = 4, R=32, theta: int | None = None,
                      budget: int = DEFAULT_BUDGET, pattern=None) -> CoendEstimate:
    """Deep counts of the complement of ``N_r(H)`` for r = 0..r_max.

    The lower bound is the largest count seen at two consecutive values of r
    (a single sample counts as itself); it is at least 1 whenever the
    complement is non-empty at the top r."""
    ball = ball_for(spec, R, budget)
    Y = realize(pattern, ball) if pattern is not None else _orbit(ball, subgroup_gens)
    samples, thetas = [], []
    empty_top = False
    for r in range(r_max + 1):
        try:
            a = complement_components(ball, Y, r, theta)
            samples.append((r, a.deep_count))
            thetas.append(a.theta)
            empty_top = False
        except ComplementEmpty:
            samples.append((r, 0))
            thetas.append(0)
            empty_top = True
    counts = [c for _, c in samples]
    if len(counts) == 1:
        lower = counts[0]
    else:
        lower = max(min(a, b) for a, b in zip(counts, counts[1:]))
    if not empty_top:
        lower = max(lower, 1)
    else:
        lower = 0
    unbounded = len(counts) >= 2 and all(b > a for a, b in zip(counts, counts[1:]))
    return CoendEstimate(R, samples, lower, unbounded, thetas)


def write_coends_csv(path, est: CoendEstimate) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "deep_count"])
        w.writerows(est.samples)


# ---------------------------------------------------------------------------
# growth


@dataclass
class GrowthSeries:
    values: np.ndarray
    basepoint: str

    def __getitem__(self, n):
        return int(self.values[n])

    def __len__(self):
        return len(self.values)

    def to_dict(self) -> dict:
        return {"basepoint": self.basepoint, "beta": [int(v) for v in self.values]}


def growth_series(spec: GroupSpec, n_max: int, budget: int = DEFAULT_BUDGET) -> GrowthSeries:
    """Closed-ball sizes beta(0..n_max) about the identity."""
    ball = build_ball(spec, n_max, budget=budget)
    counts = np.bincount(ball.dist, minlength=n_max + 1)
    return GrowthSeries(np.cumsum(counts).astype(np.int64), "e")


def pattern_growth(ball: CayleyBall, S: VertexSet, basepoint=None, n_max: int | None = None) -> GrowthSeries:
    """Members of S within ambient distance n of the basepoint, n = 0..n_max.

    Values are exact only while n stays within the basepoint's margin, so
    n_max defaults to (and may not exceed) that margin."""
    group = ball.group
    b = group.identity if basepoint is None else basepoint
    bid = ball.id_of(b)
    if bid < 0:
        raise ValueError("basepoint lies outside the ball")
    limit = int(ball.margin[bid])
    n_max = limit if n_max is None else n_max
    if n_max > limit:
        raise ValueError(f"n_max {n_max} exceeds the basepoint margin {limit}")
    d = ball.bfs(np.array([bid]), max_dist=n_max)
    dm = d[S.members & (d != UNREACHED)]
    counts = np.bincount(dm, minlength=n_max + 1)[: n_max + 1]
    return GrowthSeries(np.cumsum(counts).astype(np.int64), group.format(b))


def subgroup_growth(spec: GroupSpec, subgroup_gens, n_max: int) -> GrowthSeries:
    """Growth of the subgroup in its own word metric on ``subgroup_gens``."""
    group = make_group(spec)
    intr = _intrinsic_ball(group, subgroup_generators(group, subgroup_gens), n_max)
    counts = np.bincount(np.fromiter(intr.values(), dtype=np.int64), minlength=n_max + 1)
    return GrowthSeries(np.cumsum(counts).astype(np.int64), "e")


def write_growth_csv(path, series: GrowthSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "beta"])
        for n, v in enumerate(series.values):
            w.writerow([n, int(v)])


class RangeTooShort(ValueError):
    pass


@dataclass
class Domination:
    holds: bool
    witness: tuple[int, int] | None
    refutation: dict[tuple[int, int], int] = field(default_factory=dict)

    def __bool__(self):
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "witness": list(self.witness) if self.witness else None,
                "refutation": [{"Lambda": L, "C": C, "first_violation_n": n}
                               for (L, C), n in sorted(self.refutation.items())]}


def _as_fn(beta) -> tuple[Callable[[int], float], int | None]:
    if callable(beta):
        return beta, None
    arr = np.asarray(beta.values if isinstance(beta, GrowthSeries) else beta)
    return (lambda n: arr[n]), len(arr)


def weakly_dominates(beta, beta_prime, Lambda_cap: int = 8, C_cap: int = 8,
                     n_range: Sequence[int] | int = None) -> Domination:
    """Search integer (Lambda, C), Lambda >= 1 and C >= 0 in lexicographic order,
    for beta(n) <= Lambda * beta'(Lambda n + C) + C over ``n_range``.

    Series may be arrays, GrowthSeries or callables.  An array too short for
    some grid point that precedes every witness raises RangeTooShort."""
    f, nf = _as_fn(beta)
    g, ng = _as_fn(beta_prime)
    if n_range is None:
        if nf is None:
            raise ValueError("n_range is required when beta is a callable")
        n_range = range(nf)
    elif isinstance(n_range, int):
        n_range = range(n_range + 1)
    ns = list(n_range)
    if nf is not None and ns and max(ns) >= nf:
        raise RangeTooShort(f"beta covers n < {nf}, range needs {max(ns)}")
    refutation = {}
    for L in range(1, Lambda_cap + 1):
        for C in range(0, C_cap + 1):
            bad = None
            for n in ns:
                m = L * n + C
                if ng is not None and m >= ng:
                    raise RangeTooShort(f"beta' covers n < {ng}, (Lambda, C) = ({L}, {C}) needs {m}")
                if f(n) > L * g(m) + C:
                    bad = n
                    break
            if bad is None:
                return Domination(True, (L, C), refutation)
            refutation[(L, C)] = bad
    return Domination(False, None, refutation)


def polynomial_growth_verdict(beta, Lambda_cap: int = 4, C_cap: int = 4) -> dict:
    """Fit beta(n) ~ n^a on the upper half of the range and test domination by
    n^ceil(a).  The virtually-nilpotent conclusion is a label, not a proof."""
    vals = np.asarray(beta.values if isinstance(beta, GrowthSeries) else beta, dtype=float)
    n = np.arange(len(vals))
    sel = n >= max(2, len(vals) // 2)
    if sel.sum() < 2:
        raise RangeTooShort("need at least four growth values")
    a, _ = np.polyfit(np.log(n[sel]), np.log(vals[sel]), 1)
    # local exponents must not keep rising for a polynomial fit to be credible
    half = np.flatnonzero(sel)
    mid = half[len(half) // 2]
    a_lo = np.polyfit(np.log(n[half[0]:mid + 1]), np.log(vals[half[0]:mid + 1]), 1)[0] if mid > half[0] else a
    a_hi = np.polyfit(np.log(n[mid:]), np.log(vals[mid:]), 1)[0] if mid < half[-1] else a
    degree = int(math.ceil(a - 1e-6))
    dom = weakly_dominates(vals, lambda m: float(m) ** degree if m > 0 else 1.0, Lambda_cap, C_cap,
                           range(1, len(vals)))
    polynomial = bool(dom.holds and a_hi <= a_lo + 0.25)
    return {
        "fitted_exponent": float(a),
        "degree": degree,
        "dominated": dom.holds,
        "witness": list(dom.witness) if dom.witness else None,
        "polynomial": polynomial,
        "label": "polynomial growth => virtually nilpotent (label only)" if polynomial else "no polynomial bound found",
    }


# ---------------------------------------------------------------------------
# coarse 0-connectedness


def coarse_zero_connected(ball: CayleyBall, S: VertexSet, r_max: int) -> int | None:
    """Least r <= r_max with N_r(S) connected inside the guarded region, else None."""
    if not S.members.any():
        raise ValueError("S must be non-empty")
    for r in range(r_max + 1):
        N = neighborhood(ball, S, r)
        region = N.members & (ball.margin >= N.guard)
        ids = np.flatnonzero(region)
        if ids.size == 0:
            return None
        sub = ball.adjacency[ids][:, ids]
        ncomp, _ = connected_components(sub, directed=False)
        if ncomp == 1:
            return r
    return None


# ---------------------------------------------------------------------------
# distortion


@dataclass
class DistortionProfile:
    samples: np.ndarray  # rows (intrinsic, ambient)
    r: np.ndarray
    min_ambient: np.ndarray
    max_ambient: np.ndarray
    phi: np.ndarray
    Phi: np.ndarray
    upper: tuple[float, float]
    lower: tuple[float, float]
    slope: float

    def to_dict(self) -> dict:
        return {
            "pairs": int(len(self.samples)),
            "envelope": [{"r": int(r), "min_ambient": int(lo), "max_ambient": int(hi), "phi": int(p), "Phi": int(P)}
                         for r, lo, hi, p, P in zip(self.r, self.min_ambient, self.max_ambient, self.phi, self.Phi)],
            "upper_fit": {"Lambda": self.upper[0], "C": self.upper[1]},
            "lower_fit": {"Lambda_inv": self.lower[0], "C": self.lower[1]},
            "least_squares_slope": self.slope,
        }


def profile_from_pairs(pairs: np.ndarray) -> DistortionProfile:
    """Envelopes and affine fits from (intrinsic, ambient) distance pairs.

    phi(r) is the least ambient value over intrinsic distance >= r and Phi(r)
    the largest over intrinsic distance <= r, so both are monotone."""
    pairs = np.asarray(pairs, dtype=np.int64)
    pairs = pairs[pairs[:, 0] > 0]
    rs = np.unique(pairs[:, 0])
    lo = np.array([pairs[pairs[:, 0] == r, 1].min() for r in rs])
    hi = np.array([pairs[pairs[:, 0] == r, 1].max() for r in rs])
    phi = np.minimum.accumulate(lo[::-1])[::-1]
    Phi = np.maximum.accumulate(hi)
    if len(rs) >= 2:
        up = np.polyfit(rs, Phi, 1)
        dn = np.polyfit(rs, phi, 1)
        slope = float(np.polyfit(pairs[:, 0], pairs[:, 1], 1)[0])
    else:
        up = dn = (float(Phi[0] / rs[0]), 0.0)
        slope = float(up[0])
    return DistortionProfile(pairs, rs, lo, hi, phi, Phi, (float(up[0]), float(up[1])),
                             (float(dn[0]), float(dn[1])), slope)


def _intrinsic_ball(group, gens: list, radius: int, cap: int = 500_000) -> dict:
    steps = gens + [group.inverse(g) for g in gens]
    d = {group.identity: 0}
    frontier = [group.identity]
    for k in range(1, radius + 1):
        nxt = []
        for h in frontier:
            for s in steps:
                c = group.multiply(h, s)
                if c not in d:
                    d[c] = k
                    nxt.append(c)
        frontier = nxt
        if len(d) > cap:
            raise RuntimeError(f"intrinsic ball exceeds {cap} elements")
    return d


def distortion_profile(spec: GroupSpec, subgroup_gens, R: int = 20, sample_count: int = 1000,
                       seed: int = 0, budget: int = DEFAULT_BUDGET) -> DistortionProfile:
    """Intrinsic (subgroup word metric) versus ambient distances on sampled pairs
    of subgroup elements of intrinsic norm <= R/2."""
    group = make_group(spec)
    gens = subgroup_generators(group, subgroup_gens)
    intr = _intrinsic_ball(group, gens, R)
    half = [h for h, k in intr.items() if 2 * k <= R]
    if group.geodesic:
        amb = group.length
    else:
        reach = max(group.length(h) for h in intr)
        ball = build_ball(spec, reach, budget=budget)
        amb = lambda h: int(ball.dist[ball.index[h]])  # noqa: E731
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(half), size=sample_count)
    j = rng.integers(0, len(half), size=sample_count)
    pairs = []
    for a, b in zip(i, j):
        x = group.multiply(group.inverse(half[a]), half[b])
        pairs.append((intr[x], amb(x)))
    return profile_from_pairs(np.array(pairs))


def map_distortion(ball: CayleyBall, f: Callable, sample_count: int = 1000, seed: int = 0,
                   guard: int | None = None) -> DistortionProfile:
    """Distortion of a vertex map ``f`` (key -> key) on sampled pairs of guarded vertices."""
    g = default_hausdorff_guard(ball) if guard is None else guard
    ids = np.flatnonzero(ball.margin >= g)
    rng = np.random.default_rng(seed)
    group = ball.group
    pairs = []
    for a, b in rng.integers(0, len(ids), size=(sample_count, 2)):
        u, v = ball.keys[ids[a]], ball.keys[ids[b]]
        d0 = group.length(group.multiply(group.inverse(u), v))
        d1 = group.length(group.multiply(group.inverse(f(u)), f(v)))
        pairs.append((d0, d1))
    return profile_from_pairs(np.array(pairs))


# ---------------------------------------------------------------------------
# commensurizer and interlaced cosets


@dataclass
class CommensurizerProbe:
    radii: list
    values: list
    guards: list[int]
    verdict: str

    def to_dict(self) -> dict:
        return {"radii": [region_label(R) for R in self.radii], "values": [_value(v) for v in self.values],
                "guards": self.guards, "verdict": self.verdict}


def trend_verdict(values: list) -> str:
    """Stable / Growing / Inconclusive from per-radius values (needs >= 3 radii)."""
    if len(values) < 3:
        return "Inconclusive"
    exact = [v for v in values if not isinstance(v, Exceeds)]
    lows = [v.lower_bound if isinstance(v, Exceeds) else v for v in values]
    if all(b > a for a, b in zip(lows, lows[1:])):
        return "Growing"
    if len(exact) == len(values) and values[-1] == values[-2] and \
            all(b >= a for a, b in zip(values, values[1:])):
        return "Stable"
    return "Inconclusive"


def commensurizer_probe(spec: GroupSpec, subgroup_gens, g, radii: Sequence, guard: int | None = None,
                        budget: int = DEFAULT_BUDGET) -> CommensurizerProbe:
    """Restricted Hausdorff distance between H and gH at each radius."""
    values, guards = [], []
    for R in radii:
        ball = ball_for(spec, R, budget)
        H = _orbit(ball, subgroup_gens)
        gH = H.translate(resolve_word(ball.group, g))
        gd = default_hausdorff_guard(ball) if guard is None else guard
        gd = max(gd, gH.guard)
        values.append(restricted_hausdorff(ball, H, gH, gd))
        guards.append(gd)
    return CommensurizerProbe(list(radii), values, guards, trend_verdict(values))


@dataclass
class InterlacedProbe:
    deep_count: int
    edges: list[tuple[int, int]]
    graph_components: int
    cosets_scanned: int
    verdict: str

    def to_dict(self) -> dict:
        return {"deep_count": self.deep_count, "edges": [list(e) for e in self.edges],
                "graph_components": self.graph_components, "cosets_scanned": self.cosets_scanned,
                "verdict": self.verdict}


def interlaced_probe(spec: GroupSpec, subgroup_gens, r: int, R, T: int, theta: int | None = None,
                     budget: int = DEFAULT_BUDGET) -> InterlacedProbe:
    """Chain graph on the Deep components of the complement of N_r(H): two
    components are joined when a coset gH with |g| <= T meets both."""
    ball = ball_for(spec, R, budget)
    H = _orbit(ball, subgroup_gens)
    a = complement_components(ball, H, r, theta)
    deep = a.deep
    n = len(deep)
    owner = np.full(ball.size, -1, dtype=np.int64)
    for i, c in enumerate(deep):
        owner[c.members] = i
    edges = set()
    scanned = 0
    seen = []
    for gid in np.flatnonzero(ball.dist <= T):
        gH = H.translate(ball.keys[gid])
        P = gH.trusted()
        key = P.tobytes()
        if key in seen:
            continue
        seen.append(key)
        scanned += 1
        met = sorted(set(owner[P].tolist()) - {-1})
        for x in range(len(met)):
            for y in range(x + 1, len(met)):
                edges.add((met[x], met[y]))
    if n <= 1:
        comps = n
        verdict = "Interlaced"
    else:
        e = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
        adj = sp.csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        comps, _ = connected_components(adj, directed=False)
        verdict = "Interlaced" if comps == 1 else "Not Interlaced"
    return InterlacedProbe(n, sorted(edges), int(comps), scanned, verdict)


# ---------------------------------------------------------------------------
# almost-invariant sets


class NotTwoSeparating(ValueError):
    pass


@dataclass
class AlmostInvariantSet:
    B: VertexSet
    region: np.ndarray
    coboundary_radius: int | None
    invariant: bool
    k: int
    r: int
    component: int
    guard: int
    member_test: str

    def to_dict(self) -> dict:
        return {"size_in_region": int((self.B.members & self.region).sum()), "coboundary_radius": self.coboundary_radius,
                "coboundary_bound": self.k + 1, "h_invariant": self.invariant, "k": self.k, "r": self.r,
                "component": self.component, "guard": self.guard, "member_test": self.member_test}


def almost_invariant_set(spec: GroupSpec, subgroup_gens, r: int, chosen_component, k: int, R,
                         member_test: str = "orbit", theta: int | None = None,
                         budget: int = DEFAULT_BUDGET) -> AlmostInvariantSet:
    """B = {g : g X contained in N_k(U)} on the guarded part of the ball.

    ``member_test="orbit"`` tests the translate of the subgroup orbit (X = H);
    ``"neighborhood"`` tests the translate of N = N_r(H) itself.  The two sets
    differ by at most r: B_N(k) is inside B_H(k), which is inside B_N(k + r).
    ``chosen_component`` is a Deep-component index or a word lying in it.
    """
    if member_test not in ("orbit", "neighborhood"):
        raise ValueError("member_test must be 'orbit' or 'neighborhood'")
    ball = ball_for(spec, R, budget)
    group = ball.group
    gens = subgroup_generators(group, subgroup_gens)
    H = _orbit(ball, subgroup_gens)
    a = complement_components(ball, H, r, theta)
    deep = a.deep
    if len(deep) < 2:
        raise NotTwoSeparating(f"complement of N_{r}(H) has {len(deep)} Deep component(s)")
    if isinstance(chosen_component, (int, np.integer)):
        U = deep[int(chosen_component)]
    else:
        vid = ball.id_of(resolve_word(group, chosen_component))
        hits = [c for c in deep if vid >= 0 and c.members[vid]]
        if not hits:
            raise ValueError(f"{chosen_component!r} lies in no Deep component")
        U = hits[0]
    dU = ball.bfs(U.members)
    guard = default_hausdorff_guard(ball)
    region = ball.margin >= guard
    B = np.zeros(ball.size, dtype=bool)
    for gid in np.flatnonzero(region):
        # gH is realized directly as a coset, so it needs no translation guard
        gX = VertexSet.from_ids(ball, _orbit_bfs(ball, ball.keys[gid], gens))
        if member_test == "neighborhood":
            gX = neighborhood(ball, gX, r)
        dp = dU[gX.trusted()]
        B[gid] = bool(dp.size) and not (dp == UNREACHED).any() and int(dp.max()) <= k
    Bset = VertexSet(ball, B, guard)

    # coboundary edges with both ends in the region
    dN = ball.bfs(a.N.members)
    rad = None
    for s in range(ball.nbr.shape[1]):
        nb = ball.nbr[:, s]
        ok = region & (nb >= 0)
        u = np.flatnonzero(ok)
        v = nb[u]
        both = region[v]
        u, v = u[both], v[both]
        cut = B[u] != B[v]
        if cut.any():
            m = int(max(dN[u[cut]].max(), dN[v[cut]].max()))
            rad = m if rad is None else max(rad, m)

    invariant = True
    for h in gens:
        hB = Bset.translate(h)
        inner = ball.margin >= guard + group.length(h)
        if not np.array_equal(hB.members & inner, B & inner):
            invariant = False
    return AlmostInvariantSet(Bset, region, rad, invariant, k, r, U.id, guard, member_test)


__all__ = [
    "CoendEstimate", "coend_lower_bound", "write_coends_csv", "GrowthSeries", "growth_series",
    "pattern_growth", "subgroup_growth", "write_growth_csv", "RangeTooShort", "Domination", "weakly_dominates",
    "polynomial_growth_verdict", "coarse_zero_connected", "DistortionProfile", "profile_from_pairs",
    "distortion_profile", "map_distortion", "CommensurizerProbe", "commensurizer_probe", "trend_verdict",
    "InterlacedProbe", "interlaced_probe", "NotTwoSeparating", "AlmostInvariantSet", "almost_invariant_set",
]
