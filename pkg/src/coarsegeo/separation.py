"""Complementary components, deep/shallow labels, separation profiles,
empirical moduli and noncrossing checks on finite balls.

Finite-scale labels: an interior component (no vertex on the ball boundary)
is a genuine finite component of the infinite complement, hence Shallow.  A
boundary component is Deep when its depth reaches the threshold ``theta`` and
grows by at least ``theta / 2`` against the same component seen from the ball
shrunk by ``theta``; one whose depth stays below ``theta`` and does not grow
that way is Shallow (a strip of bounded width).  Everything else is
Undetermined.  Depths are sups over the guarded region ``margin >= N.guard``.
"""

from __future__ import annotations

import csv
import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .cayley import UNREACHED, CayleyBall, VertexSet, build_ball, neighborhood, DEFAULT_BUDGET
from .groups import GroupSpec
from .patterns import realize

DEEP, SHALLOW, UNDETERMINED = "Deep", "Shallow", "Undetermined"


class ComplementEmpty(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Component:
    id: int
    members: np.ndarray
    size: int
    depth: int
    inner_depth: int
    label: str
    touches_boundary: bool

    def vertex_set(self, ball: CayleyBall) -> VertexSet:
        return VertexSet(ball, self.members)


@dataclass(eq=False)
class ComponentAnalysis:
    ball: CayleyBall
    Y: VertexSet
    r: int
    theta: int
    components: list[Component]
    N: VertexSet

    @property
    def deep(self) -> list[Component]:
        return [c for c in self.components if c.label == DEEP]

    @property
    def deep_count(self) -> int:
        return len(self.deep)

    @property
    def shallow_count(self) -> int:
        return sum(c.label == SHALLOW for c in self.components)

    @property
    def undetermined_count(self) -> int:
        return sum(c.label == UNDETERMINED for c in self.components)

    def component_of(self, vid: int) -> int:
        """Index of the component holding vertex ``vid``, or -1."""
        for c in self.components:
            if c.members[vid]:
                return c.id
        return -1

    def rows(self) -> list[list]:
        return [[self.ball.R, self.r, c.id, c.size, c.depth, c.label, int(c.touches_boundary)]
                for c in self.components]

    def summary(self) -> dict:
        return {
            "R": self.ball.R,
            "r": self.r,
            "theta": self.theta,
            "guard": self.N.guard,
            "depth_guard": self.N.guard,
            "deep_count": self.deep_count,
            "shallow_count": self.shallow_count,
            "undetermined_count": self.undetermined_count,
            "components": [
                {"id": c.id, "size": c.size, "depth": c.depth, "label": c.label,
                 "touches_boundary": c.touches_boundary}
                for c in self.components
            ],
        }


COMPONENT_COLUMNS = ["R", "r", "component_id", "size", "depth", "label", "touches_boundary"]


def write_components_csv(path, analyses: Sequence[ComponentAnalysis]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPONENT_COLUMNS)
        for a in analyses:
            w.writerows(a.rows())


def default_theta(R: int, r: int) -> int:
    return max(1, math.ceil((R - r) / 3))


def complement_components(ball: CayleyBall, Y: VertexSet, r: int, theta: int | None = None) -> ComponentAnalysis:
    """Components of ``ball - N_r(Y)`` with finite-scale Deep/Shallow labels."""
    N = neighborhood(ball, Y, r)
    theta = default_theta(ball.R, r) if theta is None else int(theta)
    rest = ~N.members
    if not rest.any():
        raise ComplementEmpty(f"N_{r}(Y) covers the whole ball")
    ids = np.flatnonzero(rest)
    sub = ball.adjacency[ids][:, ids]
    ncomp, lab = connected_components(sub, directed=False)
    # order components by their least vertex id (ids are sorted, so first occurrence wins)
    _, first = np.unique(lab, return_index=True)
    order = np.argsort(first)
    relabel = np.empty(ncomp, dtype=np.int64)
    relabel[order] = np.arange(ncomp)
    lab = relabel[lab]

    dN = ball.bfs(N.members)
    depth_all = dN[ids]
    marg = ball.margin[ids]
    delta = theta
    comps = []
    for c in range(ncomp):
        sel = lab == c
        mem = np.zeros(ball.size, dtype=bool)
        mem[ids[sel]] = True
        d = depth_all[sel]
        m = marg[sel]
        # sup over the guarded region; tiny components living in the band fall back to all members
        guarded = d[m >= N.guard]
        depth = int(guarded.max()) if guarded.size else int(d.max())
        inner = d[m >= N.guard + delta]
        inner_depth = int(inner.max()) if inner.size else 0
        touches = bool((m == 0).any())
        growth = depth - inner_depth
        if not touches:
            label = SHALLOW
        elif depth >= theta and growth >= delta / 2:
            label = DEEP
        elif depth < theta and inner.size and growth < delta / 2:
            label = SHALLOW
        else:
            label = UNDETERMINED
        comps.append(Component(c, mem, int(sel.sum()), depth, inner_depth, label, touches))
    return ComponentAnalysis(ball, Y, r, theta, comps, N)


def _region(R) -> dict:
    """Normalize a radius or a tuple of per-factor radii to build_ball kwargs."""
    if isinstance(R, (tuple, list)):
        return {"factor_radii": tuple(int(x) for x in R)}
    return {"R": int(R)}


_shared: dict | None = None


@contextmanager
def shared_balls():
    """Within this block, ``ball_for`` reuses balls already built for the same group and region."""
    global _shared
    outer = _shared
    _shared = {} if outer is None else outer
    try:
        yield
    finally:
        _shared = outer


def ball_for(spec: GroupSpec, R, budget: int = DEFAULT_BUDGET) -> CayleyBall:
    if _shared is None:
        return build_ball(spec, budget=budget, **_region(R))
    key = (json.dumps(spec.to_dict(), sort_keys=True), region_label(R))
    key = (key[0], json.dumps(key[1]))
    if key not in _shared:
        _shared[key] = build_ball(spec, budget=budget, **_region(R))
    return _shared[key]


def region_label(R):
    return list(R) if isinstance(R, (tuple, list)) else int(R)


# ---------------------------------------------------------------------------
# n-separating profile


@dataclass
class SeparatingProfile:
    r: int
    radii: list
    counts: list[int]
    verdict: str
    stable_count: int | None

    def to_dict(self) -> dict:
        return {"r": self.r, "radii": [region_label(R) for R in self.radii], "deep_counts": self.counts,
                "verdict": self.verdict, "stable_count": self.stable_count}


def _deep_count(ball: CayleyBall, Y: VertexSet, r: int, theta: int | None) -> int:
    try:
        return complement_components(ball, Y, r, theta).deep_count
    except ComplementEmpty:
        return 0


def n_separating_profile(spec: GroupSpec, pattern, r: int, radii: Sequence, theta: int | None = None,
                         budget: int = DEFAULT_BUDGET) -> SeparatingProfile:
    """Deep counts of the complement of ``N_r(pattern)`` over increasing radii.

    The verdict is stable only when the two largest radii agree."""
    if not radii:
        raise ValueError("radii must be non-empty")
    counts = []
    for R in radii:
        ball = ball_for(spec, R, budget)
        counts.append(_deep_count(ball, realize(pattern, ball), r, theta))
    if len(counts) >= 2 and counts[-1] == counts[-2]:
        c = counts[-1]
        verdict = f"{c}-separating" if c > 0 else "0-separating"
        stable = c
    elif len(counts) == 1:
        verdict, stable = "Unstable", None
    else:
        verdict, stable = "Unstable", None
    return SeparatingProfile(r, list(radii), counts, verdict, stable)


# ---------------------------------------------------------------------------
# moduli


@dataclass(frozen=True)
class ModulusSample:
    R: object
    r: int
    m0_hat: int | None
    m1_hat: int
    failed: bool
    guard: int
    deep_count: int

    def to_dict(self) -> dict:
        return {"R": region_label(self.R), "r": self.r, "m0_hat": self.m0_hat, "m1_hat": self.m1_hat,
                "failed": self.failed, "guard": self.guard, "deep_count": self.deep_count}


@dataclass
class ModulusEstimate:
    samples: list[ModulusSample]

    @property
    def failed(self) -> bool:
        return any(s.failed for s in self.samples)

    def at(self, r: int) -> list[ModulusSample]:
        return [s for s in self.samples if s.r == r]

    def to_dict(self) -> dict:
        return {"failed": self.failed, "samples": [s.to_dict() for s in self.samples]}


def moduli_guard(ball: CayleyBall, r: int) -> int:
    return math.ceil((ball.R - r) / 2)


def measure_m0(analysis: ComponentAnalysis, guard: int | None = None) -> int | None:
    """Least m such that every open m-ball about a guarded point of N_r(Y) meets
    every Deep component; None without Deep components or guarded points."""
    ball = analysis.ball
    g = moduli_guard(ball, analysis.r) if guard is None else guard
    P = analysis.N.members & (ball.margin >= g)
    deep = analysis.deep
    if not deep or not P.any():
        return None
    worst = 0
    for c in deep:
        d = ball.bfs(c.members)[P]
        if (d == UNREACHED).any():
            return None
        worst = max(worst, int(d.max()))
    return worst + 1


def measure_m1(analysis: ComponentAnalysis) -> int:
    return max((c.depth for c in analysis.components if c.label == SHALLOW), default=0)


def estimate_moduli(spec: GroupSpec, pattern, radii: Sequence, r_list: Sequence[int],
                    theta: int | None = None, budget: int = DEFAULT_BUDGET) -> ModulusEstimate:
    """Empirical deep/shallow moduli per (R, r).

    A sample fails when m0_hat exceeds (R - r)/2, or when it grew by more than
    half the radius increment since the previous radius."""
    samples = []
    prev: dict[int, tuple[int, int]] = {}
    for R in radii:
        ball = ball_for(spec, R, budget)
        Y = realize(pattern, ball)
        for r in r_list:
            try:
                a = complement_components(ball, Y, r, theta)
            except ComplementEmpty:
                samples.append(ModulusSample(R, r, None, 0, False, moduli_guard(ball, r), 0))
                continue
            m0 = measure_m0(a)
            m1 = measure_m1(a)
            failed = False
            if m0 is not None:
                failed = m0 > (ball.R - r) / 2
                if r in prev and prev[r][1] is not None:
                    dR = ball.R - prev[r][0]
                    if dR > 0 and m0 - prev[r][1] > dR / 2:
                        failed = True
            prev[r] = (ball.R, m0)
            samples.append(ModulusSample(R, r, m0, m1, failed, moduli_guard(ball, r), a.deep_count))
    return ModulusEstimate(samples)


# ---------------------------------------------------------------------------
# noncrossing


@dataclass
class NoncrossingReport:
    entries: list[dict]
    k_max: int
    tested: int
    R: object

    @property
    def verdict(self) -> str:
        if any(e["k_min"] is None for e in self.entries):
            return "Fail"
        return "Pass"

    @property
    def max_k(self) -> int | None:
        ks = [e["k_min"] for e in self.entries if e["k_min"] is not None]
        return max(ks) if ks else None

    def to_dict(self) -> dict:
        return {"R": region_label(self.R), "k_max": self.k_max, "tested": self.tested, "verdict": self.verdict,
                "max_k_min": self.max_k, "entries": self.entries}


def _containment_k(ball: CayleyBall, P: np.ndarray, deep_dists: list[np.ndarray]) -> int | None:
    """Least k with all of P inside N_k of one Deep component, or None."""
    best = None
    for d in deep_dists:
        dp = d[P]
        if dp.size == 0 or (dp == UNREACHED).any():
            continue
        k = int(dp.max())
        best = k if best is None else min(best, k)
    return best


def noncrossing_check(spec: GroupSpec, pattern, T: int, k_max: int, R, family: Sequence | None = None,
                      theta: int | None = None, budget: int = DEFAULT_BUDGET) -> NoncrossingReport:
    """Check noncrossing(k_max) for the translates gY with |g| <= T, or for an
    explicit family of patterns (all ordered pairs of distinct members)."""
    ball = ball_for(spec, R, budget)
    entries = []
    if family is not None:
        sets = [realize(p, ball) for p in family]
        deep_d = []
        for S in sets:
            a = complement_components(ball, S, 0, theta)
            deep_d.append([ball.bfs(c.members) for c in a.deep])
        for i, A in enumerate(sets):
            for j in range(len(sets)):
                g = max(A.guard, sets[j].guard)
                P = A.trusted(g)
                if i == j or np.array_equal(P, sets[j].trusted(g)):
                    continue
                k = _containment_k(ball, P, deep_d[j])
                entries.append({"pair": [i, j], "k_min": k if k is not None and k <= k_max else None,
                                "observed": k})
        return NoncrossingReport(entries, k_max, len(entries), R)

    if 2 * T > ball.R:
        raise ValueError("translate radius T must be at most R/2")
    Y = realize(pattern, ball)
    a = complement_components(ball, Y, 0, theta)
    deep_d = [ball.bfs(c.members) for c in a.deep]
    group = ball.group
    for gid in np.flatnonzero(ball.dist <= T):
        g = ball.keys[gid]
        gY = Y.translate(g)
        P = gY.trusted()
        if np.array_equal(P, Y.trusted(gY.guard)):
            continue
        if not P.any():
            continue
        k = _containment_k(ball, P, deep_d)
        entries.append({"g": group.format(g), "k_min": k if k is not None and k <= k_max else None,
                        "observed": k})
    return NoncrossingReport(entries, k_max, len(entries), R)


__all__ = [
    "DEEP", "SHALLOW", "UNDETERMINED", "ComplementEmpty", "Component", "ComponentAnalysis",
    "complement_components", "default_theta", "write_components_csv", "COMPONENT_COLUMNS",
    "SeparatingProfile", "n_separating_profile", "ModulusSample", "ModulusEstimate", "estimate_moduli",
    "measure_m0", "measure_m1", "moduli_guard", "NoncrossingReport", "noncrossing_check", "ball_for",
    "region_label",
]
