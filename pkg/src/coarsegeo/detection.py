"""Subgroup detection from a subset satisfying the deep, shallow,
3-separating and noncrossing conditions, run on a finite ball.

Pipeline: collect the translates gY meeting the closed k-ball about e,
cluster them by restricted Hausdorff distance, label each vertex g of N_k(Y)
by its cluster and by how g moves the deep components, pick the least
representative tau of each label class, and emit the generators g tau^-1.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cayley import (DEFAULT_BUDGET, UNREACHED, CayleyBall, Exceeds, VertexSet, default_hausdorff_guard,
                     neighborhood, restricted_hausdorff)
from .groups import GroupSpec
from .patterns import pretranslate_to_identity, realize
from .separation import (ComplementEmpty, ball_for, complement_components, estimate_moduli, measure_m0,
                         n_separating_profile, noncrossing_check, region_label)

DETECTED = "Detected"
NOT_3_SEPARATING = "Not3Separating"
DEEP_VIOLATED = "DeepConditionViolated"
SHALLOW_VIOLATED = "ShallowConditionViolated"
NONCROSSING_VIOLATED = "NoncrossingViolated"
UNSTABLE = "Unstable"
PRECONDITION_FAILURES = (DEEP_VIOLATED, SHALLOW_VIOLATED, NOT_3_SEPARATING, NONCROSSING_VIOLATED)


class HausdorffExceeds(RuntimeError):
    def __init__(self, i: int, j: int, value: Exceeds):
        super().__init__(f"distance between translates {i} and {j} is not certified ({value})")
        self.pair = (i, j)
        self.value = value


def grow_region(R, by: int = 2):
    if isinstance(R, (tuple, list)):
        return tuple(int(x) + by for x in R)
    return int(R) + by


def inclusion_radius(m0: Callable[[int], int | None]) -> Callable[[int], int | None]:
    """r1(r) = 2 m0(r + m0(r)) + m0(r) for a callable m0 (None if undefined)."""
    def r1(r):
        a = m0(r)
        if a is None:
            return None
        b = m0(r + a)
        if b is None:
            return None
        return 2 * b + a
    return r1


# ---------------------------------------------------------------------------
# translates


@dataclass(eq=False)
class Translate:
    g: tuple
    length: int
    vset: VertexSet


@dataclass(eq=False)
class TranslateFamily:
    ball: CayleyBall
    Y: VertexSet
    k: int
    members: list[Translate]
    compare_guard: int
    scan_radius: int

    def __len__(self):
        return len(self.members)

    def words(self) -> list[str]:
        return [self.ball.group.format(t.g) for t in self.members]


def collect_translates(ball: CayleyBall, Y: VertexSet, k: int, compare_guard: int | None = None) -> TranslateFamily:
    """All distinct gY meeting the closed k-ball about e, found as g = p y^-1
    with |p| <= k and y in Y near e.  Translates are compared on the region
    ``margin >= compare_guard`` and each keeps its shortest g (then least id)."""
    group = ball.group
    cg = default_hausdorff_guard(ball) if compare_guard is None else compare_guard
    scan = max(0, cg - k - Y.guard)
    P = np.flatnonzero(ball.dist <= k)
    Ys = np.flatnonzero(Y.members & (ball.dist <= scan))
    cands = {}
    for pid in P:
        p = ball.keys[pid]
        for yid in Ys:
            g = group.multiply(p, group.inverse(ball.keys[yid]))
            gid = ball.id_of(g)
            if gid < 0:
                continue
            cands.setdefault(gid, g)
    seen = {}
    members = []
    for gid in sorted(cands, key=lambda i: (int(ball.dist[i]), i)):
        g = cands[gid]
        T = Y.translate(g)
        key = T.trusted(cg).tobytes()
        if key in seen:
            continue
        seen[key] = len(members)
        members.append(Translate(g, int(ball.dist[gid]), T))
    return TranslateFamily(ball, Y, k, members, cg, scan)


@dataclass
class Clustering:
    labels: list[int]
    clusters: list[list[int]]
    representatives: list[int]
    mu: int
    threshold: int
    distances: dict

    @property
    def count(self) -> int:
        return len(self.clusters)


def cluster_translates(family: TranslateFamily, threshold: int, guard: int | None = None) -> Clustering:
    """Single-linkage clusters at restricted Hausdorff distance <= threshold.

    Each cluster's representative is its first member (shortest g); mu is one
    more than the largest distance from a representative to its cluster.
    A pair whose distance is uncertified but could be <= threshold raises
    :class:`HausdorffExceeds`."""
    ball = family.ball
    n = len(family.members)
    if n == 0:
        raise ValueError("empty translate family")
    gd = family.compare_guard if guard is None else guard
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    dist = {}
    for i in range(n):
        for j in range(i + 1, n):
            d = restricted_hausdorff(ball, family.members[i].vset, family.members[j].vset, gd)
            dist[(i, j)] = d
            if isinstance(d, Exceeds):
                if d.lower_bound <= threshold:
                    raise HausdorffExceeds(i, j, d)
                continue
            if d <= threshold:
                a, b = find(i), find(j)
                if a != b:
                    parent[max(a, b)] = min(a, b)
    roots = sorted({find(i) for i in range(n)})
    labels = [roots.index(find(i)) for i in range(n)]
    clusters = [[i for i in range(n) if labels[i] == c] for c in range(len(roots))]
    reps = [c[0] for c in clusters]
    spread = 0
    for c, rep in zip(clusters, reps):
        for i in c:
            if i != rep:
                d = dist[(min(i, rep), max(i, rep))]
                if isinstance(d, Exceeds):
                    raise HausdorffExceeds(min(i, rep), max(i, rep), d)
                spread = max(spread, d)
    return Clustering(labels, clusters, reps, spread + 1, threshold, dist)


# ---------------------------------------------------------------------------
# verification


@dataclass
class Verification:
    residual: object
    orbit_size: int
    guard: int

    def to_dict(self) -> dict:
        r = self.residual
        return {"residual": {"exceeds": r.lower_bound} if isinstance(r, Exceeds) else r,
                "orbit_size": self.orbit_size, "guard": self.guard}


def generated_orbit(ball: CayleyBall, generators) -> VertexSet:
    group = ball.group
    steps = list(generators) + [group.inverse(g) for g in generators]
    seen = {group.identity}
    q = deque([group.identity])
    ids = []
    while q:
        h = q.popleft()
        ids.append(ball.index[h])
        for s in steps:
            c = group.multiply(h, s)
            if c not in seen and c in ball.index:
                seen.add(c)
                q.append(c)
    return VertexSet.from_ids(ball, ids)


def verify_detection(ball: CayleyBall, Y: VertexSet, generators, guard: int | None = None) -> Verification:
    """Restricted Hausdorff distance between Y and the orbit of the generated subgroup."""
    gens = [ball.group.element(g) if isinstance(g, str) else g for g in generators]
    H = generated_orbit(ball, gens)
    gd = default_hausdorff_guard(ball) if guard is None else guard
    return Verification(restricted_hausdorff(ball, Y, H, gd), len(H), max(gd, Y.guard))


# ---------------------------------------------------------------------------
# the pipeline


@dataclass
class DetectionCertificate:
    status: str
    region: object
    k: int
    preconditions: dict = field(default_factory=dict)
    shift: str = "e"
    translates: list[str] = field(default_factory=list)
    clusters: list[list[int]] = field(default_factory=list)
    representatives: list[str] = field(default_factory=list)
    threshold: int | None = None
    threshold_source: str | None = None
    mu: int | None = None
    deep_C: int | None = None
    deep_D: int | None = None
    classes: list[dict] = field(default_factory=list)
    R_rep: int | None = None
    generators: list[str] = field(default_factory=list)
    generator_keys: list = field(default_factory=list)
    residual: object = None
    residual_bound: int | None = None
    orbit_size: int | None = None
    stability: dict = field(default_factory=dict)
    guards: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)

    def to_dict(self) -> dict:
        res = self.residual
        if isinstance(res, Exceeds):
            res = {"exceeds": res.lower_bound}
        return {
            "status": self.status,
            "region": region_label(self.region),
            "k": self.k,
            "preconditions": self.preconditions,
            "pretranslate_shift": self.shift,
            "translates": self.translates,
            "clusters": self.clusters,
            "cluster_representatives": self.representatives,
            "threshold": self.threshold,
            "threshold_source": self.threshold_source,
            "mu": self.mu,
            "deep_components_Y": self.deep_C,
            "deep_components_N_mu": self.deep_D,
            "classes": self.classes,
            "R_rep": self.R_rep,
            "generators": self.generators,
            "residual": res,
            "residual_bound": self.residual_bound,
            "orbit_size": self.orbit_size,
            "stability": self.stability,
            "guards": self.guards,
            "notes": self.notes,
        }


def _check_preconditions(spec, pattern, region, k, theta, r_max, T, budget) -> tuple[str | None, dict]:
    regions = [region, grow_region(region)]
    info = {"radii": [region_label(R) for R in regions]}
    mod = estimate_moduli(spec, pattern, regions, list(range(r_max + 1)), theta, budget)
    info["deep"] = mod.to_dict()
    if mod.failed:
        return DEEP_VIOLATED, info
    m1 = {}
    for s in mod.samples:
        m1.setdefault(s.r, []).append(s.m1_hat)
    grows = [r for r, v in m1.items() if len(v) >= 2 and v[-1] > v[-2]]
    info["shallow"] = {"m1_hat": {str(r): v for r, v in m1.items()}, "growing_at_r": grows}
    if grows:
        return SHALLOW_VIOLATED, info
    prof = n_separating_profile(spec, pattern, 0, regions, theta, budget)
    info["separating"] = prof.to_dict()
    if prof.stable_count is None or prof.stable_count < 3:
        return NOT_3_SEPARATING, info
    nc = noncrossing_check(spec, pattern, T, k, region, theta=theta, budget=budget)
    info["noncrossing"] = {"verdict": nc.verdict, "tested": nc.tested, "max_k_min": nc.max_k, "T": T, "k_max": k}
    if nc.verdict != "Pass":
        return NONCROSSING_VIOLATED, info
    return None, info


def _witnesses(ball: CayleyBall, comp_members: np.ndarray, dN: np.ndarray, count: int = 3) -> list[int]:
    """Points of a component at distance >= 2 from the removed set, nearest e first."""
    ids = np.flatnonzero(comp_members & (dN >= 2))
    if ids.size == 0:
        ids = np.flatnonzero(comp_members)
    order = np.lexsort((ids, ball.dist[ids]))
    return [int(i) for i in ids[order[:count]]]


def _threshold(ball, Y, k, theta) -> tuple[int, str]:
    cache = {}

    def m0(r):
        if r not in cache:
            try:
                cache[r] = measure_m0(complement_components(ball, Y, r, theta))
            except ComplementEmpty:
                cache[r] = None
        return cache[r]

    x2 = m0(k)
    x1 = inclusion_radius(m0)(x2) if x2 is not None else None
    if x1 is None:
        return max(1, math.ceil(ball.R / 4)), "fallback ceil(R/4)"
    return x1, f"r1(m0_hat({k}))"


def _cluster(ball, Y, k, theta, threshold):
    fam = collect_translates(ball, Y, k)
    if threshold is None:
        threshold, src = _threshold(ball, Y, k, theta)
    else:
        src = "given"
    return fam, cluster_translates(fam, threshold), threshold, src


def detect_subgroup(spec: GroupSpec, pattern, k: int = 1, R=None, *, theta: int | None = None, r_max: int = 0,
                    T: int | None = None, threshold: int | None = None, check_preconditions: bool = True,
                    budget: int = DEFAULT_BUDGET) -> DetectionCertificate:
    """Run the detection pipeline on the region ``R`` (radius or per-factor radii)."""
    if R is None:
        raise ValueError("a radius or per-factor radii are required")
    ball = ball_for(spec, R, budget)
    group = ball.group
    if T is None:
        T = ball.R // 2
    cert = DetectionCertificate(status=UNSTABLE, region=R, k=k)
    cert.guards = {"hausdorff": default_hausdorff_guard(ball), "theta": theta, "T": T, "r_max": r_max}

    pattern, Y, shift = pretranslate_to_identity(pattern, ball)
    cert.shift = group.format(shift)
    if shift != group.identity:
        cert.notes.append("pattern translated to contain e")

    if check_preconditions:
        failed, info = _check_preconditions(spec, pattern, R, k, theta, r_max, T, budget)
        cert.preconditions = info
        if failed:
            cert.status = failed
            return cert

    try:
        fam, cl, thr, src = _cluster(ball, Y, k, theta, threshold)
    except HausdorffExceeds as exc:
        cert.notes.append(str(exc))
        return cert
    cert.translates = fam.words()
    cert.clusters = cl.clusters
    cert.representatives = [group.format(fam.members[i].g) for i in cl.representatives]
    cert.threshold, cert.threshold_source, cert.mu = thr, src, cl.mu
    cert.guards["translate_compare"] = fam.compare_guard
    cert.guards["translate_scan_radius"] = fam.scan_radius

    # deep components of the complement of Y and of N_mu(Y)
    try:
        aC = complement_components(ball, Y, 0, theta)
        aD = complement_components(ball, Y, cl.mu, theta)
    except ComplementEmpty:
        cert.notes.append(f"N_{cl.mu}(Y) covers the ball")
        return cert
    C = aC.deep
    D = aD.deep
    cert.deep_C, cert.deep_D = len(C), len(D)
    owner = np.full(ball.size, -1, dtype=np.int64)
    for j, c in enumerate(C):
        owner[c.members] = j
    dNmu = ball.bfs(aD.N.members)
    wit = [[ball.keys[i] for i in _witnesses(ball, d.members, dNmu)] for d in D]

    # label the vertices of N_k(Y) whose inverse translate is exact on the comparison region
    cg = fam.compare_guard
    reach = cg - Y.guard
    Nk = neighborhood(ball, Y, k)
    verts = np.flatnonzero(Nk.members & (ball.dist <= reach))
    cert.guards["label_radius"] = reach
    fam_index = {t.vset.trusted(cg).tobytes(): i for i, t in enumerate(fam.members)}
    labels = {}
    for vid in verts:
        g = ball.keys[vid]
        T_inv = Y.translate(group.inverse(g))
        key = T_inv.trusted(cg).tobytes()
        if key in fam_index:
            ci = cl.labels[fam_index[key]]
        else:
            ci = _nearest_cluster(ball, T_inv, fam, cl)
        gi = fam.members[cl.representatives[ci]].g
        shift_g = group.multiply(g, gi)
        f = []
        for ws in wit:
            votes = Counter()
            for w in ws:
                q = ball.id_of(group.multiply(shift_g, w))
                if q >= 0 and owner[q] >= 0:
                    votes[int(owner[q])] += 1
            if votes:
                top = max(votes.values())
                f.append(min(j for j, v in votes.items() if v == top))
            else:
                f.append(-1)
        labels[int(vid)] = (ci, tuple(f))

    classes = {}
    for vid in sorted(labels):
        classes.setdefault(labels[vid], vid)  # least id = shortlex least
    cert.R_rep = max(int(ball.dist[t]) for t in classes.values()) if classes else 0
    cert.classes = [{"cluster": c, "f": list(f), "tau": group.format(ball.keys[t])}
                    for (c, f), t in sorted(classes.items(), key=lambda kv: kv[1])]

    gens = set()
    for vid, lab in labels.items():
        tau = ball.keys[classes[lab]]
        h = group.multiply(ball.keys[vid], group.inverse(tau))
        if not group.is_identity(h):
            gens.add(h)
    gens = sorted(gens, key=lambda h: (group.length(h), group.word(h)))
    cert.generator_keys = gens
    cert.generators = [group.format(h) for h in gens]
    if not gens:
        cert.notes.append("no non-trivial generators; subgroup is trivial at this scale")

    ver = verify_detection(ball, Y, gens)
    cert.residual, cert.orbit_size = ver.residual, ver.orbit_size
    cert.guards["residual"] = ver.guard
    cert.residual_bound = max(cert.R_rep + 1, 2 * cl.mu)

    # stability of the cluster structure when the region grows by 2
    R2 = grow_region(R)
    try:
        ball2 = ball_for(spec, R2, budget)
        Y2 = realize(pattern, ball2)
        _, cl2, _, _ = _cluster(ball2, Y2, k, theta, thr)
        cert.stability = {"region": region_label(R2), "mu": cl2.mu, "cluster_count": cl2.count,
                          "mu_stable": cl2.mu == cl.mu, "count_stable": cl2.count == cl.count}
    except HausdorffExceeds as exc:
        cert.stability = {"region": region_label(R2), "error": str(exc), "mu_stable": False, "count_stable": False}

    if not cert.stability.get("mu_stable"):
        cert.status = UNSTABLE
        cert.notes.append("mu changed when the region grew")
    elif gens and not isinstance(cert.residual, Exceeds) and cert.residual <= cert.residual_bound:
        cert.status = DETECTED
    else:
        cert.status = UNSTABLE
    return cert


def _nearest_cluster(ball, S: VertexSet, fam: TranslateFamily, cl: Clustering) -> int:
    best, best_c = None, 0
    gd = max(fam.compare_guard, S.guard)
    for c, rep in enumerate(cl.representatives):
        d = restricted_hausdorff(ball, S, fam.members[rep].vset, gd)
        v = d.lower_bound if isinstance(d, Exceeds) else d
        if best is None or v < best:
            best, best_c = v, c
    return best_c
