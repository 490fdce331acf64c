"""Finite balls of Cayley graphs and metric operations on their vertex sets.

A :class:`CayleyBall` is built once by breadth-first search and is immutable
afterwards.  Vertex ids follow BFS discovery order with generators tried in the
order x, x^-1, y, y^-1, ..., so id order is shortlex order on the
representative words.

Every vertex carries a *margin*: how many edges it sits inside the region
boundary.  For a metric ball this is ``R - dist``; for a product box over a
direct product it is the smallest slack over the factors.  Guards are margins:
a set with guard ``g`` is trusted only on vertices with ``margin >= g``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .groups import DirectProductGroup, Group, GroupSpec, make_group

DEFAULT_BUDGET = 2_000_000
UNREACHED = -1


class BudgetExceeded(RuntimeError):
    def __init__(self, projected: int, budget: int):
        super().__init__(f"projected vertex count {projected} exceeds budget {budget}")
        self.projected = projected
        self.budget = budget


class EmptyAfterGuard(ValueError):
    pass


@dataclass(frozen=True)
class Exceeds:
    """Restricted Hausdorff distance that could not be certified inside the ball.

    The true value is at least ``lower_bound``; ``observed`` is the
    ball-restricted value, an upper bound on the distance to the truncated set.
    """

    lower_bound: int
    observed: float

    def __str__(self):
        return f">={self.lower_bound}"


# ---------------------------------------------------------------------------
# vertex counts


def _sphere_sizes(spec: GroupSpec, R: int) -> list[int] | None:
    fam, p = spec.family, spec.param
    if fam == "FreeAbelian":
        out = [1]
        for k in range(1, R + 1):
            out.append(sum(2 ** j * math.comb(p, j) * math.comb(k - 1, j - 1) for j in range(1, min(p, k) + 1)))
        return out
    if fam == "Free":
        return [1] + [2 * p * (2 * p - 1) ** (k - 1) for k in range(1, R + 1)]
    if fam == "DirectProduct":
        parts = [_sphere_sizes(f, R) for f in p]
        if any(x is None for x in parts):
            return None
        acc = parts[0]
        for q in parts[1:]:
            acc = [sum(acc[i] * q[k - i] for i in range(k + 1)) for k in range(R + 1)]
        return acc
    return None


def projected_count(spec: GroupSpec, R: int, factor_radii: Sequence[int] | None = None) -> int | None:
    """Exact vertex count of the region when a closed form is available, else None."""
    if factor_radii is not None:
        total = 1
        for f, r in zip(spec.param, factor_radii):
            s = _sphere_sizes(f, r)
            if s is None:
                return None
            total *= sum(s)
        return total
    s = _sphere_sizes(spec, R)
    return None if s is None else sum(s)


# ---------------------------------------------------------------------------
# the ball


class CayleyBall:
    """Radius-R ball about the identity (or a product box for direct products)."""

    def __init__(self, spec: GroupSpec, group: Group, keys: list, index: dict, nbr: np.ndarray,
                 dist: np.ndarray, margin: np.ndarray, R: int, factor_radii: tuple[int, ...] | None):
        self.spec = spec
        self.group = group
        self.keys = keys
        self.index = index
        self.nbr = nbr
        self.dist = dist
        self.margin = margin
        self.R = R
        self.factor_radii = factor_radii
        self.gens = group.gens

    def __len__(self):
        return len(self.keys)

    def __repr__(self):
        shape = f"box{self.factor_radii}" if self.factor_radii else f"R={self.R}"
        return f"CayleyBall({self.spec.family}, {shape}, {len(self)} vertices)"

    @property
    def size(self) -> int:
        return len(self.keys)

    @property
    def identity_id(self) -> int:
        return 0

    def id_of(self, key) -> int:
        """Vertex id of ``key`` or -1 when it lies outside the ball."""
        return self.index.get(key, -1)

    def contains(self, key) -> bool:
        return key in self.index

    def guarded(self, guard: int) -> np.ndarray:
        return self.margin >= guard

    @cached_property
    def boundary(self) -> np.ndarray:
        return self.margin == 0

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n, m = self.nbr.shape
        rows = np.repeat(np.arange(n), m)
        cols = self.nbr.ravel()
        keep = cols >= 0
        a = sp.csr_matrix((np.ones(keep.sum(), dtype=np.int8), (rows[keep], cols[keep])), shape=(n, n))
        a.data[:] = 1
        return a

    def describe(self) -> dict:
        d = {"vertices": self.size, "R": self.R}
        if self.factor_radii:
            d["factor_radii"] = list(self.factor_radii)
        return d

    # -- distances

    def bfs(self, sources: np.ndarray, allowed: np.ndarray | None = None, max_dist: int | None = None) -> np.ndarray:
        """Multi-source BFS distances inside the ball (``UNREACHED`` = -1).

        ``sources`` is a boolean mask or an id array; ``allowed`` optionally
        restricts the vertices the search may enter.
        """
        dist = np.full(self.size, UNREACHED, dtype=np.int32)
        src = np.flatnonzero(sources) if sources.dtype == bool else np.asarray(sources, dtype=np.int64)
        if allowed is not None:
            src = src[allowed[src]]
        dist[src] = 0
        frontier = src
        d = 0
        nbr = self.nbr
        while frontier.size:
            if max_dist is not None and d >= max_dist:
                break
            d += 1
            cand = nbr[frontier].ravel()
            cand = cand[cand >= 0]
            cand = cand[dist[cand] == UNREACHED]
            if allowed is not None:
                cand = cand[allowed[cand]]
            cand = np.unique(cand)
            dist[cand] = d
            frontier = cand
        return dist

    def distance(self, u: int, v: int) -> int:
        d = self.bfs(np.array([u]))
        return int(d[v])

    # -- translation

    def left_translate_ids(self, g, ids: Iterable[int]) -> np.ndarray:
        """Ids of ``g * v`` for v in ``ids`` that land inside the ball."""
        mul = self.group.multiply
        out = []
        for i in ids:
            j = self.index.get(mul(g, self.keys[i]), -1)
            if j >= 0:
                out.append(j)
        return np.unique(np.array(out, dtype=np.int64))

    def word_length(self, key) -> int:
        return self.group.length(key)

    # -- dumps

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "word", "dist"])
            for i, k in enumerate(self.keys):
                w.writerow([i, self.group.format(k), int(self.dist[i])])


def build_ball(spec: GroupSpec, R: int | None = None, *, factor_radii: Sequence[int] | None = None,
               budget: int = DEFAULT_BUDGET) -> CayleyBall:
    """Build the radius-``R`` ball, or the product box ``factor_radii`` for a direct product.

    Raises :class:`BudgetExceeded` before (closed forms) or during (BFS) the
    build when the vertex count would pass ``budget``.
    """
    group = make_group(spec)
    if factor_radii is not None:
        if not isinstance(group, DirectProductGroup):
            raise ValueError("factor_radii only applies to DirectProduct groups")
        factor_radii = tuple(int(r) for r in factor_radii)
        if len(factor_radii) != len(group.factors) or min(factor_radii) < 0:
            raise ValueError("factor_radii needs one non-negative radius per factor")
        if not group.geodesic:
            raise ValueError("product boxes need geodesic normal forms in every factor")
        R = min(factor_radii)
    if R is None or R < 0:
        raise ValueError("radius must be >= 0")
    proj = projected_count(spec, R, factor_radii)
    if proj is not None and proj > budget:
        raise BudgetExceeded(proj, budget)

    gens = group.gens
    mul_gen = group.mul_gen
    keys = [group.identity]
    index = {group.identity: 0}
    dist = [0]
    nbr_rows: list[list[int]] = []
    box = factor_radii is not None
    if box:
        flen = [tuple(0 for _ in factor_radii)]
        factor_of = group.factor_of
        flength = [f.length for f in group.factors]
    head = 0
    while head < len(keys):
        v = keys[head]
        dv = dist[head]
        row = []
        for g in gens:
            c = mul_gen(v, g)
            j = index.get(c)
            if j is None:
                if box:
                    k, _ = factor_of(g)
                    lk = flength[k](c[k])
                    if lk > factor_radii[k]:
                        row.append(-1)
                        continue
                    fl = list(flen[head])
                    fl[k] = lk
                elif dv + 1 > R:
                    row.append(-1)
                    continue
                j = len(keys)
                keys.append(c)
                index[c] = j
                dist.append(dv + 1)
                if box:
                    flen.append(tuple(fl))
                if len(keys) > budget:
                    raise BudgetExceeded(len(keys), budget)
            row.append(j)
        nbr_rows.append(row)
        head += 1

    nbr = np.array(nbr_rows, dtype=np.int64).reshape(len(keys), len(gens))
    dist_a = np.array(dist, dtype=np.int32)
    if box:
        fl = np.array(flen, dtype=np.int32)
        margin = (np.array(factor_radii, dtype=np.int32)[None, :] - fl).min(axis=1)
    else:
        margin = (R - dist_a).astype(np.int32)
    return CayleyBall(spec, group, keys, index, nbr, dist_a, margin, R, factor_radii)


# ---------------------------------------------------------------------------
# vertex sets


@dataclass(frozen=True, eq=False)
class VertexSet:
    """Subset of a ball with the width of its untrusted boundary band."""

    ball: CayleyBall
    members: np.ndarray
    guard: int = 0

    def __post_init__(self):
        if self.members.dtype != bool or self.members.shape != (self.ball.size,):
            raise ValueError("members must be a boolean mask over the ball")
        if self.guard < 0:
            raise ValueError("guard must be >= 0")

    @classmethod
    def from_ids(cls, ball: CayleyBall, ids: Iterable[int], guard: int = 0) -> VertexSet:
        m = np.zeros(ball.size, dtype=bool)
        ids = np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64)
        m[ids] = True
        return cls(ball, m, guard)

    @classmethod
    def from_keys(cls, ball: CayleyBall, keys: Iterable, guard: int = 0) -> VertexSet:
        ids = [ball.index[k] for k in keys if k in ball.index]
        return cls.from_ids(ball, ids, guard)

    @property
    def ids(self) -> np.ndarray:
        return np.flatnonzero(self.members)

    def __len__(self):
        return int(self.members.sum())

    def __contains__(self, key) -> bool:
        i = self.ball.id_of(key)
        return i >= 0 and bool(self.members[i])

    def keys(self) -> list:
        return [self.ball.keys[i] for i in self.ids]

    def trusted(self, guard: int | None = None) -> np.ndarray:
        """Members whose margin is at least ``guard`` (default: own guard)."""
        g = self.guard if guard is None else guard
        return self.members & (self.ball.margin >= g)

    def with_guard(self, guard: int) -> VertexSet:
        return VertexSet(self.ball, self.members, guard)

    def __or__(self, other: VertexSet) -> VertexSet:
        return VertexSet(self.ball, self.members | other.members, max(self.guard, other.guard))

    def __and__(self, other: VertexSet) -> VertexSet:
        return VertexSet(self.ball, self.members & other.members, max(self.guard, other.guard))

    def issubset(self, other: VertexSet) -> bool:
        return not np.any(self.members & ~other.members)

    def same_members(self, other: VertexSet) -> bool:
        return bool(np.array_equal(self.members, other.members))

    def translate(self, g) -> VertexSet:
        """Left translate ``g * S`` recomputed in the ball; guard grows by ``|g|``."""
        ids = self.ball.left_translate_ids(g, self.ids)
        return VertexSet.from_ids(self.ball, ids, self.guard + self.ball.word_length(g))


def neighborhood(ball: CayleyBall, S: VertexSet, r: int) -> VertexSet:
    """Closed r-neighborhood ``N_r(S)`` inside the ball."""
    if S.ball is not ball:
        raise ValueError("vertex set belongs to a different ball")
    if r < 0:
        raise ValueError("r must be >= 0")
    if r == 0:
        return S
    d = ball.bfs(S.members, max_dist=r)
    return VertexSet(ball, d != UNREACHED, S.guard + r)


def default_hausdorff_guard(ball: CayleyBall) -> int:
    """Guard under which the distance from a trusted point to any set containing
    e or a neighbour of e is always certified inside the ball."""
    return (ball.R + 2) // 2


def directed_distance(ball: CayleyBall, A: VertexSet, B: VertexSet, guard: int,
                      b_dist: np.ndarray | None = None, policy: str = "margin"):
    """``max_{a in A, margin >= guard} d(a, B)`` with certification.

    ``policy="margin"`` certifies against the untruncated B: a partner farther
    than the margin of ``a`` might be beaten by a point outside the ball.
    ``policy="reach"`` measures against the truncated B and only gives up when
    no partner lies within ``R - guard``.
    """
    if policy not in ("margin", "reach"):
        raise ValueError(f"unknown policy {policy!r}")
    a_ids = np.flatnonzero(A.members & (ball.margin >= guard))
    if a_ids.size == 0:
        raise EmptyAfterGuard(f"set is empty after truncation to margin >= {guard}")
    if not B.members.any():
        return Exceeds(lower_bound=int(ball.margin[a_ids].min()) + 1, observed=math.inf)
    d = ball.bfs(B.members) if b_dist is None else b_dist
    da = d[a_ids]
    marg = ball.margin[a_ids] if policy == "margin" else np.full(a_ids.size, ball.R - guard)
    unreached = da == UNREACHED
    bad = unreached | (da > marg)
    if bad.any():
        # a true partner within the margin would have been found inside the ball
        lower = int(np.max(np.where(unreached, marg + 1, np.minimum(da, marg + 1))))
        observed = math.inf if unreached.any() else float(da.max())
        return Exceeds(lower_bound=lower, observed=observed)
    return int(da.max())


def restricted_hausdorff(ball: CayleyBall, A: VertexSet, B: VertexSet, guard: int | None = None,
                         policy: str = "margin"):
    """Hausdorff distance between A and B computed inside the guarded ball.

    Returns an int, or :class:`Exceeds` when some truncated point has no
    partner certifiably within its margin (see :func:`directed_distance`).
    """
    g = default_hausdorff_guard(ball) if guard is None else guard
    g = max(g, A.guard, B.guard)
    d1 = directed_distance(ball, A, B, g, policy=policy)
    d2 = directed_distance(ball, B, A, g, policy=policy)
    if isinstance(d1, Exceeds) or isinstance(d2, Exceeds):
        lo = max(x.lower_bound if isinstance(x, Exceeds) else x for x in (d1, d2))
        obs = max(x.observed if isinstance(x, Exceeds) else x for x in (d1, d2))
        return Exceeds(lower_bound=lo, observed=obs)
    return max(d1, d2)


def is_exceeds(x) -> bool:
    return isinstance(x, Exceeds)
