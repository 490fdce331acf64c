"""Declarative subsets of Cayley graphs and their realization inside a ball.

Patterns are small frozen dataclasses; :func:`realize` turns one into a
:class:`~coarsegeo.cayley.VertexSet`.  Words inside patterns are kept in the
user's notation (label strings or signed-integer tuples) and resolved against
the ball's group at realization time.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence, Union as TUnion


from .cayley import CayleyBall, VertexSet, neighborhood
from .groups import DirectProductGroup, FreeAbelianGroup, FreeGroup, Group, free_reduce

WordSpec = TUnion[str, tuple]

IRRATIONAL_SLOPES = {
    "golden": (1 + math.sqrt(5)) / 2,
    "sqrt2": math.sqrt(2),
    "sqrt3": math.sqrt(3),
}


class IncompatiblePattern(ValueError):
    pass


def _norm_word(w) -> WordSpec:
    if isinstance(w, str):
        return w
    if isinstance(w, dict):
        return ("vector",) + tuple(int(v) for v in w["vector"])
    return tuple(w)


def vec(*coords: int) -> tuple:
    """Free abelian exponent vector usable wherever a pattern takes a word."""
    return ("vector",) + tuple(coords)


def resolve_word(group: Group, w):
    """Canonical element for a pattern word (label string, signed word or ``vec``)."""
    if isinstance(w, tuple) and w[:1] == ("vector",):
        return group.element({"vector": list(w[1:])})
    return group.element(w)


@dataclass(frozen=True)
class SubgroupOrbit:
    generators: tuple

    def __init__(self, generators: Sequence):
        object.__setattr__(self, "generators", tuple(_norm_word(g) for g in generators))


@dataclass(frozen=True)
class Coset:
    rep: WordSpec
    generators: tuple

    def __init__(self, rep, generators: Sequence):
        object.__setattr__(self, "rep", _norm_word(rep))
        object.__setattr__(self, "generators", tuple(_norm_word(g) for g in generators))


@dataclass(frozen=True)
class DigitizedLine:
    """Digital line through the origin of Z^n (first two coordinates).

    Give a primitive integer ``direction`` (p, q), or an irrational ``tag``
    (golden, sqrt2, sqrt3), or a float ``slope``.  Non-rational lines are the
    Beatty sets {(x, floor(slope * x))}.
    """

    direction: tuple[int, int] | None = None
    tag: str | None = None
    slope: float | None = None

    def __post_init__(self):
        given = [self.direction is not None, self.tag is not None, self.slope is not None]
        if sum(given) != 1:
            raise IncompatiblePattern("DigitizedLine needs exactly one of direction, tag, slope")
        if self.direction is not None:
            p, q = (int(v) for v in self.direction)
            if (p, q) == (0, 0) or math.gcd(p, q) != 1:
                raise IncompatiblePattern(f"direction {self.direction} is not primitive")
            object.__setattr__(self, "direction", (p, q))
        if self.tag is not None and self.tag not in IRRATIONAL_SLOPES:
            raise IncompatiblePattern(f"unknown slope tag {self.tag!r}; known: {sorted(IRRATIONAL_SLOPES)}")


@dataclass(frozen=True)
class GeodesicWordLine:
    """Bi-infinite geodesic through e in a free group, labelled by a periodic
    word or by the Thue-Morse sequence (``tag="thue_morse"``)."""

    period: WordSpec | None = None
    tag: str | None = None

    def __post_init__(self):
        if (self.period is None) == (self.tag is None):
            raise IncompatiblePattern("GeodesicWordLine needs exactly one of period, tag")
        if self.tag is not None and self.tag != "thue_morse":
            raise IncompatiblePattern(f"unknown aperiodic tag {self.tag!r}")
        if self.period is not None:
            object.__setattr__(self, "period", _norm_word(self.period))


@dataclass(frozen=True)
class Fiber:
    """Coset ``base * G_factor`` of one factor of a direct product.

    Factors are numbered from 1, so in F2 x Z the Z fiber is ``Fiber(2)``.
    """

    factor: int
    base: WordSpec = ""


@dataclass(frozen=True)
class Neighborhood:
    inner: object
    r: int


@dataclass(frozen=True)
class Union:
    parts: tuple

    def __init__(self, parts: Sequence):
        object.__setattr__(self, "parts", tuple(parts))


@dataclass(frozen=True)
class QiImage:
    """Image of ``inner`` under a plane rotation snapped back to Z^2."""

    angle: float
    inner: object


@dataclass(frozen=True)
class Translated:
    """Left translate ``shift * inner``."""

    shift: WordSpec
    inner: object

    def __init__(self, shift, inner):
        object.__setattr__(self, "shift", _norm_word(shift))
        object.__setattr__(self, "inner", inner)


Pattern = TUnion[SubgroupOrbit, Coset, DigitizedLine, GeodesicWordLine, Fiber, Neighborhood, Union, QiImage, Translated]


# ---------------------------------------------------------------------------
# serialization


def pattern_to_dict(p) -> dict:
    if isinstance(p, SubgroupOrbit):
        return {"kind": "SubgroupOrbit", "generators": [_w2j(g) for g in p.generators]}
    if isinstance(p, Coset):
        return {"kind": "Coset", "rep": _w2j(p.rep), "generators": [_w2j(g) for g in p.generators]}
    if isinstance(p, DigitizedLine):
        d = {"kind": "DigitizedLine"}
        if p.direction is not None:
            d["direction"] = list(p.direction)
        if p.tag is not None:
            d["tag"] = p.tag
        if p.slope is not None:
            d["slope"] = p.slope
        return d
    if isinstance(p, GeodesicWordLine):
        return {"kind": "GeodesicWordLine", **({"period": _w2j(p.period)} if p.period is not None else {"tag": p.tag})}
    if isinstance(p, Fiber):
        return {"kind": "Fiber", "factor": p.factor, "base": _w2j(p.base)}
    if isinstance(p, Neighborhood):
        return {"kind": "Neighborhood", "r": p.r, "inner": pattern_to_dict(p.inner)}
    if isinstance(p, Union):
        return {"kind": "Union", "parts": [pattern_to_dict(q) for q in p.parts]}
    if isinstance(p, QiImage):
        return {"kind": "QiImage", "map": {"rotate": p.angle}, "inner": pattern_to_dict(p.inner)}
    if isinstance(p, Translated):
        return {"kind": "Translated", "shift": _w2j(p.shift), "inner": pattern_to_dict(p.inner)}
    raise IncompatiblePattern(f"not a pattern: {p!r}")


def _w2j(w):
    if isinstance(w, str):
        return w
    if w[:1] == ("vector",):
        return {"vector": list(w[1:])}
    return list(w)


def _j2w(w):
    return _norm_word(w)


def pattern_from_dict(d: dict):
    if not isinstance(d, dict) or "kind" not in d:
        raise IncompatiblePattern("pattern must be an object with a 'kind' field")
    kind = d["kind"]
    try:
        if kind == "SubgroupOrbit":
            return SubgroupOrbit([_j2w(g) for g in d["generators"]])
        if kind == "Coset":
            return Coset(_j2w(d["rep"]), [_j2w(g) for g in d["generators"]])
        if kind == "DigitizedLine":
            direction = d.get("direction")
            return DigitizedLine(tuple(direction) if direction is not None else None, d.get("tag"), d.get("slope"))
        if kind == "GeodesicWordLine":
            return GeodesicWordLine(_j2w(d["period"]) if "period" in d else None, d.get("tag"))
        if kind == "Fiber":
            return Fiber(int(d["factor"]), _j2w(d.get("base", "")))
        if kind == "Neighborhood":
            return Neighborhood(pattern_from_dict(d["inner"]), int(d["r"]))
        if kind == "Union":
            return Union([pattern_from_dict(q) for q in d["parts"]])
        if kind == "Translated":
            return Translated(_j2w(d["shift"]), pattern_from_dict(d["inner"]))
        if kind == "QiImage":
            m = d.get("map", {})
            if set(m) != {"rotate"}:
                raise IncompatiblePattern("QiImage supports only {'rotate': angle}")
            return QiImage(float(m["rotate"]), pattern_from_dict(d["inner"]))
    except KeyError as exc:
        raise IncompatiblePattern(f"{kind} pattern is missing field {exc}") from None
    raise IncompatiblePattern(f"unknown pattern kind {kind!r}")


# ---------------------------------------------------------------------------
# realization


def _orbit_bfs(ball: CayleyBall, start, gens: list) -> list[int]:
    group = ball.group
    steps = gens + [group.inverse(g) for g in gens]
    seen = {start}
    out = []
    q = deque([start])
    while q:
        h = q.popleft()
        i = ball.id_of(h)
        if i < 0:
            continue
        out.append(i)
        for s in steps:
            c = group.multiply(h, s)
            if c not in seen and ball.contains(c):
                seen.add(c)
                q.append(c)
    return out


def subgroup_generators(group: Group, generators: Sequence) -> list:
    out = []
    for g in generators:
        k = resolve_word(group, g)
        if group.is_identity(k):
            raise IncompatiblePattern(f"subgroup generator {g!r} normalizes to the identity")
        out.append(k)
    return out


def thue_morse(n: int) -> int:
    return bin(n).count("1") & 1


def _line_letters(group: FreeGroup, p: GeodesicWordLine, n: int) -> tuple[list[int], list[int]]:
    """Letters at positions 0..n-1 and -1..-n of the bi-infinite label."""
    a, b = 1, 2
    if p.tag == "thue_morse":
        if group.ngens < 2:
            raise IncompatiblePattern("thue_morse line needs rank >= 2")
        pos = [a if thue_morse(k) == 0 else b for k in range(n)]
        neg = [b if thue_morse(k) == 0 else a for k in range(n)]
        return pos, neg
    w = group.normalize(group.parse(p.period) if isinstance(p.period, str) else p.period)
    if not w or w[0] == -w[-1]:
        raise IncompatiblePattern(f"period {p.period!r} must be non-empty and cyclically reduced")
    L = len(w)
    pos = [w[k % L] for k in range(n)]
    neg = [w[(-k - 1) % L] for k in range(n)]
    return pos, neg


def _max_dist(ball: CayleyBall) -> int:
    return int(ball.dist.max()) if ball.size else 0


def realize(pattern, ball: CayleyBall) -> VertexSet:
    """Realize ``pattern`` inside ``ball``; exact patterns carry guard 0."""
    group = ball.group
    if isinstance(pattern, VertexSet):
        return pattern
    if isinstance(pattern, SubgroupOrbit):
        gens = subgroup_generators(group, pattern.generators)
        return VertexSet.from_ids(ball, _orbit_bfs(ball, group.identity, gens))
    if isinstance(pattern, Coset):
        gens = subgroup_generators(group, pattern.generators)
        return VertexSet.from_ids(ball, _orbit_bfs(ball, resolve_word(group, pattern.rep), gens))
    if isinstance(pattern, DigitizedLine):
        if not isinstance(group, FreeAbelianGroup) or group.ngens < 2:
            raise IncompatiblePattern("DigitizedLine needs FreeAbelian of rank >= 2")
        X = _max_dist(ball)
        pad = (0,) * (group.ngens - 2)
        pts = []
        if pattern.direction is not None:
            p, q = pattern.direction
            if abs(q) <= abs(p):
                if p < 0:
                    p, q = -p, -q
                pts = [(x, (q * x) // p) for x in range(-X, X + 1)]
            else:
                if q < 0:
                    p, q = -p, -q
                pts = [((p * y) // q, y) for y in range(-X, X + 1)]
        else:
            alpha = IRRATIONAL_SLOPES[pattern.tag] if pattern.tag is not None else float(pattern.slope)
            pts = [(x, math.floor(alpha * x)) for x in range(-X, X + 1)]
        return VertexSet.from_keys(ball, (pt + pad for pt in pts))
    if isinstance(pattern, GeodesicWordLine):
        if not isinstance(group, FreeGroup):
            raise IncompatiblePattern("GeodesicWordLine is only valid over Free groups")
        n = _max_dist(ball)
        pos, neg = _line_letters(group, pattern, n)
        keys = [()]
        for k in range(1, n + 1):
            keys.append(tuple(pos[:k]))
            keys.append(tuple(-x for x in neg[:k]))
        return VertexSet.from_keys(ball, (free_reduce(k) for k in keys))
    if isinstance(pattern, Fiber):
        if not isinstance(group, DirectProductGroup):
            raise IncompatiblePattern("Fiber is only valid over DirectProduct groups")
        f = pattern.factor - 1
        if not 0 <= f < len(group.factors):
            raise IncompatiblePattern(f"factor index {pattern.factor} out of range 1..{len(group.factors)}")
        base = resolve_word(group, pattern.base)
        others = [j for j in range(len(group.factors)) if j != f]
        target = tuple(base[j] for j in others)
        ids = [i for i, k in enumerate(ball.keys) if tuple(k[j] for j in others) == target]
        return VertexSet.from_ids(ball, ids)
    if isinstance(pattern, Neighborhood):
        return neighborhood(ball, realize(pattern.inner, ball), pattern.r)
    if isinstance(pattern, Union):
        parts = [realize(q, ball) for q in pattern.parts]
        if not parts:
            raise IncompatiblePattern("empty Union")
        out = parts[0]
        for q in parts[1:]:
            out = out | q
        return out
    if isinstance(pattern, QiImage):
        return qi_rotate(pattern.angle, pattern.inner, ball)
    if isinstance(pattern, Translated):
        return realize(pattern.inner, ball).translate(resolve_word(group, pattern.shift))
    raise IncompatiblePattern(f"not a pattern: {pattern!r}")


def _snap(v: float) -> int:
    """Nearest integer, exact halves going down."""
    f = math.floor(v)
    frac = v - f
    if abs(frac - 0.5) < 1e-9:
        return f
    return f + 1 if frac > 0.5 else f


def rotate_point(angle: float, key: tuple[int, int]) -> tuple[int, int]:
    """Plane rotation of a lattice point followed by nearest-point snapping."""
    c, s = math.cos(angle), math.sin(angle)
    x, y = key
    return _snap(c * x - s * y), _snap(s * x + c * y)


def qi_rotate(angle: float, inner, ball: CayleyBall) -> VertexSet:
    """Rotate the members of ``inner`` in the plane and snap to the nearest lattice point."""
    group = ball.group
    if not isinstance(group, FreeAbelianGroup) or group.ngens != 2:
        raise IncompatiblePattern("qi_rotate needs FreeAbelian(2)")
    S = realize(inner, ball)
    out = VertexSet.from_keys(ball, [rotate_point(angle, k) for k in S.keys()])
    return out.with_guard(S.guard + 2)


def pretranslate_to_identity(pattern, ball: CayleyBall):
    """Pattern moved so that it contains e, its realization, and the shift used.

    The shift is the inverse of the member closest to e (least id)."""
    Y = realize(pattern, ball)
    if Y.members[ball.identity_id]:
        return pattern, Y, ball.group.identity
    ids = Y.ids
    if ids.size == 0:
        raise IncompatiblePattern("empty pattern cannot be normalized to contain e")
    shift = ball.group.inverse(ball.keys[int(ids.min())])
    moved = Translated(tuple(ball.group.word(shift)), pattern)
    return moved, realize(moved, ball), shift


__all__ = [
    "SubgroupOrbit", "Coset", "DigitizedLine", "GeodesicWordLine", "Fiber", "Neighborhood", "Union",
    "QiImage", "Translated", "IncompatiblePattern", "realize", "qi_rotate", "rotate_point", "pattern_to_dict", "pattern_from_dict",
    "pretranslate_to_identity", "vec", "resolve_word", "subgroup_generators", "thue_morse",
]
