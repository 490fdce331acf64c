"""Finitely generated groups with a solvable word problem.

Every group is presented to the rest of the package as a normal-form oracle:
elements are hashable canonical keys, generators are signed integers
``1..n`` (``-i`` is the inverse of generator ``i``), and right multiplication
by a generator is the only operation the ball builder needs.

Supported families::

    FreeAbelian(rank)             key: exponent vector
    Free(rank)                    key: freely reduced word
    DirectProduct([specs])        key: tuple of factor keys
    FreeProductOfCyclics(orders)  key: alternating syllables (factor, exponent)
    Surface(genus)                key: Dehn-reduced word with quotient hash
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

FAMILIES = ("FreeAbelian", "Free", "DirectProduct", "FreeProductOfCyclics", "Surface")

Word = tuple[int, ...]


class GroupError(ValueError):
    pass


class UnknownGenerator(GroupError):
    pass


@dataclass(frozen=True)
class GroupSpec:
    """Declarative description of a group family.

    ``param`` is the rank, the genus, the tuple of cyclic orders (0 means
    infinite) or the tuple of factor specs, depending on ``family``.
    """

    family: str
    param: int | tuple = 1
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GroupError(f"unknown family {self.family!r}")
        p = self.param
        if self.family in ("FreeAbelian", "Free"):
            if not isinstance(p, int) or p < 1:
                raise GroupError(f"{self.family} needs rank >= 1, got {p!r}")
        elif self.family == "Surface":
            if not isinstance(p, int) or p < 2:
                raise GroupError(f"Surface needs genus >= 2, got {p!r}")
        elif self.family == "FreeProductOfCyclics":
            p = tuple(int(n) for n in p)
            if len(p) < 2 or any(n < 0 or n == 1 for n in p):
                raise GroupError(f"FreeProductOfCyclics needs >= 2 orders in {{0, 2, 3, ...}}, got {p!r}")
            object.__setattr__(self, "param", p)
        elif self.family == "DirectProduct":
            p = tuple(p)
            if len(p) < 1 or not all(isinstance(f, GroupSpec) for f in p):
                raise GroupError("DirectProduct needs a non-empty list of GroupSpec factors")
            object.__setattr__(self, "param", p)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(set(labels)):
                raise GroupError(f"duplicate generator labels {labels}")
            object.__setattr__(self, "labels", labels)

    # convenience constructors
    @classmethod
    def free_abelian(cls, rank: int, labels=None) -> GroupSpec:
        return cls("FreeAbelian", rank, labels)

    @classmethod
    def free(cls, rank: int, labels=None) -> GroupSpec:
        return cls("Free", rank, labels)

    @classmethod
    def surface(cls, genus: int, labels=None) -> GroupSpec:
        return cls("Surface", genus, labels)

    @classmethod
    def free_product_of_cyclics(cls, orders: Sequence[int], labels=None) -> GroupSpec:
        return cls("FreeProductOfCyclics", tuple(orders), labels)

    @classmethod
    def direct_product(cls, factors: Sequence[GroupSpec], labels=None) -> GroupSpec:
        return cls("DirectProduct", tuple(factors), labels)

    def to_dict(self) -> dict:
        if self.family == "DirectProduct":
            d = {"family": self.family, "factors": [f.to_dict() for f in self.param]}
        elif self.family == "FreeProductOfCyclics":
            d = {"family": self.family, "orders": list(self.param)}
        elif self.family == "Surface":
            d = {"family": self.family, "genus": self.param}
        else:
            d = {"family": self.family, "rank": self.param}
        if self.labels is not None:
            d["labels"] = list(self.labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> GroupSpec:
        if not isinstance(d, dict) or "family" not in d:
            raise GroupError("group spec must be an object with a 'family' field")
        fam = d["family"]
        labels = d.get("labels")
        if fam == "DirectProduct":
            return cls(fam, tuple(cls.from_dict(f) for f in d.get("factors", [])), labels)
        if fam == "FreeProductOfCyclics":
            return cls(fam, tuple(d.get("orders", [])), labels)
        if fam == "Surface":
            return cls(fam, d.get("genus", 0), labels)
        return cls(fam, d.get("rank", 0), labels)


# ---------------------------------------------------------------------------
# word helpers


def free_reduce(word: Iterable[int]) -> Word:
    out: list[int] = []
    for x in word:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def invert_word(word: Sequence[int]) -> Word:
    return tuple(-x for x in reversed(word))


def generator_order(n: int) -> list[int]:
    """Signed generators in the fixed tie-breaking order x, x^-1, y, y^-1, ..."""
    out = []
    for i in range(1, n + 1):
        out += [i, -i]
    return out


def _default_labels(spec: GroupSpec) -> list[str]:
    fam, p = spec.family, spec.param
    if fam == "FreeAbelian":
        base = ["x", "y", "z", "w"]
        return base[:p] if p <= 4 else [f"x{i}" for i in range(1, p + 1)]
    if fam == "Free":
        base = [c for c in "abcdfghjkmnpqrsuvw"]
        return base[:p] if p <= len(base) else [f"a{i}" for i in range(1, p + 1)]
    if fam == "FreeProductOfCyclics":
        base = ["s", "t", "u", "v"]
        return base[: len(p)] if len(p) <= 4 else [f"s{i}" for i in range(1, len(p) + 1)]
    if fam == "Surface":
        out = []
        for i in range(1, p + 1):
            out += [f"a{i}", f"b{i}"]
        return out
    # DirectProduct: concatenate, disambiguate collisions by factor index.
    # A trailing infinite cyclic factor is the centre "z" (F2 x Z = <a, b, z>).
    per = [list(make_group(f).labels) for f in p]
    if len(per) > 1 and p[-1].family == "FreeAbelian" and p[-1].param == 1 and p[-1].labels is None:
        per[-1] = ["z"]
    flat = [lab for labs in per for lab in labs]
    if len(flat) == len(set(flat)):
        return flat
    return [f"{lab}_{k}" for k, labs in enumerate(per) for lab in labs]


# ---------------------------------------------------------------------------
# groups


class Group:
    """Normal-form oracle for one group family.

    Elements are canonical hashable keys.  ``word(key)`` renders the canonical
    word, ``length(key)`` its length.
    """

    geodesic = True

    def __init__(self, spec: GroupSpec, ngens: int):
        self.spec = spec
        self.ngens = ngens
        labels = list(spec.labels) if spec.labels is not None else _default_labels(spec)
        if len(labels) != ngens:
            raise GroupError(f"{spec.family} needs {ngens} labels, got {len(labels)}")
        self.labels = labels
        self._label_index = {lab: i + 1 for i, lab in enumerate(labels)}
        self.gens = generator_order(ngens)

    # -- to be provided by families
    identity: Hashable

    def mul_gen(self, a, g: int):
        raise NotImplementedError

    def word(self, a) -> Word:
        raise NotImplementedError

    def length(self, a) -> int:
        return len(self.word(a))

    # -- generic operations
    def _check(self, word: Iterable[int]) -> list[int]:
        out = []
        for x in word:
            if not isinstance(x, (int, np.integer)) or x == 0 or abs(x) > self.ngens:
                raise UnknownGenerator(f"letter {x!r} is not a signed generator of {self.spec.family}")
            out.append(int(x))
        return out

    def normalize(self, word: Iterable[int]):
        a = self.identity
        for x in self._check(word):
            a = self.mul_gen(a, x)
        return a

    def multiply(self, a, b):
        for x in self.word(b):
            a = self.mul_gen(a, x)
        return a

    def inverse(self, a):
        return self.normalize(invert_word(self.word(a)))

    def is_identity(self, a) -> bool:
        return a == self.identity

    def parse(self, text: str | Sequence[str]) -> Word:
        """Parse ``"a b A"``, ``"a^2 b^-1"``, ``"abA"`` or a token list into a signed word."""
        if isinstance(text, str):
            s = text.strip()
            if s in ("", "1", "e") and s not in self._label_index:
                return ()
            tokens = s.split()
            if len(tokens) == 1 and s not in self._label_index and "^" not in s \
                    and all(len(lab) == 1 for lab in self.labels):
                tokens = list(s)
        else:
            tokens = list(text)
        out = []
        for tok in tokens:
            if isinstance(tok, (int, np.integer)):
                out.append(int(tok))
                continue
            if tok in ("1", "e") and tok not in self._label_index:
                continue
            if tok in self._label_index:
                out.append(self._label_index[tok])
            elif "^" in tok and tok.split("^", 1)[0] in self._label_index:
                base, exp = tok.split("^", 1)
                try:
                    n = int(exp)
                except ValueError:
                    raise UnknownGenerator(f"bad exponent in token {tok!r}") from None
                x = self._label_index[base]
                out.extend([x if n > 0 else -x] * abs(n))
            elif tok.swapcase() in self._label_index and tok != tok.swapcase():
                out.append(-self._label_index[tok.swapcase()])
            else:
                raise UnknownGenerator(f"token {tok!r} is not a generator label of {self.spec.family} {self.labels}")
        return tuple(self._check(out))

    def element(self, text: str | Sequence[str] | Sequence[int] | dict):
        """Canonical form of a label string, a label list, or a signed-index word.

        Free abelian groups also take ``{"vector": [..]}`` exponent vectors."""
        if isinstance(text, dict):
            if set(text) != {"vector"} or self.spec.family != "FreeAbelian":
                raise GroupError("only FreeAbelian elements may be given as {'vector': [...]}")
            vec = tuple(int(v) for v in text["vector"])
            if len(vec) != self.ngens:
                raise GroupError(f"vector needs {self.ngens} entries")
            return vec
        if isinstance(text, str):
            return self.normalize(self.parse(text))
        seq = list(text)
        if seq and all(isinstance(x, (int, np.integer)) for x in seq):
            return self.normalize(seq)
        return self.normalize(self.parse(seq))

    def format(self, a) -> str:
        w = self.word(a)
        if not w:
            return "e"
        out = []
        i = 0
        while i < len(w):
            j = i
            while j < len(w) and w[j] == w[i]:
                j += 1
            n = (j - i) * (1 if w[i] > 0 else -1)
            lab = self.labels[abs(w[i]) - 1]
            out.append(lab if n == 1 else f"{lab}^{n}")
            i = j
        return " ".join(out)

    def info(self) -> dict:
        return {
            "family": self.spec.family,
            "generator_count": self.ngens,
            "labels": list(self.labels),
            "finite": False,
            "geodesic_normal_form": self.geodesic,
        }


class FreeAbelianGroup(Group):
    def __init__(self, spec):
        super().__init__(spec, spec.param)
        self.identity = (0,) * spec.param

    def mul_gen(self, a, g):
        i = abs(g) - 1
        return a[:i] + (a[i] + (1 if g > 0 else -1),) + a[i + 1:]

    def multiply(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def inverse(self, a):
        return tuple(-x for x in a)

    def normalize(self, word):
        v = [0] * self.ngens
        for x in self._check(word):
            v[abs(x) - 1] += 1 if x > 0 else -1
        return tuple(v)

    def word(self, a):
        out: list[int] = []
        for i, e in enumerate(a):
            out += [i + 1 if e > 0 else -(i + 1)] * abs(e)
        return tuple(out)

    def length(self, a):
        return sum(abs(e) for e in a)


class FreeGroup(Group):
    def __init__(self, spec):
        super().__init__(spec, spec.param)
        self.identity = ()

    def mul_gen(self, a, g):
        if a and a[-1] == -g:
            return a[:-1]
        return a + (g,)

    def normalize(self, word):
        return free_reduce(self._check(word))

    def multiply(self, a, b):
        return free_reduce(a + b)

    def inverse(self, a):
        return invert_word(a)

    def word(self, a):
        return a

    def length(self, a):
        return len(a)


class FreeProductOfCyclicsGroup(Group):
    """Free product of cyclic groups, one generator per factor.

    A key is a tuple of syllables ``(factor, exponent)`` with consecutive
    factors distinct and each exponent the shortest representative of its
    residue (ties towards the positive exponent).
    """

    def __init__(self, spec):
        super().__init__(spec, len(spec.param))
        self.orders = spec.param
        self.identity = ()

    def _reduce_exp(self, f, e):
        n = self.orders[f]
        if n == 0:
            return e
        e %= n
        if e > n // 2:
            e -= n
        return e

    def mul_gen(self, a, g):
        f = abs(g) - 1
        step = 1 if g > 0 else -1
        if a and a[-1][0] == f:
            e = self._reduce_exp(f, a[-1][1] + step)
            return a[:-1] if e == 0 else a[:-1] + ((f, e),)
        return a + ((f, self._reduce_exp(f, step)),)

    def multiply(self, a, b):
        out = list(a)
        for f, e in b:
            if out and out[-1][0] == f:
                ne = self._reduce_exp(f, out[-1][1] + e)
                if ne == 0:
                    out.pop()
                else:
                    out[-1] = (f, ne)
            else:
                out.append((f, e))
        return tuple(out)

    def inverse(self, a):
        return tuple((f, self._reduce_exp(f, -e)) for f, e in reversed(a))

    def word(self, a):
        out: list[int] = []
        for f, e in a:
            out += [f + 1 if e > 0 else -(f + 1)] * abs(e)
        return tuple(out)

    def length(self, a):
        return sum(abs(e) for _, e in a)


class DirectProductGroup(Group):
    def __init__(self, spec):
        self.factors = [make_group(f) for f in spec.param]
        self.offsets = list(itertools.accumulate([0] + [f.ngens for f in self.factors]))
        super().__init__(spec, self.offsets[-1])
        self.identity = tuple(f.identity for f in self.factors)
        self.geodesic = all(f.geodesic for f in self.factors)
        self._gen_map = {}
        for k, f in enumerate(self.factors):
            for j in range(1, f.ngens + 1):
                self._gen_map[self.offsets[k] + j] = (k, j)

    def factor_of(self, g: int) -> tuple[int, int]:
        """Map a global signed generator to (factor index, local signed generator)."""
        k, j = self._gen_map[abs(g)]
        return k, j if g > 0 else -j

    def mul_gen(self, a, g):
        k, j = self.factor_of(g)
        return a[:k] + (self.factors[k].mul_gen(a[k], j),) + a[k + 1:]

    def multiply(self, a, b):
        return tuple(f.multiply(x, y) for f, x, y in zip(self.factors, a, b))

    def inverse(self, a):
        return tuple(f.inverse(x) for f, x in zip(self.factors, a))

    def word(self, a):
        out: list[int] = []
        for k, (f, x) in enumerate(zip(self.factors, a)):
            off = self.offsets[k]
            out += [off + y if y > 0 else -(off - y) for y in f.word(x)]
        return tuple(out)

    def length(self, a):
        return sum(f.length(x) for f, x in zip(self.factors, a))

    def factor_lengths(self, a) -> tuple[int, ...]:
        return tuple(f.length(x) for f, x in zip(self.factors, a))


# ---------------------------------------------------------------------------
# surface groups


class DehnReducer:
    """Dehn's algorithm for the one-relator group with relator ``relator``.

    Any subword that is more than half of a cyclic conjugate of the relator or
    its inverse is replaced by the inverse of the shorter remainder, leftmost
    and longest first, until no such subword remains.
    """

    def __init__(self, relator: Sequence[int]):
        self.relator = tuple(relator)
        L = len(self.relator)
        self.L = L
        table: dict[Word, Word] = {}
        for rel in (self.relator, invert_word(self.relator)):
            for s in range(L):
                c = rel[s:] + rel[:s]
                for m in range(L // 2 + 1, L + 1):
                    table.setdefault(c[:m], invert_word(c[m:]))
        self.table = table
        self.lengths = range(L, L // 2, -1)

    def reduce(self, word: Iterable[int]) -> Word:
        w = list(free_reduce(word))
        table = self.table
        changed = True
        while changed:
            changed = False
            n = len(w)
            for i in range(n):
                for m in self.lengths:
                    if i + m > n:
                        continue
                    rep = table.get(tuple(w[i:i + m]))
                    if rep is not None:
                        w = list(free_reduce(w[:i] + list(rep) + w[i + m:]))
                        changed = True
                        break
                if changed:
                    break
        return tuple(w)


def _perm_hom_surface(genus: int, n: int, rng: random.Random, tries: int = 20000):
    """Random homomorphism from the genus-g surface group onto permutations of n points.

    Returns a list of 2g permutations (numpy arrays), composition p∘q = p[q].
    """

    def inv(p):
        q = np.empty_like(p)
        q[p] = np.arange(len(p))
        return q

    def comm(a, b):
        return a[b[inv(a)[inv(b)]]]

    def cycles(p):
        seen = np.zeros(len(p), bool)
        out = []
        for s in range(len(p)):
            if not seen[s]:
                cyc = []
                x = s
                while not seen[x]:
                    seen[x] = True
                    cyc.append(x)
                    x = p[x]
                out.append(cyc)
        return out

    for _ in range(tries):
        ims = []
        prod = np.arange(n)
        for _ in range(genus - 1):
            a = np.array(rng.sample(range(n), n))
            b = np.array(rng.sample(range(n), n))
            ims += [a, b]
            prod = prod[comm(a, b)]
        c = inv(prod)
        a = np.array(rng.sample(range(n), n))
        sigma = inv(a)
        tau = sigma[c]
        cs = sorted(cycles(sigma), key=len)
        ct = sorted(cycles(tau), key=len)
        if [len(x) for x in cs] != [len(x) for x in ct]:
            continue
        beta = np.empty(n, dtype=int)
        for xs, ys in zip(cs, ct):
            for x, y in zip(xs, ys):
                beta[x] = y
        ims += [a, beta]
        # sanity: relator maps to the identity
        prod = np.arange(n)
        for k in range(genus):
            prod = prod[comm(ims[2 * k], ims[2 * k + 1])]
        if not np.array_equal(prod, np.arange(n)):
            continue
        # skip degenerate images (all generators trivial)
        if all(np.array_equal(p, np.arange(n)) for p in ims):
            continue
        return ims
    raise GroupError("could not find a permutation quotient")  # pragma: no cover


class SurfaceElement:
    """Surface group element: a Dehn-reduced word plus quotient images.

    Equality is decided by Dehn's algorithm on ``u v^-1``; the hash is built
    from images in the abelianization and a few finite permutation quotients,
    which are class functions of the group element and so respect equality.
    """

    __slots__ = ("group", "word", "images", "_hash")

    def __init__(self, group: SurfaceGroup, word: Word, images: tuple):
        self.group = group
        self.word = word
        self.images = images
        self._hash = hash(images)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if not isinstance(other, SurfaceElement) or other.group is not self.group:
            return NotImplemented
        if self._hash != other._hash or self.images != other.images:
            return False
        if self.word == other.word:
            return True
        return self.group.dehn.reduce(self.word + invert_word(other.word)) == ()

    def __repr__(self):
        return f"SurfaceElement({self.group.format(self)!r})"


class SurfaceGroup(Group):
    geodesic = False

    # fixed seeds and quotient sizes keep the hash deterministic across runs
    _QUOTIENT_SIZES = (7, 9, 11)

    def __init__(self, spec):
        g = spec.param
        super().__init__(spec, 2 * g)
        rel: list[int] = []
        for k in range(g):
            a, b = 2 * k + 1, 2 * k + 2
            rel += [a, b, -a, -b]
        self.relator = tuple(rel)
        self.dehn = DehnReducer(self.relator)
        rng = random.Random(1000 + g)
        self._quotients = [_perm_hom_surface(g, n, rng) for n in self._QUOTIENT_SIZES]
        self._qinv = []
        for ims in self._quotients:
            invs = []
            for p in ims:
                q = np.empty_like(p)
                q[p] = np.arange(len(p))
                invs.append(q)
            self._qinv.append(invs)
        self.identity = SurfaceElement(self, (), self._images_of(()))

    def _images_of(self, word: Word) -> tuple:
        ab = [0] * self.ngens
        perms = [np.arange(len(ims[0])) for ims in self._quotients]
        for x in word:
            ab[abs(x) - 1] += 1 if x > 0 else -1
            for q, ims in enumerate(self._quotients):
                p = ims[x - 1] if x > 0 else self._qinv[q][-x - 1]
                perms[q] = perms[q][p]
        return (tuple(ab),) + tuple(tuple(int(v) for v in p) for p in perms)

    def _step_images(self, images: tuple, g: int) -> tuple:
        ab = list(images[0])
        ab[abs(g) - 1] += 1 if g > 0 else -1
        out = [tuple(ab)]
        for q, ims in enumerate(self._quotients):
            p = ims[g - 1] if g > 0 else self._qinv[q][-g - 1]
            cur = images[q + 1]
            out.append(tuple(cur[i] for i in p))
        return tuple(out)

    def _make(self, word: Word) -> SurfaceElement:
        return SurfaceElement(self, self.dehn.reduce(word), self._images_of(word))

    def mul_gen(self, a, g):
        return SurfaceElement(self, self.dehn.reduce(a.word + (g,)), self._step_images(a.images, g))

    def normalize(self, word):
        return self._make(tuple(self._check(word)))

    def multiply(self, a, b):
        return self._make(a.word + b.word)

    def inverse(self, a):
        return self._make(invert_word(a.word))

    def word(self, a):
        return a.word

    def length(self, a):
        return len(a.word)


_FAMILY_CLASSES = {
    "FreeAbelian": FreeAbelianGroup,
    "Free": FreeGroup,
    "FreeProductOfCyclics": FreeProductOfCyclicsGroup,
    "DirectProduct": DirectProductGroup,
    "Surface": SurfaceGroup,
}

_CACHE: dict[GroupSpec, Group] = {}


def make_group(spec: GroupSpec) -> Group:
    """Return the (cached) normal-form oracle for ``spec``."""
    if not isinstance(spec, GroupSpec):
        raise GroupError(f"expected GroupSpec, got {type(spec).__name__}")
    g = _CACHE.get(spec)
    if g is None:
        g = _FAMILY_CLASSES[spec.family](spec)
        _CACHE[spec] = g
    return g


# ---------------------------------------------------------------------------
# functional surface


@dataclass(frozen=True)
class Element:
    """Canonical word of a group element together with its length."""

    word: Word
    length: int
    key: Hashable = field(compare=False, repr=False, default=None)


def _as_element(group: Group, key) -> Element:
    w = group.word(key)
    return Element(w, group.length(key), key)


def normalize(spec: GroupSpec, word: Iterable[int]) -> Element:
    g = make_group(spec)
    return _as_element(g, g.normalize(word))


def multiply(spec: GroupSpec, a: Element, b: Element) -> Element:
    g = make_group(spec)
    ka = a.key if a.key is not None else g.normalize(a.word)
    kb = b.key if b.key is not None else g.normalize(b.word)
    return _as_element(g, g.multiply(ka, kb))


def inverse(spec: GroupSpec, a: Element) -> Element:
    g = make_group(spec)
    ka = a.key if a.key is not None else g.normalize(a.word)
    return _as_element(g, g.inverse(ka))


def group_info(spec: GroupSpec) -> dict:
    return make_group(spec).info()


def list_families() -> list[dict]:
    return [
        {"family": "FreeAbelian", "params": "rank >= 1", "default_labels": "x y z w"},
        {"family": "Free", "params": "rank >= 1", "default_labels": "a b c d"},
        {"family": "DirectProduct", "params": "factors: list of group specs", "default_labels": "factor labels"},
        {"family": "FreeProductOfCyclics", "params": "orders: >= 2 entries, 0 = infinite", "default_labels": "s t u v"},
        {"family": "Surface", "params": "genus >= 2", "default_labels": "a1 b1 a2 b2 ..."},
    ]


def words_up_to(ngens: int, n: int) -> Iterable[Word]:
    """All words of length <= n over the signed alphabet (for exhaustive tests)."""
    letters = generator_order(ngens)
    for k in range(n + 1):
        yield from itertools.product(letters, repeat=k)


__all__ = [
    "GroupSpec", "Group", "Element", "GroupError", "UnknownGenerator", "make_group",
    "normalize", "multiply", "inverse", "group_info", "list_families", "free_reduce",
    "invert_word", "DehnReducer", "words_up_to",
]
