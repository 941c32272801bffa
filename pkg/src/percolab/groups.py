"""Finitely generated groups with exact element arithmetic.

The catalog is closed: integer line and grids, free groups, the lamplighter
group Z2 wr Z, the integer Heisenberg group, Z x Z/m and finite cyclic groups.

Canonical encodings (equality of elements is equality of encodings):

=================  ==========================================================
kind               encoding
=================  ==========================================================
``IntLine``        ``int``
``IntGrid``        ``tuple`` of ``d`` ints
``FreeGroup``      reduced ``tuple`` of nonzero ints; ``i`` is the i-th free
                   generator and ``-i`` its inverse
``Lamplighter``    ``(sorted tuple of lit lamp positions, head position)``
``Heisenberg``     ``(a, b, c)``; ``(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')``
``VirtuallyZ``     ``(n, r)`` with ``0 <= r < m``; the direct product Z x Z/m
``FiniteCyclic``   ``int`` residue in ``[0, n)``
=================  ==========================================================

Balls are enumerated in BFS order, each sphere sorted by encoding.
"""

import math
from collections import namedtuple
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .errors import EncodingError, ResourceError, SpecError

KINDS = ("IntLine", "IntGrid", "FreeGroup", "Lamplighter", "Heisenberg", "VirtuallyZ", "FiniteCyclic")

DEFAULT_BALL_BUDGET = 2_000_000

ElementOps = namedtuple("ElementOps", ["multiply", "inverse", "identity"])

_LETTERS = "abc"


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, (bool, np.bool_))


# --------------------------------------------------------------------------
# arithmetic per kind


class _Arith:
    def __init__(self, params):
        self.params = dict(params)

    def identity(self):
        raise NotImplementedError

    def validate(self, g):
        raise NotImplementedError

    def multiply(self, g, h):
        raise NotImplementedError

    def inverse(self, g):
        raise NotImplementedError

    def standard_generators(self):
        """Ordered ``(label, element)`` pairs of the standard symmetric set."""
        raise NotImplementedError

    def standard_length(self, g):
        """Closed-form word length for the standard set, or ``None``."""
        return None

    def to_json(self, g):
        return g

    def from_json(self, obj):
        return self.validate(obj)

    def label(self, g):
        return str(self.to_json(g))


class _IntLine(_Arith):
    def identity(self):
        return 0

    def validate(self, g):
        if not _is_int(g):
            raise EncodingError(f"IntLine element must be an int, got {g!r}")
        return int(g)

    def multiply(self, g, h):
        return g + h

    def inverse(self, g):
        return -g

    def standard_generators(self):
        return [("+1", 1), ("-1", -1)]

    def standard_length(self, g):
        return abs(g)

    def label(self, g):
        return f"{g:+d}" if g else "0"


class _IntGrid(_Arith):
    def __init__(self, params):
        super().__init__(params)
        d = self.params.get("d")
        if not _is_int(d) or not 1 <= d <= 4:
            raise SpecError(f"IntGrid dimension must be in 1..4, got {d!r}")
        self.d = int(d)

    def identity(self):
        return (0,) * self.d

    def validate(self, g):
        if isinstance(g, list):
            g = tuple(g)
        if not isinstance(g, tuple) or len(g) != self.d or not all(_is_int(v) for v in g):
            raise EncodingError(f"IntGrid({self.d}) element must be a {self.d}-tuple of ints, got {g!r}")
        return tuple(int(v) for v in g)

    def multiply(self, g, h):
        return tuple(a + b for a, b in zip(g, h))

    def inverse(self, g):
        return tuple(-a for a in g)

    def standard_generators(self):
        gens = []
        for i in range(self.d):
            for sign in (1, -1):
                e = [0] * self.d
                e[i] = sign
                gens.append((f"{'+' if sign > 0 else '-'}e{i + 1}", tuple(e)))
        return gens

    def standard_length(self, g):
        return sum(abs(a) for a in g)

    def to_json(self, g):
        return list(g)


class _FreeGroup(_Arith):
    def __init__(self, params):
        super().__init__(params)
        k = self.params.get("k")
        if not _is_int(k) or not 1 <= k <= 3:
            raise SpecError(f"FreeGroup rank must be in 1..3, got {k!r}")
        self.k = int(k)

    def identity(self):
        return ()

    def validate(self, g):
        if isinstance(g, str):
            return self.parse(g)
        if isinstance(g, list):
            g = tuple(g)
        if not isinstance(g, tuple) or not all(_is_int(v) and v != 0 and abs(v) <= self.k for v in g):
            raise EncodingError(f"FreeGroup({self.k}) element must be a tuple of letters in ±1..±{self.k}, got {g!r}")
        g = tuple(int(v) for v in g)
        for a, b in zip(g, g[1:]):
            if a == -b:
                raise EncodingError(f"FreeGroup word {g!r} is not freely reduced")
        return g

    def parse(self, word):
        """Parse ``"abA"`` style words (upper case = inverse) and reduce."""
        letters = []
        for ch in word:
            i = _LETTERS.find(ch.lower())
            if i < 0 or i >= self.k:
                raise EncodingError(f"unknown letter {ch!r} for FreeGroup({self.k})")
            letters.append(i + 1 if ch.islower() else -(i + 1))
        return self._reduce(letters)

    @staticmethod
    def _reduce(letters):
        out = []
        for v in letters:
            if out and out[-1] == -v:
                out.pop()
            else:
                out.append(v)
        return tuple(out)

    def multiply(self, g, h):
        i = 0
        n = min(len(g), len(h))
        while i < n and g[len(g) - 1 - i] == -h[i]:
            i += 1
        return g[: len(g) - i] + h[i:]

    def inverse(self, g):
        return tuple(-v for v in reversed(g))

    def standard_generators(self):
        gens = []
        for i in range(1, self.k + 1):
            gens.append((_LETTERS[i - 1], (i,)))
            gens.append((_LETTERS[i - 1].upper(), (-i,)))
        return gens

    def standard_length(self, g):
        return len(g)

    def to_json(self, g):
        return list(g)

    def label(self, g):
        if not g:
            return "e"
        return "".join(_LETTERS[v - 1] if v > 0 else _LETTERS[-v - 1].upper() for v in g)


class _Lamplighter(_Arith):
    """Z2 wr Z as pairs (lit lamps, head); ``t`` moves the head, ``a`` toggles."""

    def __init__(self, params):
        super().__init__(params)
        self.variant = self.params.get("generators_variant", "switch_walk")
        if self.variant not in ("switch_walk", "diestel_leader"):
            raise SpecError(f"unknown lamplighter generator variant {self.variant!r}")

    def identity(self):
        return ((), 0)

    def validate(self, g):
        if isinstance(g, dict):
            g = (g.get("lamps"), g.get("head"))
        if isinstance(g, list):
            g = tuple(g)
        if not isinstance(g, tuple) or len(g) != 2:
            raise EncodingError(f"Lamplighter element must be (lamps, head), got {g!r}")
        lamps, head = g
        if isinstance(lamps, (list, set, frozenset)):
            lamps = tuple(lamps)
        if not isinstance(lamps, tuple) or not all(_is_int(v) for v in lamps) or not _is_int(head):
            raise EncodingError(f"Lamplighter element must be (lamps, head), got {g!r}")
        lamps = tuple(int(v) for v in lamps)
        if list(lamps) != sorted(set(lamps)):
            raise EncodingError(f"Lamplighter lamps must be strictly increasing, got {lamps!r}")
        return (lamps, int(head))

    def multiply(self, g, h):
        (f1, n1), (f2, n2) = g, h
        lit = set(f1)
        lit.symmetric_difference_update(v + n1 for v in f2)
        return (tuple(sorted(lit)), n1 + n2)

    def inverse(self, g):
        f, n = g
        return (tuple(sorted(v - n for v in f)), -n)

    def standard_generators(self):
        t, ti, a = ((), 1), ((), -1), ((0,), 0)
        if self.variant == "switch_walk":
            return [("t", t), ("T", ti), ("a", a)]
        at = self.multiply(a, t)
        return [("t", t), ("T", ti), ("at", at), ("AT", self.inverse(at))]

    def standard_length(self, g):
        if self.variant != "switch_walk":
            return None
        f, n = g
        lo = min((0, n) + f)
        hi = max((0, n) + f)
        walk = min(-lo + (hi - lo) + (hi - n), hi + (hi - lo) + (n - lo))
        return walk + len(f)

    def to_json(self, g):
        return [list(g[0]), g[1]]

    def label(self, g):
        return f"({','.join(map(str, g[0]))}|{g[1]})"


class _Heisenberg(_Arith):
    def identity(self):
        return (0, 0, 0)

    def validate(self, g):
        if isinstance(g, list):
            g = tuple(g)
        if not isinstance(g, tuple) or len(g) != 3 or not all(_is_int(v) for v in g):
            raise EncodingError(f"Heisenberg element must be an integer triple, got {g!r}")
        return tuple(int(v) for v in g)

    def multiply(self, g, h):
        a, b, c = g
        x, y, z = h
        return (a + x, b + y, c + z + a * y)

    def inverse(self, g):
        a, b, c = g
        return (-a, -b, a * b - c)

    def standard_generators(self):
        return [("x", (1, 0, 0)), ("X", (-1, 0, 0)), ("y", (0, 1, 0)), ("Y", (0, -1, 0))]

    def to_json(self, g):
        return list(g)


class _VirtuallyZ(_Arith):
    """Z x Z/m; contains Z = <(1, 0)> with index m."""

    def __init__(self, params):
        super().__init__(params)
        m = self.params.get("m")
        if not _is_int(m) or m < 1:
            raise SpecError(f"VirtuallyZ needs a positive finite order m, got {m!r}")
        self.m = int(m)

    def identity(self):
        return (0, 0)

    def validate(self, g):
        if isinstance(g, list):
            g = tuple(g)
        if not isinstance(g, tuple) or len(g) != 2 or not all(_is_int(v) for v in g):
            raise EncodingError(f"VirtuallyZ element must be (n, r), got {g!r}")
        if not 0 <= g[1] < self.m:
            raise EncodingError(f"residue {g[1]} out of range for m={self.m}")
        return (int(g[0]), int(g[1]))

    def multiply(self, g, h):
        return (g[0] + h[0], (g[1] + h[1]) % self.m)

    def inverse(self, g):
        return (-g[0], (-g[1]) % self.m)

    def standard_generators(self):
        gens = [("t", (1, 0)), ("T", (-1, 0))]
        if self.m > 1:
            gens.append(("r", (0, 1)))
            if self.m > 2:
                gens.append(("R", (0, self.m - 1)))
        return gens

    def standard_length(self, g):
        return abs(g[0]) + min(g[1], self.m - g[1])

    def to_json(self, g):
        return list(g)


class _FiniteCyclic(_Arith):
    def __init__(self, params):
        super().__init__(params)
        n = self.params.get("n")
        if not _is_int(n) or n < 2:
            raise SpecError(f"FiniteCyclic order must be >= 2, got {n!r}")
        self.n = int(n)

    def identity(self):
        return 0

    def validate(self, g):
        if not _is_int(g) or not 0 <= g < self.n:
            raise EncodingError(f"FiniteCyclic({self.n}) element must be a residue, got {g!r}")
        return int(g)

    def multiply(self, g, h):
        return (g + h) % self.n

    def inverse(self, g):
        return (-g) % self.n

    def standard_generators(self):
        if self.n == 2:
            return [("+1", 1)]
        return [("+1", 1), ("-1", self.n - 1)]

    def standard_length(self, g):
        return min(g, self.n - g)


_ARITH = {
    "IntLine": _IntLine,
    "IntGrid": _IntGrid,
    "FreeGroup": _FreeGroup,
    "Lamplighter": _Lamplighter,
    "Heisenberg": _Heisenberg,
    "VirtuallyZ": _VirtuallyZ,
    "FiniteCyclic": _FiniteCyclic,
}


# --------------------------------------------------------------------------
# group specs


@dataclass(frozen=True)
class GroupSpec:
    """A catalog group together with a symmetric generating set.

    ``ball_power`` of ``None`` selects the standard generators; an integer ``r``
    selects ``S = B_r \\ {e}`` measured in the standard generators.
    """

    kind: str
    params: tuple = ()
    ball_power: int = None

    def __post_init__(self):
        if self.kind not in _ARITH:
            raise SpecError(f"unknown group kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "params", tuple(sorted(dict(self.params).items())))
        if self.ball_power is not None and (not _is_int(self.ball_power) or self.ball_power < 1):
            raise SpecError(f"ball_power radius must be a positive int, got {self.ball_power!r}")
        _arith(self)  # validates params

    @property
    def arith(self):
        return _arith(self)

    def standard(self):
        """The same group with its standard generating set."""
        return GroupSpec(self.kind, self.params)

    def with_ball_power(self, r):
        return GroupSpec(self.kind, self.params, r)

    # convenience passthroughs
    def identity(self):
        return self.arith.identity()

    def mul(self, g, h):
        return self.arith.multiply(g, h)

    def inv(self, g):
        return self.arith.inverse(g)

    def element(self, obj):
        """Parse/validate an element from its JSON or literal form."""
        return self.arith.from_json(obj)

    def label(self, g):
        return self.arith.label(g)

    def to_json(self):
        out = {"kind": self.kind, "params": dict(self.params)}
        out["generators"] = "standard" if self.ball_power is None else {"ball_power": self.ball_power}
        return out

    @classmethod
    def from_json(cls, obj):
        gens = obj.get("generators", "standard")
        if gens == "standard":
            r = None
        elif isinstance(gens, dict) and set(gens) == {"ball_power"}:
            r = gens["ball_power"]
        else:
            raise SpecError(f"generators must be 'standard' or {{'ball_power': r}}, got {gens!r}")
        return cls(obj["kind"], tuple(dict(obj.get("params", {})).items()), r)

    def __str__(self):
        p = ",".join(f"{k}={v}" for k, v in self.params)
        s = f"{self.kind}({p})" if p else self.kind
        return s if self.ball_power is None else f"{s}[B{self.ball_power}]"


@lru_cache(maxsize=None)
def _arith(spec):
    return _ARITH[spec.kind](spec.params)


def int_line():
    return GroupSpec("IntLine")


def int_grid(d):
    return GroupSpec("IntGrid", (("d", d),))


def free_group(k):
    return GroupSpec("FreeGroup", (("k", k),))


def lamplighter(variant="switch_walk"):
    return GroupSpec("Lamplighter", (("generators_variant", variant),))


def heisenberg():
    return GroupSpec("Heisenberg")


def virtually_z(m):
    return GroupSpec("VirtuallyZ", (("m", m),))


def finite_cyclic(n):
    return GroupSpec("FiniteCyclic", (("n", n),))


def element_ops(spec):
    """Arithmetic bundle ``(multiply, inverse, identity)`` with input validation."""
    a = spec.arith

    def multiply(g, h):
        return a.multiply(a.validate(g), a.validate(h))

    def inverse(g):
        return a.inverse(a.validate(g))

    return ElementOps(multiply, inverse, a.identity)


# --------------------------------------------------------------------------
# generators, lengths, balls


@lru_cache(maxsize=None)
def generators(spec):
    """Ordered ``(label, element)`` pairs of the generating set of ``spec``."""
    a = spec.arith
    if spec.ball_power is None:
        gens = a.standard_generators()
    else:
        b = ball(spec.standard(), spec.ball_power)
        gens = [(a.label(g), g) for g in b.elements[1:]]
    return tuple(gens)


def generator_elements(spec):
    return tuple(g for _, g in generators(spec))


def word_length(spec, g):
    """Length of ``g`` in the generating set of ``spec`` (Cayley-graph distance to e)."""
    a = spec.arith
    g = a.validate(g)
    if spec.ball_power is not None:
        std = word_length(spec.standard(), g)
        return -(-std // spec.ball_power)
    n = a.standard_length(g)
    if n is not None:
        return n
    return _bfs_length(spec, g)


def _bfs_length(spec, g, budget=DEFAULT_BALL_BUDGET):
    r = 0
    while True:
        b = ball(spec, r, budget=budget)
        if g in b.index:
            return b.length_of(b.index[g])
        if b.is_exhausted:
            raise EncodingError(f"{g!r} is not reachable from the identity")
        r = max(1, 2 * r) if r < 4 else r + 2


def order_key(spec, g):
    """Ball-order sort key: ``(word length, encoding)``."""
    return (word_length(spec, g), g)


def sort_elements(spec, elements):
    return tuple(sorted(set(elements), key=lambda g: order_key(spec, g)))


@dataclass(frozen=True, eq=False)
class Ball:
    """The ball ``B_radius`` of a Cayley graph in BFS order.

    ``sphere_starts[k]`` is the index of the first element of length ``k``;
    ``sphere_starts[radius + 1] == len(elements)``.
    """

    spec: GroupSpec
    radius: int
    elements: tuple
    index: dict = field(repr=False)
    sphere_starts: tuple = field(repr=False)

    def __len__(self):
        return len(self.elements)

    def __contains__(self, g):
        return g in self.index

    @property
    def is_exhausted(self):
        # the group is finite and this ball already contains all of it
        return len(self.sphere_starts) >= 2 and self.sphere_starts[-1] == self.sphere_starts[-2] and self.radius > 0

    def sphere(self, k):
        return self.elements[self.sphere_starts[k] : self.sphere_starts[k + 1]]

    def size_at(self, k):
        """``|B_k|`` for ``k <= radius`` (prefix length)."""
        return self.sphere_starts[min(k, self.radius) + 1]

    def length_of(self, i):
        return int(np.searchsorted(np.asarray(self.sphere_starts), i, side="right") - 1)

    @cached_property
    def lengths(self):
        out = np.empty(len(self.elements), dtype=np.int64)
        for k in range(self.radius + 1):
            out[self.sphere_starts[k] : self.sphere_starts[k + 1]] = k
        return out

    @cached_property
    def neighbors(self):
        """``(N, |S|)`` int array: index of ``g_i s_j`` in the ball, or -1."""
        gens = generator_elements(self.spec)
        mul = self.spec.arith.multiply
        nbr = np.full((len(self.elements), len(gens)), -1, dtype=np.int64)
        get = self.index.get
        for i, g in enumerate(self.elements):
            row = nbr[i]
            for j, s in enumerate(gens):
                row[j] = get(mul(g, s), -1)
        nbr.setflags(write=False)
        return nbr

    def prefix(self, k):
        return self.elements[: self.size_at(k)]


@lru_cache(maxsize=256)
def _ball_cached(spec, n, budget):
    a = spec.arith
    e = a.identity()
    gens = generator_elements(spec)
    elements = [e]
    seen = {e}
    starts = [0]
    frontier = [e]
    for _ in range(n):
        starts.append(len(elements))
        nxt = set()
        for g in frontier:
            for s in gens:
                h = a.multiply(g, s)
                if h not in seen:
                    nxt.add(h)
        frontier = sorted(nxt)
        seen.update(frontier)
        elements.extend(frontier)
        if len(elements) > budget:
            raise ResourceError(f"ball of radius {n} in {spec} exceeds the budget of {budget} elements")
    starts.append(len(elements))
    elements = tuple(elements)
    return Ball(spec, n, elements, {g: i for i, g in enumerate(elements)}, tuple(starts))


def ball(spec, n, budget=DEFAULT_BALL_BUDGET):
    """Enumerate ``B_n`` (exact, deterministic BFS order)."""
    if not _is_int(n) or n < 0:
        raise ValueError(f"radius must be a non-negative int, got {n!r}")
    return _ball_cached(spec, int(n), int(budget))


def cayley_neighbors(spec, g):
    """``[(label, g s) for s in S]`` in the generator order of ``spec``."""
    a = spec.arith
    g = a.validate(g)
    return [(lab, a.multiply(g, s)) for lab, s in generators(spec)]


def ball_size_formula(spec, n):
    """Closed-form ``|B_n|`` for the standard sets where one is known, else ``None``."""
    if spec.ball_power is not None:
        return None
    if spec.kind == "IntLine":
        return 2 * n + 1
    if spec.kind == "IntGrid":
        d = spec.arith.d
        # Delannoy-type count of Z^d lattice points with l1 norm <= n
        return sum(2**k * math.comb(d, k) * math.comb(n, k) for k in range(d + 1))
    if spec.kind == "FreeGroup":
        k = spec.arith.k
        if k == 1:
            return 2 * n + 1
        return 1 + 2 * k * ((2 * k - 1) ** n - 1) // (2 * k - 2)
    return None
