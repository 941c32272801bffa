"""Cellular automata in local form with exact finite-horizon evolution.

A rule is a memory set ``K`` together with a local function; the image is
``phi(x)_g = f(x_{g k_1}, ..., x_{g k_m})``.  To know ``phi^t(x)`` on a window
``F`` for every ``t <= T`` it suffices to know ``x`` on the cone
``F K^0 u F K^1 u ... u F K^T``; evolution here only ever runs on such cones, so
no boundary condition is ever invented.

Symbols are stored as ordinals.  Product alphabets use mixed radix with the
first component most significant.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import groups as G
from .errors import ConeError, EncodingError, SpecError


# --------------------------------------------------------------------------
# alphabets


@dataclass(frozen=True)
class Alphabet:
    """Finite alphabet, possibly a product ``A_1 x ... x A_c``.

    ``components`` holds the component sizes and ``names`` their labels.  A
    one-component alphabet may carry display ``symbols``.
    """

    components: tuple
    names: tuple = ()
    symbols: tuple = ()

    def __post_init__(self):
        comps = tuple(int(c) for c in self.components)
        if not comps or any(c < 2 for c in comps):
            raise SpecError(f"every alphabet component needs at least 2 symbols, got {comps}")
        object.__setattr__(self, "components", comps)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"c{i}" for i in range(len(comps))))
        if self.symbols and (len(comps) != 1 or len(self.symbols) != comps[0]):
            raise SpecError("display symbols are only supported for one-component alphabets")

    @property
    def size(self):
        return int(np.prod(self.components))

    @cached_property
    def _weights(self):
        w = [1] * len(self.components)
        for i in range(len(self.components) - 2, -1, -1):
            w[i] = w[i + 1] * self.components[i + 1]
        return tuple(w)

    def encode(self, *parts):
        """Ordinal of a tuple of component values (arrays broadcast)."""
        if len(parts) != len(self.components):
            raise EncodingError(f"expected {len(self.components)} components, got {len(parts)}")
        out = 0
        for v, w in zip(parts, self._weights):
            out = out + np.asarray(v, dtype=np.int64) * w
        return out

    def decode(self, ordinals):
        """Tuple of component arrays for the given ordinals."""
        o = np.asarray(ordinals, dtype=np.int64)
        return tuple((o // w) % c for w, c in zip(self._weights, self.components))

    def component(self, ordinals, i):
        o = np.asarray(ordinals, dtype=np.int64)
        return (o // self._weights[i]) % self.components[i]

    @property
    def is_binary(self):
        return self.size == 2


BINARY = Alphabet((2,), ("x",))
SITE_STAR = Alphabet((3,), ("x",), ("0", "1", "*"))
STAR = 2


def product_binary(names):
    return Alphabet((2,) * len(names), tuple(names))


# --------------------------------------------------------------------------
# patterns


class Pattern:
    """Finite map from group elements to symbol ordinals.

    The support order is part of the value (serializations follow it).  Use
    :func:`canonical_order` to put a support into ball order.
    """

    __slots__ = ("spec", "support", "values", "index")

    def __init__(self, spec, support, values, index=None):
        self.spec = spec
        self.support = tuple(support)
        v = np.asarray(values, dtype=np.int64).reshape(-1)
        if len(v) != len(self.support):
            raise ValueError(f"{len(self.support)} support elements but {len(v)} values")
        v.setflags(write=False)
        self.values = v
        self.index = index if index is not None else {g: i for i, g in enumerate(self.support)}
        if len(self.index) != len(self.support):
            raise ValueError("pattern support has repeated elements")

    def __len__(self):
        return len(self.support)

    def __getitem__(self, g):
        return int(self.values[self.index[g]])

    def get(self, g, default=None):
        i = self.index.get(g)
        return default if i is None else int(self.values[i])

    def __eq__(self, other):
        if not isinstance(other, Pattern):
            return NotImplemented
        return self.spec == other.spec and self.as_dict() == other.as_dict()

    def __repr__(self):
        return f"Pattern({self.spec}, {len(self)} sites)"

    def as_dict(self):
        return {g: int(v) for g, v in zip(self.support, self.values)}

    def restrict(self, elements):
        elements = tuple(elements)
        missing = [g for g in elements if g not in self.index]
        if missing:
            raise ConeError(f"{len(missing)} elements are outside the pattern support", missing)
        return Pattern(self.spec, elements, self.values[[self.index[g] for g in elements]])

    def updated(self, mapping):
        """Copy with some values replaced (support unchanged)."""
        v = self.values.copy()
        for g, s in mapping.items():
            v[self.index[g]] = s
        return Pattern(self.spec, self.support, v, self.index)

    def to_json(self):
        a = self.spec.arith
        return {"support": [a.to_json(g) for g in self.support], "values": [int(v) for v in self.values]}

    @classmethod
    def from_json(cls, spec, obj):
        return cls(spec, [spec.element(g) for g in obj["support"]], obj["values"])

    def to_bitstring(self):
        if self.values.size and self.values.max() > 1:
            raise EncodingError("bitstring form needs a binary alphabet")
        return "".join("1" if v else "0" for v in self.values)

    @classmethod
    def from_bitstring(cls, spec, support, s):
        if set(s) - {"0", "1"}:
            raise EncodingError("bitstring must contain only 0 and 1")
        return cls(spec, support, [int(c) for c in s])


def canonical_order(spec, elements):
    """Elements sorted by ``(word length, encoding)``."""
    return G.sort_elements(spec, elements)


def delta(spec, g, support, alphabet_on=1):
    """Indicator pattern: ``alphabet_on`` at ``g`` and 0 elsewhere on ``support``."""
    support = tuple(support)
    v = np.zeros(len(support), dtype=np.int64)
    v[support.index(g)] = alphabet_on
    return Pattern(spec, support, v)


def constant(spec, support, value=0):
    support = tuple(support)
    return Pattern(spec, support, np.full(len(support), value, dtype=np.int64))


def translate(pattern, g):
    """The shifted pattern ``g x`` with ``(g x)_h = x_{g^-1 h}``."""
    mul = pattern.spec.arith.multiply
    return Pattern(pattern.spec, [mul(g, h) for h in pattern.support], pattern.values)


# --------------------------------------------------------------------------
# rules


@dataclass(frozen=True, eq=False)
class LocalRule:
    """A CA in local form.

    ``local_fn`` maps an integer array of shape ``(..., len(memory_set))`` holding
    the symbols at ``g k`` (in memory-set order) to the new symbol at ``g``.
    """

    spec: G.GroupSpec
    alphabet: Alphabet
    memory_set: tuple
    local_fn: object = field(repr=False)
    name: str = "rule"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        a = self.spec.arith
        ks = tuple(a.validate(k) for k in self.memory_set)
        if not ks or len(set(ks)) != len(ks):
            raise SpecError("memory set must be a nonempty set of distinct elements")
        object.__setattr__(self, "memory_set", ks)

    def apply(self, values):
        return np.asarray(self.local_fn(np.asarray(values, dtype=np.int64)), dtype=np.int64)

    def step(self, pattern):
        """One application of the rule on the largest window the pattern determines."""
        ev = ConeEvaluator(self, _determined(self, pattern.support, pattern.index), 1)
        return Pattern(self.spec, ev.window, ev.frames(ev.gather(pattern))[1])


def _determined(rule, support, index):
    mul = rule.spec.arith.multiply
    return tuple(g for g in support if all(mul(g, k) in index for k in rule.memory_set))


def make_identity(spec, alphabet=BINARY):
    return LocalRule(spec, alphabet, (spec.identity(),), lambda v: v[..., 0], "identity")


def make_shift(spec, h):
    """``tau(x)_g = x_{g h}``."""
    h = spec.element(h)
    if h == spec.identity():
        raise SpecError("shift by the identity is the identity map; pick h != e")
    return LocalRule(spec, BINARY, (h,), lambda v: v[..., 0], "shift", {"h": spec.arith.to_json(h)})


def make_pine(spec=None):
    """Pine processionary rule on Z: a cell is 1 next step iff its two right neighbors are 1."""
    spec = spec or G.int_line()
    if spec.kind != "IntLine" or spec.ball_power is not None:
        raise SpecError(f"the pine rule is defined on IntLine with its standard generators, not {spec}")
    return LocalRule(spec, BINARY, (1, 2), lambda v: v[..., 0] & v[..., 1], "pine")


def make_cellwise(spec, alphabet, fn, name):
    return LocalRule(spec, alphabet, (spec.identity(),), lambda v: fn(v[..., 0]), name)


def percolated_alphabet(spec):
    labels = [lab for lab, _ in G.generators(spec)]
    return product_binary(["x"] + [f"w[{lab}]" for lab in labels])


def make_percolated_additive(spec):
    """Percolated additive rule on ``{0,1} x {0,1}^S`` with memory ``{e} u S``.

    ``x_g <- sum_s w_g(s) x_{gs} mod 2`` and the environment ``w`` is frozen.
    """
    gens = G.generator_elements(spec)
    m = len(gens)
    alph = percolated_alphabet(spec)
    wmask = (1 << m) - 1
    shifts = np.array([m - 1 - j for j in range(m)], dtype=np.int64)

    def f(v):
        w = v[..., 0] & wmask
        wb = (w[..., None] >> shifts) & 1
        xs = v[..., 1:] >> m
        x = np.sum(wb & xs, axis=-1) & 1
        return (x << m) | w

    return LocalRule(spec, alph, (spec.identity(),) + gens, f, "percolated-additive")


def make_site_percolated_additive(spec):
    """Rule on ``{0, 1, *}``: ``*`` is frozen, open sites sum their 1-neighbors mod 2."""
    gens = G.generator_elements(spec)

    def f(v):
        s = np.sum(v[..., 1:] == 1, axis=-1) & 1
        return np.where(v[..., 0] == STAR, STAR, s)

    return LocalRule(spec, SITE_STAR, (spec.identity(),) + gens, f, "site-percolated-additive")


def reversible_alphabet(spec):
    labels = [lab for lab, _ in G.generators(spec)]
    return product_binary(["x", "y"] + [f"w[{lab}]" for lab in labels])


def make_reversible_percolated(spec):
    """Second-order percolated rule and its inverse, on ``{0,1}^2 x {0,1}^S``.

    forward ``(x, y, w)_g -> (y_g, x_g + sum_s w_g(s) y_{gs}, w_g)``;
    inverse ``(u, v, w)_g -> (v_g + sum_s w_g(s) u_{gs}, u_g, w_g)``.
    """
    gens = G.generator_elements(spec)
    m = len(gens)
    alph = reversible_alphabet(spec)
    wmask = (1 << m) - 1
    shifts = np.array([m - 1 - j for j in range(m)], dtype=np.int64)
    K = (spec.identity(),) + gens

    def parts(v):
        c = v[..., 0]
        w = c & wmask
        return (c >> (m + 1)) & 1, (c >> m) & 1, w, (w[..., None] >> shifts) & 1

    def fwd(v):
        x, y, w, wb = parts(v)
        ys = (v[..., 1:] >> m) & 1
        ny = (x + np.sum(wb & ys, axis=-1)) & 1
        return (y << (m + 1)) | (ny << m) | w

    def inv(v):
        u, vv, w, wb = parts(v)
        us = (v[..., 1:] >> (m + 1)) & 1
        nu = (vv + np.sum(wb & us, axis=-1)) & 1
        return (nu << (m + 1)) | (u << m) | w

    return (
        LocalRule(spec, alph, K, fwd, "reversible-percolated"),
        LocalRule(spec, alph, K, inv, "reversible-percolated-inverse"),
    )


# --------------------------------------------------------------------------
# cones and evolution


def cone_levels(spec, F, K, T):
    """Cumulative cones ``D_0 = F, D_{t+1} = D_t u D_t K`` as ordered tuples."""
    mul = spec.arith.multiply
    F = tuple(dict.fromkeys(spec.element(f) for f in F))
    K = tuple(spec.element(k) for k in K)
    seen = set(F)
    frontier = list(F)
    levels = [F]
    for _ in range(T):
        new = []
        for g in frontier:
            for k in K:
                h = mul(g, k)
                if h not in seen:
                    seen.add(h)
                    new.append(h)
        frontier = new
        levels.append(levels[-1] + tuple(new))
    return levels


def dependency_cone(spec, F, K, t):
    """``F K^0 u ... u F K^t`` in ball order; this is what ``phi^s|F, s <= t`` reads."""
    return canonical_order(spec, cone_levels(spec, F, K, t)[-1])


class ConeEvaluator:
    """Exact batch evolution of ``rule`` observed on ``F`` up to horizon ``T``.

    The universe is the cone of ``F``; states are arrays ``(..., N)`` over
    :attr:`universe`.  Frame ``t`` is valid on level ``T - t`` of the cone.
    """

    def __init__(self, rule, F, T):
        if T < 0:
            raise ValueError("horizon must be non-negative")
        spec = rule.spec
        self.rule = rule
        self.T = int(T)
        levels = cone_levels(spec, F, rule.memory_set, self.T)
        self.window = levels[0]
        self.universe = levels[-1]
        self.index = {g: i for i, g in enumerate(self.universe)}
        self.level_sizes = [len(lv) for lv in levels]
        mul = spec.arith.multiply
        # rows only needed for sites that are ever updated (level T-1)
        n_upd = self.level_sizes[self.T - 1] if self.T > 0 else 0
        tab = np.empty((n_upd, len(rule.memory_set)), dtype=np.int64)
        for i in range(n_upd):
            g = self.universe[i]
            for j, k in enumerate(rule.memory_set):
                tab[i, j] = self.index[mul(g, k)]
        self.table = tab

    @property
    def n_window(self):
        return len(self.window)

    def gather(self, pattern):
        """Values of ``pattern`` on the universe as a 1-d array (cone error if short)."""
        missing = [g for g in self.universe if g not in pattern.index]
        if missing:
            raise ConeError(
                f"pattern misses {len(missing)} cone elements, e.g. {missing[:5]}", canonical_order(pattern.spec, missing)
            )
        return np.asarray(pattern.values[[pattern.index[g] for g in self.universe]], dtype=np.int64)

    def run(self, states, keep=False):
        """Evolve ``states`` (shape ``(..., N)``); returns window frames ``(..., T+1, |F|)``.

        With ``keep=True`` also returns the list of per-step arrays (each valid on
        its shrinking level).
        """
        cur = np.asarray(states, dtype=np.int64)
        nf = self.n_window
        frames = [cur[..., :nf]]
        kept = [cur]
        for t in range(1, self.T + 1):
            n = self.level_sizes[self.T - t]
            vals = cur[..., self.table[:n]]
            cur = self.rule.apply(vals)
            frames.append(cur[..., :nf])
            if keep:
                kept.append(cur)
        out = np.stack(frames, axis=-2)
        return (out, kept) if keep else out

    def frames(self, state):
        return self.run(state)


@dataclass(frozen=True, eq=False)
class Orbit:
    """Frames ``phi^t(x)|F`` for ``t = 0..horizon``; columns follow :attr:`window`."""

    spec: G.GroupSpec
    window: tuple
    frames: np.ndarray
    rule_name: str = ""

    @property
    def horizon(self):
        return self.frames.shape[0] - 1

    def frame(self, t):
        return Pattern(self.spec, self.window, self.frames[t])

    def at(self, g):
        return self.frames[:, self.window.index(g)]

    def to_csv(self):
        a = self.spec.arith
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [json.dumps(a.to_json(g), separators=(",", ":")) for g in self.window])
        for t, row in enumerate(self.frames):
            w.writerow([t] + [int(v) for v in row])
        return buf.getvalue()


def evolve(x, rule, F, T):
    """Exact orbit of ``x`` on the window ``F`` for ``t = 0..T``.

    ``x`` must be defined on the whole dependency cone; otherwise a
    :class:`ConeError` lists the missing elements.
    """
    spec = rule.spec
    F = canonical_order(spec, F)
    ev = ConeEvaluator(rule, F, T)
    frames = ev.run(ev.gather(x))
    return Orbit(spec, ev.window, frames, rule.name)


def evolve_pattern(x, rule, F, T):
    """``phi^T(x)`` restricted to ``F`` as a Pattern."""
    return evolve(x, rule, F, T).frame(T)


def sample_states(alphabet, seeds, n, marginal=None, stream=None):
    """Random symbol ordinals for ``n`` coordinates per seed.

    ``marginal`` gives ``P(component = 1)`` for each binary component (``None``
    means fair); components with more symbols are uniform.  Component ``c`` reads
    its own uniform stream, so changing one marginal leaves the others intact.
    """
    from . import rng

    stream = rng.STATE if stream is None else stream
    if marginal is not None and len(marginal) != len(alphabet.components):
        raise ValueError(f"marginal needs {len(alphabet.components)} entries, got {len(marginal)}")
    parts = []
    for ci, c in enumerate(alphabet.components):
        u = rng.uniforms(seeds, n, stream=stream * 16 + ci)
        if c == 2:
            p = 0.5 if marginal is None else float(marginal[ci])
            parts.append((u < p).astype(np.int64))
        else:
            parts.append(np.minimum((u * c).astype(np.int64), c - 1))
    return alphabet.encode(*parts)


def random_pattern(spec, alphabet, support, seed, marginal=None, stream=None):
    """Pattern with independent symbols on ``support`` (see :func:`sample_states`)."""
    support = tuple(support)
    return Pattern(spec, support, sample_states(alphabet, seed, len(support), marginal, stream))
