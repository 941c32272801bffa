"""Matchings, couplings, tilings and block renormalization on finite instances.

All feasibility questions are answered constructively and every positive
answer is checked before it is returned: matchings are verified edge by edge,
couplings have exactly the requested marginals (rational arithmetic), and
negative answers come with a subset that violates the Hall/Strassen condition.
"""

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import groups as G
from .errors import ConsistencyError, InputError, ResourceError

# --------------------------------------------------------------------------
# Hall


@dataclass(frozen=True)
class BipartiteGraph:
    left: tuple
    right: tuple
    edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))
        object.__setattr__(self, "edges", frozenset(self.edges))
        L, R = set(self.left), set(self.right)
        if len(L) != len(self.left) or len(R) != len(self.right):
            raise InputError("vertex lists must not repeat")
        bad = [e for e in self.edges if e[0] not in L or e[1] not in R]
        if bad:
            raise InputError(f"edges reference unknown vertices, e.g. {bad[0]}")

    def neighbors(self, A):
        A = set(A)
        return {v for u, v in self.edges if u in A}

    def adjacency(self):
        pos = {v: j for j, v in enumerate(self.right)}
        adj = [[] for _ in self.left]
        lpos = {u: i for i, u in enumerate(self.left)}
        for u, v in self.edges:
            adj[lpos[u]].append(pos[v])
        for a in adj:
            a.sort()
        return adj


@dataclass(frozen=True)
class HallResult:
    matching: dict = None  # left vertex -> right vertex, saturating the left side
    witness: frozenset = None  # A with |N(A)| < |A|

    @property
    def found(self):
        return self.matching is not None

    def is_perfect(self, g):
        return self.found and len(g.left) == len(g.right)

    def to_json(self):
        if self.found:
            return {"matching": [[u, v] for u, v in self.matching.items()]}
        return {"witness": sorted(self.witness, key=repr)}


def hall_matching(g):
    """A matching saturating the left side, or a violating set of left vertices.

    Augmenting paths (Kuhn).  When some left vertex cannot be matched, the
    left vertices reachable from it by alternating paths form a set whose
    neighborhood is one smaller than itself.
    """
    adj = g.adjacency()
    nl, nr = len(g.left), len(g.right)
    match_r = [-1] * nr
    match_l = [-1] * nl

    def augment(u):
        # iterative DFS over alternating paths
        seen = [False] * nr
        stack = [(u, iter(adj[u]))]
        path = []
        while stack:
            node, it = stack[-1]
            advanced = False
            for v in it:
                if seen[v]:
                    continue
                seen[v] = True
                if match_r[v] < 0:
                    path.append((node, v))
                    for a, b in path:
                        match_l[a] = b
                        match_r[b] = a
                    return True
                path.append((node, v))
                stack.append((match_r[v], iter(adj[match_r[v]])))
                advanced = True
                break
            if not advanced:
                stack.pop()
                if path:
                    path.pop()
        return False

    for u in range(nl):
        if not augment(u):
            A = _alternating_reach(adj, match_r, u)
            witness = frozenset(g.left[i] for i in A)
            if not len(g.neighbors(witness)) < len(witness):
                raise ConsistencyError("Hall witness does not violate the condition")
            return HallResult(witness=witness)
    m = {g.left[i]: g.right[match_l[i]] for i in range(nl)}
    if len(set(m.values())) != nl or any((u, v) not in g.edges for u, v in m.items()):
        raise ConsistencyError("constructed matching is not injective along edges")
    return HallResult(matching=m)


def _alternating_reach(adj, match_r, root):
    left = {root}
    seen_r = set()
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v in seen_r:
                continue
            seen_r.add(v)
            w = match_r[v]
            if w >= 0 and w not in left:
                left.add(w)
                queue.append(w)
    return left


def has_perfect_matching_bruteforce(g):
    """Exhaustive oracle: some injection of left into right along edges."""
    if len(g.left) > len(g.right):
        return False
    for perm in itertools.permutations(g.right, len(g.left)):
        if all((u, v) in g.edges for u, v in zip(g.left, perm)):
            return True
    return False


# --------------------------------------------------------------------------
# Strassen


def _as_fraction(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, (float, np.floating)):
        return Fraction(repr(float(v)))
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return Fraction(int(v[0]), int(v[1]))
    raise InputError(f"cannot read {v!r} as an exact rational")


def _marginal(p, name):
    if isinstance(p, dict):
        items = [(k, _as_fraction(v)) for k, v in p.items()]
    else:
        items = [(i, _as_fraction(v)) for i, v in enumerate(p)]
    if any(v < 0 for _, v in items):
        raise InputError(f"{name} has negative mass")
    if sum(v for _, v in items) != 1:
        raise InputError(f"{name} sums to {sum(v for _, v in items)}, not exactly 1")
    return dict(items)


@dataclass(frozen=True)
class FiniteCoupling:
    p: dict
    q: dict
    weights: dict  # (u, v) -> Fraction, nonzero entries only

    def row_sums(self):
        out = {u: Fraction(0) for u in self.p}
        for (u, _), r in self.weights.items():
            out[u] += r
        return out

    def col_sums(self):
        out = {v: Fraction(0) for v in self.q}
        for (_, v), r in self.weights.items():
            out[v] += r
        return out

    def verify(self, relation):
        ok = self.row_sums() == self.p and self.col_sums() == self.q
        ok &= all(r > 0 for r in self.weights.values())
        return ok and all(_related(relation, u, v) for (u, v) in self.weights)

    def to_json(self):
        return {
            "weights": [
                [repr(u) if not isinstance(u, (int, str)) else u, repr(v) if not isinstance(v, (int, str)) else v,
                 [r.numerator, r.denominator]]
                for (u, v), r in sorted(self.weights.items(), key=repr)
            ]
        }


@dataclass(frozen=True)
class StrassenResult:
    coupling: FiniteCoupling = None
    witness: frozenset = None
    witness_mass: tuple = None  # (p(A), q(N(A)))

    @property
    def feasible(self):
        return self.coupling is not None


def _related(relation, u, v):
    return relation(u, v) if callable(relation) else (u, v) in relation


def _max_flow(n, cap, s, t):
    """Edmonds-Karp on a dense exact-capacity matrix (``None`` = infinite)."""
    flow = [[Fraction(0)] * n for _ in range(n)]

    total = Fraction(0)
    while True:
        parent = [-1] * n
        parent[s] = s
        q = deque([s])
        while q and parent[t] < 0:
            a = q.popleft()
            for b in range(n):
                if parent[b] >= 0:
                    continue
                r = _res(cap, flow, a, b)
                if r is None or r > 0:
                    parent[b] = a
                    q.append(b)
        if parent[t] < 0:
            reach = [parent[i] >= 0 for i in range(n)]
            return total, flow, reach
        # bottleneck
        b = t
        push = None
        while b != s:
            a = parent[b]
            r = _res(cap, flow, a, b)
            if r is not None and (push is None or r < push):
                push = r
            b = a
        b = t
        while b != s:
            a = parent[b]
            # cancel reverse flow first
            back = min(flow[b][a], push)
            flow[b][a] -= back
            flow[a][b] += push - back
            b = a
        total += push


def _res(cap, flow, a, b):
    c = cap[a][b]
    if c is None:
        return None
    return c - flow[a][b] + flow[b][a]


def strassen_coupling(p, q, relation):
    """Coupling of ``p`` and ``q`` supported on ``relation``, or a violating set.

    ``relation`` is a set of pairs or a predicate ``(u, v) -> bool``.  Rows with
    identical relation rows (and columns likewise) are merged before the flow
    is solved and split back proportionally, which keeps the marginals exact.
    """
    p = _marginal(p, "p")
    q = _marginal(q, "q")
    U, V = list(p), list(q)
    rel_rows = {u: frozenset(j for j, v in enumerate(V) if _related(relation, u, v)) for u in U}
    col_sig = {}
    for j, v in enumerate(V):
        col_sig[v] = frozenset(u for u in U if j in rel_rows[u])
    # column classes by their relation column, then row classes by related column classes
    cclass = {}
    for v in V:
        cclass.setdefault(col_sig[v], []).append(v)
    ckeys = list(cclass)
    cidx = {v: ci for ci, k in enumerate(ckeys) for v in cclass[k]}
    rclass = {}
    for u in U:
        sig = frozenset(cidx[V[j]] for j in rel_rows[u])
        rclass.setdefault(sig, []).append(u)
    rkeys = list(rclass)
    P = [sum((p[u] for u in rclass[k]), Fraction(0)) for k in rkeys]
    Q = [sum((q[v] for v in cclass[k]), Fraction(0)) for k in ckeys]
    nr, nc = len(rkeys), len(ckeys)
    n = nr + nc + 2
    s, t = n - 2, n - 1
    cap = [[Fraction(0)] * n for _ in range(n)]
    for i in range(nr):
        cap[s][i] = P[i]
        for cj in rkeys[i]:
            cap[i][nr + cj] = None
    for j in range(nc):
        cap[nr + j][t] = Q[j]
    total, flow, reach = _max_flow(n, cap, s, t)
    if total != 1:
        A = frozenset(u for i in range(nr) if reach[i] for u in rclass[rkeys[i]])
        NA = {v for u in A for j in rel_rows[u] for v in [V[j]]}
        pa = sum((p[u] for u in A), Fraction(0))
        qn = sum((q[v] for v in NA), Fraction(0))
        if not pa > qn:
            raise ConsistencyError("min-cut witness does not violate the Strassen condition")
        return StrassenResult(witness=A, witness_mass=(pa, qn))
    weights = {}
    for i in range(nr):
        for cj in rkeys[i]:
            f = flow[i][nr + cj] - flow[nr + cj][i]
            if f <= 0:
                continue
            for u in rclass[rkeys[i]]:
                if p[u] == 0:
                    continue
                for v in cclass[ckeys[cj]]:
                    if q[v] == 0:
                        continue
                    weights[(u, v)] = weights.get((u, v), Fraction(0)) + f * (p[u] / P[i]) * (q[v] / Q[cj])
    c = FiniteCoupling(p, q, weights)
    if not c.verify(relation):
        raise ConsistencyError("coupling marginals or support are wrong")
    return StrassenResult(coupling=c)


def strassen_condition_bruteforce(p, q, relation):
    """Exhaustive oracle: ``p(A) <= q(N(A))`` for every subset ``A``."""
    p = _marginal(p, "p")
    q = _marginal(q, "q")
    U, V = list(p), list(q)
    for r in range(1, len(U) + 1):
        for A in itertools.combinations(U, r):
            NA = [v for v in V if any(_related(relation, u, v) for u in A)]
            if sum(p[u] for u in A) > sum((q[v] for v in NA), Fraction(0)):
                return False
    return True


# --------------------------------------------------------------------------
# box tilings of Z^d


def box(d, L, anchor=None):
    anchor = (0,) * d if anchor is None else tuple(anchor)
    return [tuple(a + o for a, o in zip(anchor, off)) for off in itertools.product(range(L), repeat=d)]


@dataclass(frozen=True)
class Tiling:
    """Translates ``anchor + T`` of the single box tile ``T = [0, L)^d``."""

    d: int
    L: int
    region: tuple  # ((lo, hi), ...) half-open per axis
    complete: tuple  # anchors of tiles inside the region
    incomplete: tuple  # anchors of tiles meeting the region but not contained in it

    @property
    def tile(self):
        return tuple(box(self.d, self.L))

    def cells(self, anchor):
        return box(self.d, self.L, anchor)

    def center_of(self, g):
        return tuple((c // self.L) * self.L for c in g)

    def verify(self):
        seen = set()
        for a in self.complete + self.incomplete:
            for c in self.cells(a):
                if c in seen:
                    return False
                seen.add(c)
        region_cells = set(itertools.product(*[range(lo, hi) for lo, hi in self.region]))
        return region_cells <= seen

    def to_json(self):
        return {
            "d": self.d,
            "L": self.L,
            "tile": [list(c) for c in self.tile],
            "anchors": [list(a) for a in self.complete],
            "incomplete": [list(a) for a in self.incomplete],
        }


def box_tiling(d, L, region):
    """Tiles anchored on ``L Z^d`` meeting the half-open box ``region``."""
    if L < 1:
        raise InputError(f"tile side must be >= 1, got {L}")
    region = tuple((int(lo), int(hi)) for lo, hi in region)
    if len(region) != d:
        raise InputError(f"region needs {d} axis ranges")
    ranges = [range((lo // L) * L, hi, L) for lo, hi in region]
    complete, incomplete = [], []
    for a in itertools.product(*ranges):
        inside = all(lo <= c and c + L <= hi for c, (lo, hi) in zip(a, region))
        (complete if inside else incomplete).append(a)
    t = Tiling(d, L, region, tuple(complete), tuple(incomplete))
    if not t.verify():
        raise ConsistencyError("box tiling is not a disjoint cover of the region")
    return t


def interior(spec, F, K):
    Fs = set(F)
    mul = spec.arith.multiply
    return [t for t in F if all(mul(t, k) in Fs for k in K)]


def boundary(spec, F, K):
    """``F`` minus the ``K``-interior of ``F``."""
    inner = set(interior(spec, F, K))
    return [t for t in F if t not in inner]


def invariance_ratio(spec, F, K):
    """``|F K \\ F| / |F|``."""
    Fs = set(F)
    mul = spec.arith.multiply
    out = {mul(f, k) for f in F for k in K} - Fs
    return Fraction(len(out), len(Fs))


# --------------------------------------------------------------------------
# tile coupling


@dataclass(frozen=True)
class TileCouplingRecord:
    alpha: Fraction
    beta: Fraction
    delta_bound: float
    tile_size: int
    boundary_size: int
    lhs: Fraction  # (1 - beta)^{|boundary|}
    rhs: Fraction  # (1 - alpha)^{|T|}
    satisfied: bool
    coupling: FiniteCoupling = field(default=None, repr=False)

    def to_dict(self):
        return {
            "alpha": str(self.alpha),
            "beta": str(self.beta),
            "delta_bound": self.delta_bound,
            "tile_size": self.tile_size,
            "boundary_size": self.boundary_size,
            "lhs": [self.lhs.numerator, self.lhs.denominator],
            "rhs": [self.rhs.numerator, self.rhs.denominator],
            "lhs_float": float(self.lhs),
            "rhs_float": float(self.rhs),
            "satisfied": self.satisfied,
            "coupling_support": None if self.coupling is None else len(self.coupling.weights),
        }


MAX_TILE = 10


def delta_bound(alpha, beta):
    import math

    return math.log(1 - float(alpha)) / math.log(1 - float(beta))


def _bernoulli_cube(n, a):
    out = {}
    for bits in itertools.product((0, 1), repeat=n):
        k = sum(bits)
        out[bits] = a**k * (1 - a) ** (n - k)
    return out


def tile_coupling_condition(alpha, beta, tile, S, spec=None):
    """Exact check of ``(1-beta)^{|bd T|} >= (1-alpha)^{|T|}`` and, if it holds,
    the per-tile coupling of Bernoulli(beta) and Bernoulli(alpha) on ``{0,1}^T``
    under ``a < b  iff  a = 0 on bd T  or  b != 0 on T``."""
    a, b = _as_fraction(alpha), _as_fraction(beta)
    if not 0 < a < b < 1:
        raise InputError(f"need 0 < alpha < beta < 1, got {alpha}, {beta}")
    if spec is None:
        spec = G.int_grid(len(tile[0])) if isinstance(tile[0], tuple) else G.int_line()
    tile = list(tile)
    bd = boundary(spec, tile, S)
    lhs = (1 - b) ** len(bd)
    rhs = (1 - a) ** len(tile)
    ok = lhs >= rhs
    coupling = None
    if ok:
        if len(tile) > MAX_TILE:
            raise ResourceError(f"tile of {len(tile)} sites exceeds the coupling budget of {MAX_TILE}")
        bpos = [tile.index(h) for h in bd]
        p = _bernoulli_cube(len(tile), b)
        q = _bernoulli_cube(len(tile), a)

        def rel(u, v):
            return all(u[i] == 0 for i in bpos) or any(v)

        res = strassen_coupling(p, q, rel)
        if not res.feasible:
            raise ConsistencyError("tile inequality holds but the per-tile coupling is infeasible")
        coupling = res.coupling
    return TileCouplingRecord(a, b, delta_bound(a, b), len(tile), len(bd), lhs, rhs, ok, coupling)


# --------------------------------------------------------------------------
# separated sets, inflation, renormalization


def separated_covering_set(ball, r):
    """Greedy ``r``-separated subset of ``ball`` taken in ball order."""
    if r < 1:
        raise InputError(f"separation radius must be >= 1, got {r}")
    spec = ball.spec
    a = spec.arith
    chosen = []
    for g in ball.elements:
        if all(G.word_length(spec, a.multiply(a.inverse(h), g)) >= r for h in chosen):
            chosen.append(g)
    return tuple(chosen)


def is_separated(spec, D, r):
    a = spec.arith
    return all(G.word_length(spec, a.multiply(a.inverse(g), h)) >= r for g, h in itertools.combinations(D, 2))


def covering_defect(spec, D, ball, r):
    """Elements of ``ball`` shrunk by ``r`` that are farther than ``r`` from ``D``."""
    a = spec.arith
    inner = ball.prefix(max(ball.radius - r, 0))
    return [h for h in inner if all(G.word_length(spec, a.multiply(a.inverse(g), h)) > r for g in D)]


@dataclass(frozen=True)
class Inflation:
    assignment: dict  # coarse element -> element of Delta
    displacement: int
    unmatched_targets: int


def inflation_matching(spec, coarse, Delta, n_max=64):
    """Injective ``coarse -> Delta`` with the least displacement ``n`` Hall allows."""
    a = spec.arith
    dist = {}
    for g in coarse:
        for h in Delta:
            dist[(g, h)] = G.word_length(spec, a.multiply(a.inverse(g), h))
    for n in range(n_max + 1):
        edges = {(g, h) for (g, h), d in dist.items() if d <= n}
        res = hall_matching(BipartiteGraph(coarse, Delta, edges))
        if res.found:
            return Inflation(dict(res.matching), n, len(Delta) - len(coarse))
    raise ResourceError(f"no injective assignment with displacement <= {n_max}")


def zeta_blocks(spec, assignment, ell):
    """``phi(g) B_ell`` for each coarse ``g``."""
    b = G.ball(spec, ell).elements
    mul = spec.arith.multiply
    return {g: tuple(mul(h, k) for k in b) for g, h in assignment.items()}


def renormalize(x, mode, assignment=None, ell=None, tiling=None):
    """Coarse configuration ``{coarse element: bit}``.

    ``zeta``: 1 iff ``x`` is 1 somewhere on ``phi(g) B_ell``.
    ``eta``: 1 iff ``x`` is 1 somewhere on the tile anchored at ``g``.
    """
    idx = x.region.index
    bits = x.open_bits
    if mode == "zeta":
        blocks = zeta_blocks(x.region.spec, assignment, ell)
    elif mode == "eta":
        blocks = {a: tiling.cells(a) for a in tiling.complete}
    else:
        raise InputError(f"mode must be 'zeta' or 'eta', got {mode!r}")
    out = {}
    for g, blk in blocks.items():
        try:
            out[g] = int(any(bits[idx[h]] for h in blk))
        except KeyError as exc:
            raise ResourceError(f"block of {g!r} leaves the fine region at {exc.args[0]!r}") from None
    return out


def zeta_block_indices(region, assignment, ell, order):
    """Index arrays into ``region`` of each block, for vectorized renormalization."""
    blocks = zeta_blocks(region.spec, assignment, ell)
    try:
        return np.array([[region.index[h] for h in blocks[g]] for g in order], dtype=np.int64)
    except KeyError as exc:
        raise ResourceError(f"block leaves the fine region at {exc.args[0]!r}") from None


@dataclass(frozen=True)
class LiftCheck:
    path: tuple
    open: bool
    self_avoiding: bool
    max_step: int
    step_bound: int

    @property
    def ok(self):
        return self.open and self.self_avoiding and self.max_step <= self.step_bound


def lift_path(x, coarse_path, assignment, ell, displacement):
    """Fine path through open sites of the blocks of an open coarse path."""
    spec = x.region.spec
    a = spec.arith
    blocks = zeta_blocks(spec, {g: assignment[g] for g in coarse_path}, ell)
    idx = x.region.index
    fine = []
    for g in coarse_path:
        h = next((h for h in blocks[g] if x.open_bits[idx[h]]), None)
        if h is None:
            raise InputError(f"coarse site {g!r} is closed")
        fine.append(h)
    steps = [G.word_length(spec, a.multiply(a.inverse(u), v)) for u, v in zip(fine, fine[1:])]
    bound = 2 * (ell + displacement) + 1
    return LiftCheck(tuple(fine), True, len(set(fine)) == len(fine), max(steps, default=0), bound)


def coarse_open_paths(spec, coarse_bits, length):
    """All self-avoiding open paths with ``length`` steps in the coarse Cayley graph."""
    gens = G.generator_elements(spec)
    mul = spec.arith.multiply
    open_sites = {g for g, v in coarse_bits.items() if v}
    out = []

    def grow(path):
        if len(path) == length + 1:
            out.append(tuple(path))
            return
        for s in gens:
            h = mul(path[-1], s)
            if h in open_sites and h not in path:
                path.append(h)
                grow(path)
                path.pop()

    for g in sorted(open_sites, key=lambda g: G.order_key(spec, g)):
        grow([g])
    return out


def beta_prime(alpha, ball_size):
    return 1 - (1 - alpha) ** ball_size
