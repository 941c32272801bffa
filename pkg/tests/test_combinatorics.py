import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from percolab import combinatorics as CB
from percolab import groups as G
from percolab import percolation as P
from percolab.errors import InputError


def perfect_by_permutations(n, edges):
    return any(all((i, pi[i]) in edges for i in range(n)) for pi in itertools.permutations(range(n)))


graphs = st.integers(1, 6).flatmap(
    lambda n: st.tuples(st.just(n), st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))))
)


@given(graphs)
def test_hall_matches_permutation_oracle(g):
    n, edges = g
    bg = CB.BipartiteGraph(range(n), range(n), edges)
    res = CB.hall_matching(bg)
    assert res.found == perfect_by_permutations(n, edges)
    if res.found:
        m = res.matching
        assert len(set(m.values())) == n and all((u, v) in edges for u, v in m.items())
    else:
        assert len(bg.neighbors(res.witness)) < len(res.witness)


@given(st.integers(1, 5), st.integers(1, 7), st.data())
def test_hall_unbalanced_sides(nl, nr, data):
    edges = data.draw(st.sets(st.tuples(st.integers(0, nl - 1), st.integers(0, nr - 1))))
    bg = CB.BipartiteGraph(range(nl), range(nr), edges)
    res = CB.hall_matching(bg)
    ok = all(len(bg.neighbors(A)) >= len(A) for r in range(1, nl + 1) for A in itertools.combinations(range(nl), r))
    assert res.found == ok


def masses(n):
    return st.lists(st.integers(0, 6), min_size=n, max_size=n).filter(lambda v: sum(v) > 0).map(
        lambda v: [Fraction(x, sum(v)) for x in v]
    )


def subset_oracle(p, q, rel):
    for r in range(1, len(p) + 1):
        for A in itertools.combinations(range(len(p)), r):
            NA = {v for u in A for v in range(len(q)) if (u, v) in rel}
            if sum(p[u] for u in A) > sum((q[v] for v in NA), Fraction(0)):
                return False
    return True


def lp_oracle(p, q, rel):
    pairs = sorted(rel)
    if not pairs:
        return False
    A = []
    b = []
    for u in range(len(p)):
        A.append([1.0 if pr[0] == u else 0.0 for pr in pairs])
        b.append(float(p[u]))
    for v in range(len(q)):
        A.append([1.0 if pr[1] == v else 0.0 for pr in pairs])
        b.append(float(q[v]))
    res = linprog(np.zeros(len(pairs)), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return res.status == 0


rels = st.sets(st.tuples(st.integers(0, 4), st.integers(0, 4)))


@given(masses(5), masses(5), rels)
def test_strassen_matches_subset_and_lp_oracles(p, q, rel):
    res = CB.strassen_coupling(p, q, rel)
    assert res.feasible == subset_oracle(p, q, rel) == CB.strassen_condition_bruteforce(p, q, rel)
    if res.feasible:
        assert res.coupling.verify(rel)
    else:
        pa, qn = res.witness_mass
        assert pa > qn


def _slack(p, q, rel):
    n = len(p)
    return min(
        sum((q[v] for v in {v for u in A for v in range(n) if (u, v) in rel}), Fraction(0)) - sum(p[u] for u in A)
        for r in range(1, n + 1)
        for A in itertools.combinations(range(n), r)
    )


@given(st.lists(st.integers(1, 6), min_size=5, max_size=5), st.lists(st.integers(1, 6), min_size=5, max_size=5), rels)
def test_strassen_agrees_with_lp(pw, qw, rel):
    p = [Fraction(x, sum(pw)) for x in pw]
    q = [Fraction(x, sum(qw)) for x in qw]
    # the float LP is only trusted away from the boundary of the condition
    if abs(_slack(p, q, rel)) > Fraction(1, 10**6):
        assert lp_oracle(p, q, rel) == CB.strassen_coupling(p, q, rel).feasible


def test_strassen_order_coupling_for_stochastic_domination():
    # Bernoulli(0.3) is dominated by Bernoulli(0.6) under <=
    p = {0: Fraction(7, 10), 1: Fraction(3, 10)}
    q = {0: Fraction(4, 10), 1: Fraction(6, 10)}
    res = CB.strassen_coupling(p, q, lambda u, v: u <= v)
    assert res.feasible
    assert (1, 0) not in res.coupling.weights
    rev = CB.strassen_coupling(q, p, lambda u, v: u <= v)
    assert not rev.feasible and rev.witness == frozenset({1})


def test_marginal_must_sum_exactly_to_one():
    with pytest.raises(InputError):
        CB.strassen_coupling([0.5, 0.4], [0.5, 0.5], {(0, 0)})
    with pytest.raises(InputError):
        CB.strassen_coupling([Fraction(3, 2), Fraction(-1, 2)], [1], {(0, 0)})


def test_float_masses_are_read_exactly():
    res = CB.strassen_coupling([0.25, 0.75], [0.5, 0.5], {(0, 0), (1, 0), (1, 1)})
    assert res.feasible and res.coupling.weights[(0, 0)] == Fraction(1, 4)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("L", [1, 2, 3, 5, 10, 32])
def test_box_boundary_and_invariance_formulas(d, L):
    if d == 3 and L > 10:
        pytest.skip("large cube")
    spec = G.int_grid(d)
    tile = CB.box(d, L)
    S = G.generator_elements(spec)
    bd = CB.boundary(spec, tile, S)
    assert len(bd) == L**d - max(L - 2, 0) ** d
    cube = list(itertools.product((-1, 0, 1), repeat=d))
    assert CB.invariance_ratio(spec, tile, cube) == Fraction((L + 2) ** d - L**d, L**d)
    assert CB.invariance_ratio(spec, tile, list(S) + [spec.identity()]) == Fraction(2 * d * L ** (d - 1), L**d)


def test_k_delta_example_values():
    spec = G.int_grid(2)
    tile = CB.box(2, 10)
    cube = list(itertools.product((-1, 0, 1), repeat=2))
    assert float(CB.invariance_ratio(spec, tile, cube)) == 0.44
    assert float(CB.invariance_ratio(spec, tile, list(G.generator_elements(spec)) + [(0, 0)])) == 0.4


@given(st.integers(1, 3), st.integers(1, 6), st.integers(-7, 7), st.integers(1, 12))
def test_box_tiling_covers_region(d, L, lo, width):
    t = CB.box_tiling(d, L, [(lo, lo + width)] * d)
    assert t.verify()
    for a in t.complete:
        assert all(lo <= c and c + L <= lo + width for c in a)


def test_tile_coupling_inequality_and_feasibility():
    spec = G.int_line()
    tile = list(range(6))
    rec = CB.tile_coupling_condition(Fraction(1, 5), Fraction(1, 2), tile, [1, -1], spec)
    # boundary of an interval in Z is its two endpoints
    assert rec.boundary_size == 2
    assert rec.lhs == Fraction(1, 4) and rec.rhs == Fraction(4, 5) ** 6
    assert rec.satisfied == (Fraction(1, 4) >= Fraction(4, 5) ** 6)
    rec2 = CB.tile_coupling_condition(Fraction(1, 2), Fraction(3, 5), tile, [1, -1], spec)
    assert rec2.satisfied and rec2.coupling is not None


def test_tile_coupling_requires_ordered_parameters():
    with pytest.raises(InputError):
        CB.tile_coupling_condition(0.6, 0.4, [0, 1], [1, -1])


def test_separated_set_and_inflation_on_line():
    spec = G.int_line()
    D = CB.separated_covering_set(G.ball(spec, 30), 7)
    assert CB.is_separated(spec, D, 7)
    assert set(D) == {7 * k for k in range(-4, 5)}
    coarse = G.ball(spec, 3).elements
    inf = CB.inflation_matching(spec, coarse, D[:7])
    # displacement is minimal: one less admits no injective assignment
    dist = {(g, h): abs(h - g) for g in coarse for h in D[:7]}
    edges = {k for k, v in dist.items() if v <= inf.displacement - 1}
    assert not CB.hall_matching(CB.BipartiteGraph(coarse, D[:7], edges)).found
    assert all(abs(h - g) <= inf.displacement for g, h in inf.assignment.items())


def test_separated_set_free_group():
    spec = G.free_group(2)
    D = CB.separated_covering_set(G.ball(spec, 4), 3)
    assert CB.is_separated(spec, D, 3)
    assert CB.covering_defect(spec, D, G.ball(spec, 4), 3) == []


def test_renormalize_zeta_and_lift():
    spec = G.int_line()
    ell = 1
    assignment = {0: 0, 1: 3, 2: 6}
    region = G.ball(spec, 8)
    bits = np.zeros(len(region), dtype=np.uint8)
    for h in (1, 3, 5):
        bits[region.index[h]] = 1
    x = P.SiteConfig(region, bits)
    z = CB.renormalize(x, "zeta", assignment, ell)
    assert z == {0: 1, 1: 1, 2: 1}
    chk = CB.lift_path(x, (0, 1, 2), assignment, ell, 4)
    assert chk.ok and chk.path == (1, 3, 5)


def test_beta_prime():
    assert CB.beta_prime(0.1, 7) == pytest.approx(1 - 0.9**7)


def test_coarse_open_paths_are_self_avoiding():
    spec = G.int_line()
    bits = {g: 1 for g in range(-3, 4)}
    paths = CB.coarse_open_paths(spec, bits, 3)
    assert all(len(set(p)) == 4 for p in paths)
    assert (-3, -2, -1, 0) in paths and len(paths) == 8
