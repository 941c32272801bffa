import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from percolab import groups as G
from percolab.errors import EncodingError, ResourceError, SpecError

ints = st.integers(-6, 6)


def heis_matrix(g):
    a, b, c = g
    return np.array([[1, a, c], [0, 1, b], [0, 0, 1]], dtype=object)


def free_word(k):
    letters = [i for i in range(1, k + 1)] + [-i for i in range(1, k + 1)]
    return st.lists(st.sampled_from(letters), max_size=8)


def reduce_word(w):
    out = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


# Sanov: a -> [[1,2],[0,1]], b -> [[1,0],[2,1]] generate a free subgroup of SL2(Z)
SANOV = {1: np.array([[1, 2], [0, 1]], dtype=object), 2: np.array([[1, 0], [2, 1]], dtype=object)}
SANOV[-1] = np.array([[1, -2], [0, 1]], dtype=object)
SANOV[-2] = np.array([[1, 0], [-2, 1]], dtype=object)


def sanov(w):
    m = np.eye(2, dtype=object)
    for x in w:
        m = m.dot(SANOV[x])
    return m


def lamp_fn(g):
    """Lamplighter element as an explicit (lamp function, head) pair."""
    lamps, head = g
    return frozenset(lamps), head


def lamp_apply(g, h):
    (f, n), (f2, n2) = lamp_fn(g), lamp_fn(h)
    return f ^ frozenset(v + n for v in f2), n + n2


SPECS = [
    G.int_line(),
    G.int_grid(1),
    G.int_grid(2),
    G.int_grid(3),
    G.free_group(1),
    G.free_group(2),
    G.free_group(3),
    G.lamplighter(),
    G.lamplighter("diestel_leader"),
    G.heisenberg(),
    G.virtually_z(3),
    G.finite_cyclic(5),
]


@given(st.tuples(ints, ints, ints), st.tuples(ints, ints, ints))
def test_heisenberg_matches_matrix_product(g, h):
    H = G.heisenberg()
    gh = H.mul(g, h)
    assert (heis_matrix(gh) == heis_matrix(g).dot(heis_matrix(h))).all()


@given(free_word(2), free_word(2))
def test_free_group_matches_sanov_matrices(u, v):
    F = G.free_group(2)
    g, h = reduce_word(u), reduce_word(v)
    gh = F.mul(g, h)
    assert (sanov(gh) == sanov(g).dot(sanov(h))).all()
    assert gh == reduce_word(u + v)


@given(free_word(2))
def test_free_word_length_is_reduced_length(w):
    F = G.free_group(2)
    assert G.word_length(F, reduce_word(w)) == len(reduce_word(w))


lamp = st.tuples(st.lists(st.integers(-4, 4), unique=True).map(lambda v: tuple(sorted(v))), st.integers(-4, 4))


@given(lamp, lamp)
def test_lamplighter_product_matches_function_model(g, h):
    L = G.lamplighter()
    f, n = L.mul(g, h)
    assert (frozenset(f), n) == lamp_apply(g, h)


def _element_strategy(spec):
    k = spec.kind
    if k == "IntLine":
        return ints
    if k == "IntGrid":
        return st.tuples(*[ints] * spec.arith.d)
    if k == "FreeGroup":
        return free_word(spec.arith.k).map(reduce_word)
    if k == "Lamplighter":
        return lamp
    if k == "Heisenberg":
        return st.tuples(ints, ints, ints)
    if k == "VirtuallyZ":
        return st.tuples(ints, st.integers(0, spec.arith.m - 1))
    return st.integers(0, spec.arith.n - 1)


@pytest.mark.parametrize("spec", SPECS, ids=str)
@given(data=st.data())
def test_group_axioms(spec, data):
    el = _element_strategy(spec)
    g, h, k = data.draw(el), data.draw(el), data.draw(el)
    a = spec.arith
    e = a.identity()
    assert a.multiply(a.multiply(g, h), k) == a.multiply(g, a.multiply(h, k))
    assert a.multiply(g, a.inverse(g)) == e == a.multiply(a.inverse(g), g)
    assert a.multiply(g, e) == g == a.multiply(e, g)
    assert a.from_json(a.to_json(g)) == g


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_generators_symmetric_and_exclude_identity(spec):
    S = G.generator_elements(spec)
    inv = spec.arith.inverse
    assert spec.identity() not in S
    assert set(map(inv, S)) == set(S)


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_ball_bfs_lengths_are_word_lengths(spec):
    b = G.ball(spec, 3)
    for i, g in enumerate(b.elements):
        assert G.word_length(spec, g) == b.length_of(i)
    # spheres are sorted within themselves
    for k in range(4):
        sph = list(b.sphere(k))
        assert sph == sorted(sph)


def test_ball_sizes_from_examples():
    assert len(G.ball(G.int_grid(2), 2)) == 13
    assert len(G.ball(G.free_group(2), 2)) == 17
    assert len(G.ball(G.int_line(), 3)) == 7


@pytest.mark.parametrize("d", [1, 2, 3, 4])
@pytest.mark.parametrize("n", [0, 1, 2, 4])
def test_grid_ball_size_bruteforce(d, n):
    count = sum(1 for v in itertools.product(range(-n, n + 1), repeat=d) if sum(map(abs, v)) <= n)
    spec = G.int_grid(d)
    assert len(G.ball(spec, n)) == count == G.ball_size_formula(spec, n)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("n", [0, 1, 2, 3, 4])
def test_free_ball_size_by_reduced_words(k, n):
    letters = list(range(1, k + 1)) + [-i for i in range(1, k + 1)]
    words = {()}
    for length in range(1, n + 1):
        for w in itertools.product(letters, repeat=length):
            words.add(reduce_word(w))
    spec = G.free_group(k)
    assert len(G.ball(spec, n)) == len(words) == G.ball_size_formula(spec, n)


def test_lamplighter_closed_form_length_agrees_with_bfs():
    spec = G.lamplighter()
    b = G.ball(spec, 6)
    for i, g in enumerate(b.elements):
        assert spec.arith.standard_length(g) == b.length_of(i)


def test_ball_power_generators_and_lengths():
    base = G.int_grid(2)
    sq = base.with_ball_power(2)
    S = set(G.generator_elements(sq))
    assert S == {g for g in G.ball(base, 2).elements if g != (0, 0)}
    for g in G.ball(base, 6).elements:
        assert G.word_length(sq, g) == -(-G.word_length(base, g) // 2)


def test_ball_prefix_is_smaller_ball():
    spec = G.free_group(2)
    big, small = G.ball(spec, 4), G.ball(spec, 2)
    assert big.prefix(2) == small.elements


def test_neighbors_table():
    b = G.ball(G.int_line(), 2)
    nbr = b.neighbors
    gens = G.generator_elements(G.int_line())
    for i, g in enumerate(b.elements):
        for j, s in enumerate(gens):
            h = g + s
            assert nbr[i, j] == (b.index[h] if h in b.index else -1)


def test_finite_cyclic_ball_exhausts():
    b = G.ball(G.finite_cyclic(5), 4)
    assert len(b) == 5 and b.is_exhausted


def test_budget_raises_resource_error():
    with pytest.raises(ResourceError):
        G.ball(G.free_group(3), 8, budget=1000)


@pytest.mark.parametrize(
    "spec,bad",
    [
        (G.int_grid(2), (1, 2, 3)),
        (G.free_group(2), (1, -1)),
        (G.free_group(2), (3,)),
        (G.lamplighter(), ((2, 1), 0)),
        (G.virtually_z(3), (0, 3)),
        (G.finite_cyclic(4), 7),
        (G.int_line(), 1.5),
    ],
)
def test_malformed_elements_are_rejected(spec, bad):
    with pytest.raises(EncodingError):
        spec.element(bad)


def test_free_group_parses_letters():
    F = G.free_group(2)
    assert F.element("abA") == (1, 2, -1)


@pytest.mark.parametrize("kind,params", [("IntGrid", {"d": 5}), ("FreeGroup", {"k": 4}), ("Nope", {})])
def test_bad_specs(kind, params):
    with pytest.raises(SpecError):
        G.GroupSpec.from_json({"kind": kind, "params": params})


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_spec_json_round_trip(spec):
    assert G.GroupSpec.from_json(spec.to_json()) == spec
    sq = spec.with_ball_power(2)
    assert G.GroupSpec.from_json(sq.to_json()) == sq


def test_element_ops_validates():
    ops = G.element_ops(G.heisenberg())
    assert ops.multiply((1, 0, 0), (0, 1, 0)) == (1, 1, 1)
    with pytest.raises(EncodingError):
        ops.inverse((1, 2))
