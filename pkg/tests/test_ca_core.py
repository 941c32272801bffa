import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from percolab import ca_core as C
from percolab import groups as G
from percolab.errors import ConeError, SpecError


def naive_orbit(rule, pattern, F, T):
    """Dictionary simulation: apply the local rule site by site, shrinking the domain."""
    mul = rule.spec.arith.multiply
    cur = pattern.as_dict()
    frames = [[cur[g] for g in F]]
    for _ in range(T):
        nxt = {}
        for g in cur:
            nb = [mul(g, k) for k in rule.memory_set]
            if all(h in cur for h in nb):
                nxt[g] = int(rule.apply(np.array([cur[h] for h in nb]))[()])
        cur = nxt
        frames.append([cur[g] for g in F])
    return np.array(frames)


RULES = [
    lambda s: C.make_percolated_additive(s),
    lambda s: C.make_site_percolated_additive(s),
    lambda s: C.make_reversible_percolated(s)[0],
    lambda s: C.make_reversible_percolated(s)[1],
    lambda s: C.make_shift(s, G.generator_elements(s)[0]),
]


@pytest.mark.parametrize("spec", [G.int_line(), G.int_grid(2), G.free_group(2), G.heisenberg()], ids=str)
@pytest.mark.parametrize("mk", range(len(RULES)))
@pytest.mark.parametrize("seed", [1, 2])
def test_cone_evaluator_matches_naive_simulation(spec, mk, seed):
    rule = RULES[mk](spec)
    F = G.ball(spec, 1).elements
    T = 3
    cone = C.dependency_cone(spec, F, rule.memory_set, T + 1)
    x = C.random_pattern(spec, rule.alphabet, cone, seed)
    orb = C.evolve(x, rule, F, T)
    assert np.array_equal(orb.frames, naive_orbit(rule, x, list(orb.window), T))


def test_rule90_pascal_triangle():
    # all bonds open on Z: x_g <- x_{g-1} + x_{g+1}; phi^n(delta_0)_g = C(n, (n+g)/2) mod 2
    spec = G.int_line()
    rule = C.make_percolated_additive(spec)
    n_max = 20
    support = C.dependency_cone(spec, G.ball(spec, n_max).elements, rule.memory_set, n_max)
    m = len(rule.alphabet.components) - 1
    full = (1 << m) - 1
    vals = np.full(len(support), full, dtype=np.int64)
    vals[support.index(0)] |= 1 << m
    x = C.Pattern(spec, support, vals)
    orb = C.evolve(x, rule, G.ball(spec, n_max).elements, n_max)
    for n in range(n_max + 1):
        for j, g in enumerate(orb.window):
            want = math.comb(n, (n + g) // 2) % 2 if (n + g) % 2 == 0 and abs(g) <= n else 0
            assert orb.frames[n, j] >> m == want


def test_pine_window_law_exact():
    # phi^n(x)_0 = AND of x on {n, ..., 2n}
    spec = G.int_line()
    rule = C.make_pine(spec)
    for seed in range(30):
        n = 1 + seed % 6
        cone = C.dependency_cone(spec, [0], rule.memory_set, n)
        x = C.random_pattern(spec, C.BINARY, cone, seed, (0.8,))
        got = C.evolve_pattern(x, rule, [0], n)[0]
        assert got == int(all(x[j] for j in range(n, 2 * n + 1)))


def test_pine_needs_integer_line():
    with pytest.raises(SpecError):
        C.make_pine(G.int_grid(2))


def test_shift_by_identity_rejected():
    with pytest.raises(SpecError):
        C.make_shift(G.int_line(), 0)


@given(st.integers(1, 6), st.integers(0, 2**32))
def test_shift_orbit_is_translation(T, seed):
    spec = G.int_grid(2)
    h = (1, 0)
    rule = C.make_shift(spec, h)
    F = G.ball(spec, 1).elements
    cone = C.dependency_cone(spec, F, rule.memory_set, T)
    x = C.random_pattern(spec, C.BINARY, cone, seed)
    out = C.evolve_pattern(x, rule, F, T)
    for g in out.support:
        assert out[g] == x[(g[0] + T, g[1])]


def test_identity_rule_is_constant_orbit():
    spec = G.free_group(2)
    rule = C.make_identity(spec)
    F = G.ball(spec, 2).elements
    x = C.random_pattern(spec, C.BINARY, F, 3)
    orb = C.evolve(x, rule, F, 5)
    assert (orb.frames == orb.frames[0]).all()


def test_missing_cone_raises_with_sorted_elements():
    spec = G.int_line()
    rule = C.make_percolated_additive(spec)
    x = C.constant(spec, G.ball(spec, 1).elements, 0)
    with pytest.raises(ConeError) as err:
        C.evolve(x, rule, [0], 2)
    assert list(err.value.missing) == [-2, 2]


def test_cone_levels_grow_by_memory():
    spec = G.int_grid(2)
    lv = C.cone_levels(spec, [(0, 0)], (spec.identity(),) + G.generator_elements(spec), 3)
    assert [len(x) for x in lv] == [len(G.ball(spec, k)) for k in range(4)]


@given(st.integers(0, 2**40))
def test_pattern_round_trips(seed):
    spec = G.heisenberg()
    sup = G.ball(spec, 2).elements
    x = C.random_pattern(spec, C.SITE_STAR, sup, seed)
    assert C.Pattern.from_json(spec, x.to_json()) == x
    y = C.random_pattern(spec, C.BINARY, sup, seed)
    assert C.Pattern.from_bitstring(spec, sup, y.to_bitstring()) == y


@given(st.lists(st.integers(0, 1), min_size=3, max_size=3), st.integers(0, 2))
def test_alphabet_encode_decode(bits, star):
    a = C.Alphabet((2, 2, 2, 3), ("a", "b", "c", "d"))
    enc = a.encode(*(np.array([b]) for b in bits), np.array([star]))
    dec = a.decode(enc)
    assert [int(d[0]) for d in dec] == bits + [star]
    assert 0 <= int(enc[0]) < a.size


def test_translate_acts_on_the_left():
    spec = G.free_group(2)
    a, b = (1,), (2,)
    x = C.delta(spec, b, [b, ()])
    y = C.translate(x, a)
    # (a x)_h = x_{a^-1 h}: the 1 moves to a b
    assert y[(1, 2)] == 1 and y[(1,)] == 0


def test_sample_states_marginal_per_component():
    alph = C.percolated_alphabet(G.int_line())
    seeds = np.arange(20000, dtype=np.uint64)
    v = C.sample_states(alph, seeds, 1, (0.2, 0.5, 0.9))
    parts = alph.decode(v[:, 0])
    for got, want in zip(parts, (0.2, 0.5, 0.9)):
        assert abs(got.mean() - want) < 0.02


def test_sample_states_component_streams_are_independent_of_other_marginals():
    alph = C.percolated_alphabet(G.int_line())
    a = C.sample_states(alph, 7, 50, (0.2, 0.5, 0.5))
    b = C.sample_states(alph, 7, 50, (0.9, 0.5, 0.5))
    assert np.array_equal(alph.decode(a)[1], alph.decode(b)[1])


def test_local_rule_step_shrinks_to_determined_window():
    spec = G.int_line()
    rule = C.make_pine(spec)
    x = C.constant(spec, range(-3, 4), 1)
    y = rule.step(x)
    assert set(y.support) == {-3, -2, -1, 0, 1}


def test_orbit_csv_header():
    spec = G.int_grid(2)
    rule = C.make_identity(spec)
    orb = C.evolve(C.constant(spec, [(0, 0)], 1), rule, [(0, 0)], 2)
    assert orb.to_csv().splitlines() == ["t,\"[0,0]\"", "0,1", "1,1", "2,1"]
