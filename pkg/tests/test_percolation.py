import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from percolab import groups as G
from percolab import percolation as P
from percolab import rng
from percolab.errors import InputError, ResourceError


def naive_dependence(w, steps):
    """M_n from M_{n-1}: h is in M_n iff an odd number of open bonds go from M_{n-1} to h."""
    region = w.region
    gens = G.generator_elements(region.spec)
    mul = region.spec.arith.multiply
    levels = [{region.spec.identity()}]
    for _ in range(steps):
        count = {}
        for g in levels[-1]:
            i = region.index[g]
            for j, s in enumerate(gens):
                if w.bits[i, j]:
                    h = mul(g, s)
                    count[h] = count.get(h, 0) + 1
        levels.append({h for h, c in count.items() if c % 2})
    return levels


def naive_odd_walks(w, length):
    """Endpoints reached by an odd number of open walks of exactly ``length`` steps."""
    region = w.region
    gens = G.generator_elements(region.spec)
    mul = region.spec.arith.multiply
    ends = {}

    def walk(g, k):
        if k == length:
            ends[g] = ends.get(g, 0) + 1
            return
        i = region.index[g]
        for j, s in enumerate(gens):
            if w.bits[i, j]:
                walk(mul(g, s), k + 1)

    walk(region.spec.identity(), 0)
    return {g for g, c in ends.items() if c % 2}


def reaches_sphere(open_set, spec, R):
    """BFS through open sites from e (e itself need not be open)."""
    e = spec.identity()
    seen, frontier = {e}, [e]
    while frontier:
        nxt = []
        for g in frontier:
            for s in G.generator_elements(spec):
                h = spec.arith.multiply(g, s)
                if h in open_set and h not in seen:
                    if G.word_length(spec, h) == R:
                        return True
                    seen.add(h)
                    nxt.append(h)
        frontier = nxt
    return False


@pytest.mark.parametrize("spec", [G.int_line(), G.int_grid(2), G.free_group(2), G.heisenberg()], ids=str)
@pytest.mark.parametrize("seed", range(4))
def test_dependence_kernel_matches_naive(spec, seed):
    steps = 4
    region = G.ball(spec, steps)
    w = P.sample_bonds(0.5, region, seed)
    tr = P.dependence_process(w, steps)
    for n, lv in enumerate(naive_dependence(w, steps)):
        assert tr.level(n) == frozenset(lv)


@pytest.mark.parametrize("spec", [G.int_grid(2), G.free_group(2), G.lamplighter()], ids=str)
@pytest.mark.parametrize("seed", range(3))
def test_odd_walks_equal_dependence_levels(spec, seed):
    region = G.ball(spec, 5)
    w = P.sample_bonds(0.6, region, seed)
    tr = P.dependence_process(w, 5)
    for n in range(6):
        naive = naive_odd_walks(w, n)
        assert P.odd_path_set(w, n) == frozenset(naive) == tr.level(n)


def test_odd_path_default_limit():
    region = G.ball(G.int_line(), 13)
    with pytest.raises(ResourceError):
        P.odd_path_set(P.all_open_bonds(region), 13)


def test_all_open_line_is_pascal_mod_two():
    region = G.ball(G.int_line(), 40)
    tr = P.dependence_process(P.all_open_bonds(region), 40)
    for n in range(41):
        want = {2 * k - n for k in range(n + 1) if math.comb(n, k) % 2}
        assert tr.level(n) == frozenset(want)


def test_all_closed_terminates_immediately():
    region = G.ball(G.int_grid(2), 3)
    tr = P.dependence_process(P.all_closed_bonds(region), 3)
    assert str(tr.status) == "Terminated(0)"


def test_region_too_small():
    region = G.ball(G.int_grid(2), 2)
    with pytest.raises(ResourceError):
        P.dependence_process(P.all_open_bonds(region), 3)


@pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
def test_bad_probability(p):
    with pytest.raises(InputError):
        P.sample_sites(p, G.ball(G.int_line(), 2), 0)


def test_coupling_identity_on_free_group():
    region = G.ball(G.free_group(2), 7)
    for i in range(300):
        cs = P.coupling_sample(region, 6, rng.trial_seed(5, i))
        assert all(cs.cumulative_agreement())


def test_coupling_identity_fails_on_grid_example():
    # a route that turns back through a site declared closed at an earlier stage
    spec = G.int_grid(2)
    region = G.ball(spec, 5)
    w = P.all_closed_bonds(region)
    labels = [lab for lab, _ in G.generators(spec)]
    bits = w.bits.copy()
    for g, lab in [((0, 0), "+e2"), ((0, 1), "+e1"), ((1, 1), "-e2")]:
        bits[region.index[g], labels.index(lab)] = 1
    w = P.BondEnvironment(region, bits)
    dep = P.dependence_process(w, 4)
    x = np.zeros(len(region), dtype=np.uint8)
    P._declare_sites(region.neighbors, w.bits, dep.levels, x)
    cl = P.cluster_explore(P.SiteConfig(region, x), 4)
    assert (1, 0) in dep.cumulative(3)
    assert (1, 0) not in cl.cumulative(4)


def test_coupling_identity_fails_often_on_grid():
    region = G.ball(G.int_grid(2), 7)
    bad = sum(not all(P.coupling_sample(region, 6, rng.trial_seed(9, i)).cumulative_agreement()) for i in range(100))
    assert bad > 0


def test_coupling_sample_declares_parities():
    region = G.ball(G.free_group(2), 4)
    cs = P.coupling_sample(region, 3, 11)
    assert cs.declared.any()
    assert not cs.declared[0]


def test_line_survival_matches_exact():
    spec = G.int_line()
    R = 10
    bott = P.site_bottlenecks(spec, R, 20000, 4)
    for p in (0.8, 0.9, 0.95):
        est = P.survival_probability("site-cluster", p, R, 20000, 4, spec, bott)
        assert est.consistent_with(P.line_survival_exact(p, R))


def _grid_r2_exact(p):
    spec = G.int_grid(2)
    b = G.ball(spec, 2)
    others = b.elements[1:]
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(others)):
        k = sum(bits)
        if reaches_sphere({g for g, v in zip(others, bits) if v}, spec, 2):
            total += p**k * (1 - p) ** (len(others) - k)
    return total


@pytest.mark.parametrize("p", [0.3, 0.6])
def test_grid_site_survival_matches_enumeration(p):
    est = P.survival_probability("site-cluster", p, 2, 20000, 8, G.int_grid(2))
    assert est.consistent_with(_grid_r2_exact(p))


def _bond_line_exact(p, R):
    spec = G.int_line()
    region = G.ball(spec, R)
    m = 2
    total = 0.0
    sphere = {R, -R}
    for bits in itertools.product((0, 1), repeat=len(region) * m):
        w = P.BondEnvironment(region, np.array(bits, dtype=np.uint8).reshape(len(region), m))
        cum = {0}
        cur = {0}
        ok = False
        while True:
            count = {}
            for g in cur:
                if abs(g) == R:
                    continue
                i = region.index[g]
                for j, s in enumerate((1, -1)):
                    if w.bits[i, j]:
                        count[g + s] = count.get(g + s, 0) + 1
            cur = {h for h, c in count.items() if c % 2}
            fresh = cur - cum
            if not fresh:
                break
            cum |= fresh
            if fresh & sphere:
                ok = True
                break
        if ok:
            k = sum(bits)
            total += p**k * (1 - p) ** (len(bits) - k)
    return total


def test_bond_survival_matches_enumeration():
    p, R = 0.7, 2
    est = P.survival_probability("bond-dependence", p, R, 20000, 3, G.int_line())
    assert est.consistent_with(_bond_line_exact(p, R))


@given(st.integers(0, 2**32), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_site_survival_monotone_under_shared_seed(seed, p1, p2):
    lo, hi = sorted((p1, p2))
    spec = G.int_grid(2)
    b = P.site_bottlenecks(spec, 4, 200, seed)
    a = P.survival_probability("site-cluster", lo, 4, 200, seed, spec, b)
    c = P.survival_probability("site-cluster", hi, 4, 200, seed, spec, b)
    assert a.successes <= c.successes


@given(st.integers(0, 2**32), st.floats(0.05, 0.95))
def test_bottleneck_agrees_with_direct_exploration(seed, p):
    spec = G.int_grid(2)
    R = 4
    b = P.site_bottlenecks(spec, R, 1, seed)[0]
    x = P.sample_sites(p, G.ball(spec, R), rng.trial_seed(seed, 0))
    assert (p > b) == (P.run_to_outcome(x, R).kind == "SurvivedToRadius")


def test_run_to_outcome_matches_naive_bfs():
    spec = G.int_grid(2)
    R = 5
    region = G.ball(spec, R)
    for s in range(50):
        x = P.sample_sites(0.55, region, s)
        st_ = P.run_to_outcome(x, R)
        assert (st_.kind == "SurvivedToRadius") == reaches_sphere(x.open_set(), spec, R)


def test_line_threshold_bisection():
    rep = P.threshold_estimate("site-cluster", 16, 20000, 5e-4, 12, G.int_line())
    assert abs(rep.p_star - P.line_threshold_exact(16)) < 0.004


def test_threshold_warns_on_non_monotone_curve(monkeypatch):
    # feed the bisection a survival curve that drops from 1 to 0.9 at p = 1/2
    from percolab.stats import Estimate

    def fake(mode, p, R, trials, seed, spec=None, bottleneck=None):
        k = trials if p < 0.5 else int(trials * 0.9)
        return P.SurvivalEstimate(k, trials, seed, {}, p=p, R=R, mode=mode)

    monkeypatch.setattr(P, "survival_probability", fake)
    with warnings.catch_warnings(record=True) as got:
        warnings.simplefilter("always")
        P.threshold_estimate("bond-dependence", 4, 10000, 0.01, 0, G.int_line())
    assert any("non-monotone" in str(w.message) for w in got)
    assert isinstance(fake("x", 0.5, 1, 10, 0), Estimate)


def test_escape_time_definition():
    spec = G.int_line()
    region = G.ball(spec, 12)
    w = P.all_open_bonds(region)
    # M_k on the open line reaches +-k, so it first leaves B_n at k = n + 1
    assert P.escape_time(w, 5) == 6
    assert P.escape_time(P.all_closed_bonds(region), 5) is None


def test_samples_are_prefix_consistent():
    spec = G.int_grid(2)
    small, big = G.ball(spec, 3), G.ball(spec, 6)
    a = P.sample_bonds(0.5, small, 77)
    b = P.sample_bonds(0.5, big, 77)
    assert np.array_equal(a.bits, b.bits[: len(small)])
    assert np.array_equal(P.sample_sites(0.5, small, 77).open_bits, P.sample_sites(0.5, big, 77).open_bits[: len(small)])


def test_trace_json_lists_levels():
    region = G.ball(G.int_line(), 3)
    tr = P.dependence_process(P.all_open_bonds(region), 2)
    assert tr.to_json()["levels"] == [[0], [-1, 1], [-2, 2]]
