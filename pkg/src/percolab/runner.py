"""Experiment dispatch: config in, deterministic artifacts and a manifest out.

Artifacts (``results.json`` and any CSV tables) depend only on the config.
Wall time, thread count and other run facts live in ``manifest.json``.
"""

import csv
import io
import itertools
import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import norm

from . import __version__
from . import ca_core as C
from . import combinatorics as CB
from . import config as CFG
from . import dynamics as D
from . import groups as G
from . import percolation as P
from . import rng
from .errors import ConsistencyError, EncodingError, InputError, ResourceError, SpecError
from .stats import Z99, Estimate, wilson_interval

EXIT_OK, EXIT_INPUT, EXIT_RESOURCE, EXIT_ASSERT = 0, 1, 2, 3


@dataclass
class Outcome:
    results: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    checks: dict = field(default_factory=dict)  # name -> bool
    summary: dict = field(default_factory=dict)  # headline numbers, copied into the manifest

    def check(self, name, ok):
        self.checks[name] = bool(ok)


@dataclass
class RunResult:
    status: int
    out_dir: str
    manifest: dict
    outcome: Outcome = None
    error: str = ""

    @property
    def passed(self):
        return self.status == EXIT_OK


# --------------------------------------------------------------------------
# helpers


def _need(params, key):
    if key not in params:
        raise InputError(f"config field params.{key} is required for this experiment")
    return params[key]


def _elements(spec, values, field_name):
    try:
        return [spec.element(v) for v in values]
    except EncodingError as err:
        raise InputError(f"config field params.{field_name}: {err}") from None


def _element(spec, value, field_name):
    return _elements(spec, [value], field_name)[0]


def build_rule(spec, params):
    name = _need(params, "rule")
    try:
        if name == "identity":
            return C.make_identity(spec)
        if name == "shift":
            return C.make_shift(spec, _element(spec, _need(params, "shift"), "shift"))
        if name == "pine":
            return C.make_pine(spec)
        if name == "percolated-additive":
            return C.make_percolated_additive(spec)
        if name == "site-percolated-additive":
            return C.make_site_percolated_additive(spec)
        if name == "reversible-percolated":
            return C.make_reversible_percolated(spec)[0]
    except SpecError as err:
        raise InputError(f"config field params.rule: {err}") from None
    raise InputError(f"config field params.rule: unknown rule {name!r}")


def _window(spec, params):
    if "F" in params:
        return _elements(spec, params["F"], "F")
    if "F_radius" in params:
        return list(G.ball(spec, params["F_radius"]).elements)
    return [spec.identity()]


def _est_row(e, **extra):
    lo, hi = e.interval
    return {**extra, "trials": e.trials, "successes": e.successes, "estimate": e.point, "lo95": lo, "hi95": hi}


# --------------------------------------------------------------------------
# experiments


def run_percolate(spec, p, seed, out):
    mode, R, trials = p["mode"], p["R"], p["trials"]
    ps = p["p"] if isinstance(p["p"], list) else [p["p"]]
    bott = P.site_bottlenecks(spec, R, trials, seed) if mode == "site-cluster" else None
    rows = []
    for i, pv in enumerate(ps):
        s = seed if mode == "site-cluster" else rng.derive_seed(seed, i)
        est = P.survival_probability(mode, pv, R, trials, s, spec, bott)
        row = est.to_row()
        if p.get("exact", "none") == "line":
            exact = P.line_survival_exact(pv, R)
            row["exact"] = exact
            out.check(f"exact_line[p={pv!r}]", est.consistent_with(exact))
        rows.append(row)
    header = ["p", "R", "trials", "successes", "estimate", "lo95", "hi95"] + (["exact"] if p.get("exact") == "line" else [])
    out.tables["survival"] = (header, rows)
    out.results["survival"] = rows


def run_threshold(spec, p, seed, out):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = P.threshold_estimate(p["mode"], p["R"], p["trials"], p["tolerance"], seed, spec)
    out.results["threshold"] = rep.to_dict()
    out.summary["p_star"] = rep.p_star
    out.results["warnings"] = [str(w.message) for w in caught]
    out.tables["survival_curve"] = (["p", "R", "trials", "successes", "estimate", "lo95", "hi95"], P.survival_curve_rows(rep.curve))
    if "expect_exact_line_within" in p:
        root = P.line_threshold_exact(p["R"])
        out.results["exact_root"] = root
        out.check("p_star_near_exact_root", abs(rep.p_star - root) <= p["expect_exact_line_within"])
    if "expect_interval" in p:
        lo, hi = p["expect_interval"]
        out.check("p_star_in_interval", lo <= rep.p_star <= hi)


def _initial_pattern(spec, rule, cone, params):
    init = params.get("initial", {"zero": True})
    if "delta" in init:
        g = _element(spec, init["delta"], "initial.delta")
        if g not in cone:
            raise InputError("config field params.initial.delta lies outside the dependency cone")
        return C.delta(spec, g, cone)
    if "bitstring" in init:
        s = init["bitstring"]
        if len(s) != len(cone):
            raise InputError(f"config field params.initial.bitstring needs {len(cone)} symbols (cone in ball order)")
        return C.Pattern.from_bitstring(spec, cone, s)
    if "random_seed" in init:
        return C.random_pattern(spec, rule.alphabet, cone, init["random_seed"])
    return C.constant(spec, cone, 0)


def run_ca(spec, p, seed, out):
    rule = build_rule(spec, p)
    mode = p["mode"]
    a = spec.arith
    if mode == "orbit":
        F = _window(spec, p)
        T = _need(p, "T")
        cone = C.dependency_cone(spec, F, rule.memory_set, T)
        x = _initial_pattern(spec, rule, cone, p)
        orb = C.evolve(x, rule, F, T)
        out.results["window"] = [a.to_json(g) for g in orb.window]
        out.results["frames"] = orb.frames.tolist()
        out.results["final"] = orb.frame(T).to_json()
        rows = [{"t": t, **{json.dumps(a.to_json(g)): int(v) for g, v in zip(orb.window, fr)}} for t, fr in enumerate(orb.frames)]
        out.tables["orbit"] = (["t"] + [json.dumps(a.to_json(g)) for g in orb.window], rows)
    elif mode == "frequency":
        qs, n_max, trials = _need(p, "q"), _need(p, "n_max"), _need(p, "trials")
        site = _element(spec, p.get("site", a.to_json(spec.identity())), "site")
        symbol = p.get("symbol", 1)
        law = p.get("law", "none")
        if len(rule.alphabet.components) != 1:
            raise InputError("config field params.q: frequency mode needs a one-component binary alphabet")
        z = 3.0
        if p.get("familywise") and law != "none":
            # Bonferroni over every (q, n) pair at the two-sided 3 sigma level
            z = float(norm.ppf(1 - norm.sf(3) / (len(qs) * n_max)))
        out.results["z"] = z
        rows = []
        for qi, q in enumerate(qs):
            for n in range(1, n_max + 1):
                est = D.event_frequency(rule, site, n, symbol, trials, rng.derive_seed(seed, qi, n), (q,))
                row = _est_row(est, q=q, n=n, law_qn=q**n, law_qn1=q ** (n + 1))
                row["sigmas_from_qn"] = (est.point - q**n) / math.sqrt(q**n * (1 - q**n) / trials)
                row["sigmas_from_qn1"] = (est.point - q ** (n + 1)) / math.sqrt(q ** (n + 1) * (1 - q ** (n + 1)) / trials)
                rows.append(row)
                if law == "q^n":
                    out.check(f"law_q^n[q={q!r},n={n}]", est.consistent_with(q**n, z))
                elif law == "q^(n+1)":
                    out.check(f"law_q^(n+1)[q={q!r},n={n}]", est.consistent_with(q ** (n + 1), z))
        hdr = ["q", "n", "trials", "successes", "estimate", "lo95", "hi95", "law_qn", "sigmas_from_qn", "law_qn1", "sigmas_from_qn1"]
        out.tables["frequency"] = (hdr, rows)
        out.results["frequency"] = rows
    elif mode == "stability":
        F = _window(spec, p)
        T, trials = _need(p, "T"), _need(p, "trials")
        support = D.cone_support(rule, F, T)
        x = _initial_pattern(spec, rule, support, p)
        # fixed point on every site whose image the support determines
        nxt = rule.step(x)
        fixed = all(nxt[g] == x[g] for g in nxt.support)
        est = D.stability_prob(D.StabilityQuery(rule, x, F, T, None, None, trials, seed))
        bound = D.cylinder_lower_bound(rule)
        out.results.update({"fixed_point": fixed, "stability": est.to_dict(), "cylinder_lower_bound": bound})
        if p.get("initial", {"zero": True}).get("zero"):
            out.check("zero_is_fixed_point", fixed)
        out.check("stability_at_least_cylinder_bound", est.point >= bound - 3 * math.sqrt(bound * (1 - bound) / trials))
    elif mode == "almost-equicontinuity":
        rec = D.almost_equicontinuity_check(spec, p.get("F_radius", 2), _need(p, "samples"), _need(p, "perturbations"), _need(p, "T"), seed)
        out.results["record"] = rec.to_dict()
        out.check("no_orbit_disagreement_on_F", rec.failures == 0)
    elif mode == "round-trip":
        fails = D.reversible_round_trip(spec, _need(p, "windows"), _need(p, "T"), seed, p.get("F_radius", 1))
        out.results["failures"] = {"inverse_after_forward": fails[0], "forward_after_inverse": fails[1]}
        out.check("inverse_after_forward_exact", fails[0] == 0)
        out.check("forward_after_inverse_exact", fails[1] == 0)
    elif mode == "coset-factorization":
        F = _window(spec, p)
        T, trials = _need(p, "T"), _need(p, "trials")
        support = D.cone_support(rule, F, T)
        x = C.random_pattern(spec, rule.alphabet, support, rng.derive_seed(seed, 99), None, rng.AUX)
        try:
            rec = D.coset_factorization_check(rule, x, F, T, trials, seed)
        except SpecError as err:
            raise InputError(f"config field params.rule: {err}") from None
        out.results["factorization"] = rec.to_dict()
        out.check("joint_matches_product", rec.agrees)
        if "exact" in p:
            ex = p["exact"]
            out.check("joint_matches_exact", rec.joint.consistent_with(ex))
            out.check("product_matches_exact", abs(rec.product - ex) <= 3 * rec.product_sigma)
    else:
        raise InputError(f"config field params.mode: unknown mode {mode!r}")


def lucas_set(n):
    """``{g : C(n, (n+g)/2) odd}`` by Lucas: ``k & (n-k) == 0``."""
    return {2 * k - n for k in range(n + 1) if k & (n - k) == 0}


def run_dependence(spec, p, seed, out):
    env, steps = p["environment"], p["steps"]
    oracles = p.get("oracles", [])
    k = p.get("environments", 1) if env == "random" else 1
    region = G.ball(spec, steps)
    mism = {o: 0 for o in oracles}
    rows = []
    rule = C.make_percolated_additive(spec) if "ca" in oracles else None
    for i in range(k):
        if env == "random":
            w = P.sample_bonds(p.get("p", 0.5), region, rng.trial_seed(seed, i))
        elif env == "all-open":
            w = P.all_open_bonds(region)
        else:
            w = P.all_closed_bonds(region)
        tr = P.dependence_process(w, steps)
        rows.append({"environment": i, "status": str(tr.status), "sizes": " ".join(str(len(lv)) for lv in tr.levels)})
        if "ca" in oracles:
            mism["ca"] += _ca_oracle_mismatches(rule, w, tr, steps)
        if "lucas" in oracles:
            if spec.kind != "IntLine" or env != "all-open":
                raise InputError("config field params.oracles: the Lucas oracle needs IntLine with all bonds open")
            mism["lucas"] += sum(tr.level(n) != frozenset(lucas_set(n)) for n in range(steps + 1))
    out.results["traces"] = rows
    out.results["mismatches"] = mism
    out.tables["traces"] = (["environment", "status", "sizes"], rows)
    for o in oracles:
        out.check(f"oracle_{o}_exact", mism[o] == 0)


def _ca_oracle_mismatches(rule, w, trace, steps):
    """Compare ``M_n`` with ``{g : phi_w^n(delta_g)_e = 1}`` for ``n <= steps``."""
    spec = rule.spec
    ev = C.ConeEvaluator(rule, [spec.identity()], steps)
    region = w.region
    pos = np.array([region.index[g] for g in ev.universe])
    N = len(ev.universe)
    m = len(rule.alphabet.components) - 1
    wrow = D.environment_pattern(rule, ev.universe, np.zeros(N, dtype=np.int64), w.bits[pos]).values
    states = np.tile(wrow, (N, 1))
    states[np.arange(N), np.arange(N)] |= 1 << m  # delta_g for each g of the cone
    frames = ev.run(states)  # (N, steps+1, 1)
    bad = 0
    for n in range(steps + 1):
        hits = {ev.universe[j] for j in np.flatnonzero(frames[:, n, 0] >> m)}
        bad += hits != trace.level(n)
    return bad


def run_odd(spec, p, seed, out):
    steps = p["steps"]
    region = G.ball(spec, steps)
    bad = 0
    for i in range(p["environments"]):
        w = P.sample_bonds(p.get("p", 0.5), region, rng.trial_seed(seed, i))
        tr = P.dependence_process(w, steps)
        for n in range(steps + 1):
            bad += P.odd_path_set(w, n) != tr.level(n)
    out.results["mismatches"] = bad
    out.results["comparisons"] = p["environments"] * (steps + 1)
    out.check("odd_paths_match_dependence", bad == 0)


def run_coupling(spec, p, seed, out, clock):
    R, samples, checks = p["R"], p["samples"], p["checks"]
    region = G.ball(spec, p.get("region_radius", R + 1))
    if "identity" in checks or "marginal" in checks:
        mr = p.get("marginal_radius", min(3, R))
        nm = region.size_at(mr)
        counts = np.zeros(nm, dtype=np.int64)
        fail_by_n = np.zeros(R + 1, dtype=np.int64)
        failed = 0
        t0 = time.perf_counter()
        for i in range(samples):
            cs = P.coupling_sample(region, R, rng.trial_seed(seed, i))
            agree = cs.cumulative_agreement()
            fail_by_n += ~np.array(agree)
            failed += not all(agree)
            counts += cs.x.open_bits[:nm]
        clock["coupling_seconds"] = time.perf_counter() - t0
        out.results["coupling"] = {"samples": samples, "failed_samples": failed, "failures_by_n": fail_by_n.tolist()}
        if "identity" in checks:
            out.check("cumulative_sets_equal_every_sample", failed == 0)
        if "marginal" in checks:
            rows = []
            ok = True
            fam_z = float(norm.ppf(1 - 0.01 / (2 * nm)))
            fam_ok = True
            for j in range(nm):
                lo, hi = wilson_interval(int(counts[j]), samples, Z99)
                flo, fhi = wilson_interval(int(counts[j]), samples, fam_z)
                ok &= lo <= 0.5 <= hi
                fam_ok &= flo <= 0.5 <= fhi
                rows.append({"site": j, "element": str(region.elements[j]), "open": int(counts[j]), "samples": samples, "lo99": lo, "hi99": hi})
            out.tables["marginals"] = (["site", "element", "open", "samples", "lo99", "hi99"], rows)
            out.results["marginal"] = {"sites": nm, "radius": mr, "all_within_99": ok, "familywise_99_within": fam_ok, "familywise_z": fam_z}
            out.check("per_site_marginal_within_wilson99", ok)
    if "parity" in checks:
        nb = p.get("parity_max_bits", 8)
        exhaustive = {}
        for n in range(1, nb + 1):
            odd = sum(sum(v) & 1 for v in itertools.product((0, 1), repeat=n))
            exhaustive[n] = odd
        out.results["parity_exhaustive"] = {str(n): {"odd": v, "total": 2**n} for n, v in exhaustive.items()}
        out.check("xor_balanced_exhaustive", all(2 * v == 2**n for n, v in exhaustive.items()))
        sampled = {}
        trials = p.get("parity_trials", 10_000)
        for n in p.get("parity_sampled_bits", []):
            b = rng.bits(rng.trial_seeds(rng.derive_seed(seed, 17, n), 0, trials), n, 0.5, rng.AUX)
            k = int(np.count_nonzero(np.bitwise_xor.reduce(b, axis=1)))
            e = Estimate(k, trials, seed)
            sampled[str(n)] = e.to_dict()
            out.check(f"xor_fair_sampled[n={n}]", e.consistent_with(0.5))
        out.results["parity_sampled"] = sampled


def run_dichotomy(spec, p, seed, out):
    rule = build_rule(spec, p)
    F = _elements(spec, p["F"], "F")
    T = p["T"]
    rep = D.dichotomy_report(rule, F, T, p["n_max"], p["samples"], p["trials"], seed)
    d = rep.to_dict()
    out.results["report"] = d
    out.summary["verdict"] = rep.verdict
    out.tables["estimates"] = (
        ["sample", "trials", "successes", "estimate", "lo95", "hi95"],
        [_est_row(e, sample=i) for i, e in enumerate(rep.stability)],
    )
    out.tables["curves"] = (
        ["sample", "n", "ball_size", "estimate", "lo95", "hi95"],
        [{"sample": i, **r} for i, c in enumerate(rep.curves) for r in c.rows()],
    )
    if "expect_verdict" in p:
        out.check("verdict", rep.verdict == p["expect_verdict"])
    if p.get("check_shift_law"):
        out.check("all_samples_below_floor", all(e.point <= rep.floor for e in rep.stability))
        ht = p.get("horizon_trials", p["trials"])
        support = D.cone_support(rule, F, T)
        x = C.random_pattern(spec, rule.alphabet, support, rng.derive_seed(seed, 1, 0), None, rng.AUX)
        q = D.StabilityQuery(rule, x, F, T, None, None, ht, rng.derive_seed(seed, 31))
        rows = []
        for t, e in enumerate(D.stability_by_horizon(q)):
            ex = D.shift_stability_exact(t)
            rows.append(_est_row(e, T=t, exact=ex))
            out.check(f"shift_law[T={t}]", e.consistent_with(ex))
        out.tables["horizon_sweep"] = (["T", "trials", "successes", "estimate", "lo95", "hi95", "exact"], rows)
        out.results["horizon_sweep"] = rows


def run_density(spec, p, seed, out):
    if p["mode"] == "halfbound":
        rep = D.halfbound_experiment(spec, _need(p, "n_values"), _need(p, "environments"), p["trials"], seed, p.get("slack", 2))
        rows = [r.to_dict() for r in rep.records]
        out.tables["halfbound"] = (["environment", "n", "escape", "T", "trials", "successes", "estimate", "lo95", "hi95", "within_half_bound"], rows)
        n_hi = max(p["n_values"])
        frac = rep.escape_fraction(n_hi)
        out.results.update({"records": rows, "escaped": {str(k): v for k, v in rep.escaped.items()}, "environments": rep.environments, "escape_fraction_max_n": frac})
        out.check("all_estimates_within_half_bound", rep.all_within)
        if "min_escape_fraction" in p:
            out.check("escape_fraction_at_least_calibrated", frac >= p["min_escape_fraction"])
        return
    rule = build_rule(spec, p)
    F = _window(spec, p)
    T, n_max = _need(p, "T"), _need(p, "n_max")
    support = D.cone_support(rule, F, T, n_max)
    x = C.random_pattern(spec, rule.alphabet, support, p.get("base_seed", rng.derive_seed(seed, 1)), None, rng.AUX)
    curve = D.density_curve(rule, x, F, T, n_max, p["trials"], seed)
    rows = curve.rows()
    out.tables["curve"] = (["n", "ball_size", "estimate", "lo95", "hi95"], rows)
    out.results["curve"] = rows
    if p.get("check_shift_law"):
        for (n, _, e) in curve.points:
            out.check(f"shift_conditional[n={n}]", e.consistent_with(D.shift_conditional_exact(T, n)))


def _rand_fraction_vector(u):
    w = [int(x * 9) + 1 for x in u]
    s = sum(w)
    return [Fraction(v, s) for v in w]


def run_combinatorics(spec, p, seed, out):
    suite = p["suite"]
    if suite == "hall-strassen":
        n_inst = p.get("instances", 500)
        hs, ss = p.get("hall_size", 6), p.get("strassen_size", 5)
        hall_bad = strassen_bad = feasible = matched = 0
        for i in range(n_inst):
            s = rng.trial_seed(seed, i)
            u = rng.uniforms(s, hs * hs + 1, rng.AUX)
            dens = 0.15 + 0.35 * u[-1]
            edges = {(a, b) for a in range(hs) for b in range(hs) if u[a * hs + b] < dens}
            g = CB.BipartiteGraph(range(hs), range(hs), edges)
            res = CB.hall_matching(g)
            matched += res.found
            hall_bad += res.found != CB.has_perfect_matching_bruteforce(g)
            v = rng.uniforms(s, 3 * ss * ss + 2 * ss + 1, rng.STATE)
            pm = _rand_fraction_vector(v[:ss])
            qm = _rand_fraction_vector(v[ss : 2 * ss])
            rdens = 0.2 + 0.5 * v[-1]
            rel = {(a, b) for a in range(ss) for b in range(ss) if v[2 * ss + a * ss + b] < rdens}
            sr = CB.strassen_coupling(pm, qm, rel)
            feasible += sr.feasible
            strassen_bad += sr.feasible != CB.strassen_condition_bruteforce(pm, qm, rel)
        out.results.update({
            "instances": n_inst,
            "hall": {"size": hs, "matched": matched, "disagreements": hall_bad},
            "strassen": {"size": ss, "feasible": feasible, "disagreements": strassen_bad},
        })
        out.check("hall_matches_bruteforce", hall_bad == 0)
        out.check("strassen_matches_subset_oracle", strassen_bad == 0)
    elif suite == "tiling":
        d, L = p.get("d", 2), p.get("L", 10)
        grid = G.int_grid(d)
        t = CB.box_tiling(d, L, [(-2 * L, 2 * L)] * d)
        tile = list(t.tile)
        S = G.generator_elements(grid)
        bd = len(CB.boundary(grid, tile, S))
        king = [k for k in itertools.product((-1, 0, 1), repeat=d)]
        inv_king = CB.invariance_ratio(grid, tile, king)
        inv_std = CB.invariance_ratio(grid, tile, list(S) + [grid.identity()])
        out.results.update({
            "tiling": t.to_json(),
            "complete_tiles": len(t.complete),
            "boundary_size": bd,
            "boundary_ratio": bd / len(tile),
            "invariance_ratio_cube": [inv_king.numerator, inv_king.denominator],
            "invariance_ratio_cube_float": float(inv_king),
            "invariance_ratio_standard": [inv_std.numerator, inv_std.denominator],
            "invariance_ratio_standard_float": float(inv_std),
        })
        out.check("tiling_disjoint_cover", t.verify())
        out.check("boundary_formula", bd == L**d - max(L - 2, 0) ** d)
        out.check("invariance_formula_cube", inv_king == Fraction((L + 2) ** d - L**d, L**d))
    elif suite == "tile-coupling":
        L = p.get("tile_length", 8)
        rec = CB.tile_coupling_condition(p.get("alpha", 0.4), p.get("beta", 0.6), list(range(L)), [1, -1], G.int_line())
        out.results["record"] = rec.to_dict()
        if rec.satisfied:
            out.check("coupling_found_when_inequality_holds", rec.coupling is not None)
    elif suite == "renormalization":
        _renormalization(spec, p, seed, out)
    else:
        raise InputError(f"config field params.suite: unknown suite {suite!r}")


def _renormalization(spec, p, seed, out):
    alpha, ell = p.get("alpha", 0.1), p.get("ell", 3)
    cr = p.get("coarse_radius", 3)
    samples = p.get("samples", 100_000)
    coarse = G.ball(spec, cr).elements
    rad = 2 * ell + 1
    # grow the search ball until Delta can host every coarse site
    search = rad
    while True:
        Delta = CB.separated_covering_set(G.ball(spec, search), rad)
        if len(Delta) >= len(coarse):
            break
        search += rad
    inf = CB.inflation_matching(spec, coarse, Delta)
    fine_radius = max(G.word_length(spec, h) for h in inf.assignment.values()) + ell
    region = G.ball(spec, fine_radius)
    blocks = CB.zeta_block_indices(region, inf.assignment, ell, coarse)
    bsize = blocks.shape[1]
    bp = CB.beta_prime(alpha, bsize)
    ones = np.zeros(len(coarse), dtype=np.int64)
    pair = np.zeros((len(coarse), len(coarse)), dtype=np.int64)
    chunk = 8192
    for start in range(0, samples, chunk):
        cnt = min(chunk, samples - start)
        u = rng.uniforms(rng.trial_seeds(seed, start, cnt), len(region), rng.SITES)
        z = (u[:, blocks] < alpha).any(axis=2).astype(np.int64)  # (cnt, coarse)
        ones += z.sum(axis=0)
        pair += z.T @ z
    pooled = Estimate(int(ones.sum()), samples * len(coarse), seed)
    # pairwise correlation of coarse sites
    f = ones / samples
    max_z = 0.0
    for i, j in itertools.combinations(range(len(coarse)), 2):
        cov = pair[i, j] / samples - f[i] * f[j]
        # independent Bernoulli(bp) pair: sd of the sample covariance
        max_z = max(max_z, abs(cov) / (bp * (1 - bp) / math.sqrt(samples)))
    # Bonferroni over the pairs keeps the family at 3 sigma overall
    npairs = len(coarse) * (len(coarse) - 1) // 2
    zfam = float(norm.ppf(1 - norm.sf(3) / npairs))
    corr_ok = max_z <= zfam
    per_site = [Estimate(int(k), samples, seed).to_dict() for k in ones]
    # path implication
    lift_bad = lifted = 0
    for i in range(p.get("path_samples", 200)):
        x = P.sample_sites(max(alpha, 0.5), region, rng.derive_seed(seed, 23, i))
        zc = CB.renormalize(x, "zeta", inf.assignment, ell)
        for path in CB.coarse_open_paths(spec, zc, min(p.get("path_length", 3), len(coarse) - 1)):
            chk = CB.lift_path(x, path, inf.assignment, ell, inf.displacement)
            lifted += 1
            lift_bad += not chk.ok
    out.results.update({
        "alpha": alpha,
        "ell": ell,
        "ball_size": bsize,
        "beta_prime": bp,
        "Delta": [spec.arith.to_json(g) for g in Delta],
        "assignment": [[spec.arith.to_json(g), spec.arith.to_json(h)] for g, h in sorted(inf.assignment.items(), key=lambda kv: G.order_key(spec, kv[0]))],
        "displacement": inf.displacement,
        "pooled": pooled.to_dict(),
        "per_site": per_site,
        "max_abs_pair_z": max_z,
        "pair_z_familywise": zfam,
        "lifted_paths": lifted,
        "lift_failures": lift_bad,
        "step_bound": 2 * (ell + inf.displacement) + 1,
    })
    out.check("separated", CB.is_separated(spec, Delta, rad))
    out.check("pushforward_marginal_within_3sigma", pooled.consistent_with(bp))
    out.check("coarse_pairs_uncorrelated", corr_ok)
    out.check("zeta_path_implication_exact", lift_bad == 0 and lifted > 0)


DISPATCH = {
    "percolate": run_percolate,
    "threshold": run_threshold,
    "ca-run": run_ca,
    "dependence": run_dependence,
    "odd-percolation": run_odd,
    "dichotomy": run_dichotomy,
    "density-curve": run_density,
    "combinatorics-suite": run_combinatorics,
}


# --------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def table_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(h, "")) for h in header])
    return buf.getvalue()


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, Fraction):
        return [o.numerator, o.denominator]
    return o


def dumps(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


def threads_from_env():
    raw = os.environ.get("PERCOLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"PERCOLAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def output_dir(config, default_root="percolab-out"):
    if "output" in config and "dir" in config["output"]:
        return config["output"]["dir"]
    root = os.environ.get("PERCOLAB_OUTPUT_DIR", default_root)
    name = config.get("name") or CFG.config_hash(config)[:12]
    return os.path.join(root, name)


def run(config, out_dir=None):
    """Validate and execute ``config``; write artifacts; return a RunResult (never raises)."""
    t0 = time.perf_counter()
    manifest = {"tool_version": __version__, "criterion": config.get("criterion") if isinstance(config, dict) else None}
    out = Outcome()
    status, err = EXIT_OK, ""
    clock = {}
    try:
        spec = CFG.validate(config)
        manifest["config_hash"] = CFG.config_hash(config)
        threads = threads_from_env()
        # kernels are serial and trial chunks are fixed, so the count is recorded only
        manifest["threads"] = threads
        out_dir = out_dir or output_dir(config)
        kind = config["experiment"]
        params = config["params"]
        seed = config["master_seed"]
        if kind == "coupling-check":
            run_coupling(spec, params, seed, out, clock)
        else:
            DISPATCH[kind](spec, params, seed, out)
        if "max_seconds" in params and "coupling_seconds" in clock:
            # timing is a run fact: recorded in the manifest only
            manifest["runtime_check"] = {"seconds": clock["coupling_seconds"], "limit": params["max_seconds"],
                                         "passed": clock["coupling_seconds"] < params["max_seconds"]}
        if not all(out.checks.values()):
            status = EXIT_ASSERT
            err = "failed checks: " + ", ".join(k for k, v in out.checks.items() if not v)
        elif manifest.get("runtime_check", {}).get("passed") is False:
            status = EXIT_ASSERT
            err = "runtime limit exceeded"
    except (InputError, SpecError, EncodingError) as e:
        status, err = EXIT_INPUT, str(e)
    except ResourceError as e:
        status, err = EXIT_RESOURCE, str(e)
    except ConsistencyError as e:
        status, err = EXIT_ASSERT, f"internal consistency: {e}"
    manifest.update({
        "exit_status": status,
        "error": err,
        "checks": out.checks,
        "summary": out.summary,
        "passed": status == EXIT_OK,
        "wall_time_s": time.perf_counter() - t0,
    })
    if out_dir is None and status != EXIT_INPUT:
        out_dir = output_dir(config)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        names = []
        if status in (EXIT_OK, EXIT_ASSERT) and (out.results or out.tables):
            with open(os.path.join(out_dir, "results.json"), "w") as fh:
                fh.write(dumps({"config": config, "results": out.results, "summary": out.summary, "checks": out.checks}))
            names.append("results.json")
            for name, (hdr, rows) in sorted(out.tables.items()):
                fn = f"{name}.csv"
                with open(os.path.join(out_dir, fn), "w") as fh:
                    fh.write(table_csv(hdr, rows))
                names.append(fn)
        manifest["artifacts"] = names
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            fh.write(dumps(manifest))
    return RunResult(status, out_dir or "", manifest, out, err)
