"""Monte Carlo estimators for stability sets and density curves.

``C_T(x, F)`` is the set of ``y`` with ``phi^t(y)|F = phi^t(x)|F`` for every
``t <= T``; it decreases to ``C(x, F)`` as ``T`` grows.  Estimates sample ``y``
from a product marginal on the dependency cone, so every agreement indicator is
exact for its sample.  Conditioning on the cylinder of ``x`` on ``J`` keeps ``x``
on ``J`` and resamples everything else.

Coordinates of trial ``i`` are always drawn from ``trial_seed(seed, i)`` at the
cone position of the site, and cones for larger horizons extend those for
smaller ones, so estimates for different ``T`` (or different ``J``) on the same
seed are computed on literally the same perturbations.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import ca_core as C
from . import groups as G
from . import percolation as P
from . import rng
from .errors import SpecError
from .stats import Estimate

DEFAULT_CHUNK = 2048
EQUI_CEILING = 0.9


def sensitivity_floor(T):
    return 2.0 * 2.0 ** (-(T + 1))


@dataclass(frozen=True, eq=False)
class StabilityQuery:
    """Everything needed to estimate ``mu(C_T(x, F) | [x_J])``."""

    rule: C.LocalRule
    x: C.Pattern
    F: tuple
    T: int
    J: tuple = None
    marginal: tuple = None
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.F:
            raise ValueError("observation set F must be nonempty")
        if self.T < 0 or self.trials < 1:
            raise ValueError("horizon must be >= 0 and trials >= 1")
        object.__setattr__(self, "F", C.canonical_order(self.rule.spec, self.F))
        if self.J is not None:
            J = tuple(self.J)
            missing = [g for g in J if g not in self.x.index]
            if missing:
                raise ValueError(f"conditioning set leaves the support of x, e.g. {missing[:3]}")
            object.__setattr__(self, "J", J)

    def describe(self):
        spec = self.rule.spec
        return {
            "rule": self.rule.name,
            "group": spec.to_json(),
            "F": [spec.arith.to_json(g) for g in self.F],
            "T": self.T,
            "J_size": None if self.J is None else len(self.J),
            "marginal": None if self.marginal is None else list(self.marginal),
            "trials": self.trials,
            "seed": self.seed,
        }


def agreement_profile(q, chunk=DEFAULT_CHUNK):
    """Per trial, the first time at which the orbit on ``F`` disagrees (``T+1`` if never).

    ``profile <= t`` is exactly the complement of ``C_t``; estimates for all
    horizons up to ``T`` follow from one profile.
    """
    ev = C.ConeEvaluator(q.rule, q.F, q.T)
    base = ev.gather(q.x)
    ref = ev.run(base)
    keep = None
    if q.J is not None:
        mask = np.zeros(len(ev.universe), dtype=bool)
        for g in q.J:
            i = ev.index.get(g)
            if i is not None:
                mask[i] = True
        keep = np.flatnonzero(mask)
    out = np.empty(q.trials, dtype=np.int64)
    n = len(ev.universe)
    for start in range(0, q.trials, chunk):
        cnt = min(chunk, q.trials - start)
        seeds = rng.trial_seeds(q.seed, start, cnt)
        y = C.sample_states(q.rule.alphabet, seeds, n, q.marginal)
        if keep is not None:
            y[:, keep] = base[keep]
        frames = ev.run(y)
        bad = np.any(frames != ref, axis=-1)  # (cnt, T+1)
        first = np.where(bad.any(axis=1), bad.argmax(axis=1), q.T + 1)
        out[start : start + cnt] = first
    return out


def _estimate(q, profile, T=None):
    T = q.T if T is None else T
    k = int(np.count_nonzero(profile > T))
    return Estimate(k, q.trials, q.seed, {"T": T})


def stability_prob(q):
    """Estimate of ``mu(C_T(x, F))``; any conditioning set on ``q`` is ignored."""
    if q.J is not None:
        q = StabilityQuery(q.rule, q.x, q.F, q.T, None, q.marginal, q.trials, q.seed)
    return _estimate(q, agreement_profile(q))


def stability_by_horizon(q):
    """Estimates for every horizon ``0..T`` on shared samples."""
    prof = agreement_profile(q)
    return [_estimate(q, prof, t) for t in range(q.T + 1)]


def conditional_stability_prob(q):
    """Estimate of ``mu(C_T(x, F) | [x_J])``."""
    if q.J is None:
        raise ValueError("conditional estimate needs a conditioning set J")
    return _estimate(q, agreement_profile(q))


def cone_support(rule, F, T, n_max=0):
    """Sites on which a base configuration must be known: the cone and ``B_{n_max}``."""
    cone = C.dependency_cone(rule.spec, F, rule.memory_set, T)
    extra = G.ball(rule.spec, n_max).elements
    return C.canonical_order(rule.spec, set(cone) | set(extra))


@dataclass(frozen=True)
class DensityCurve:
    points: tuple  # (n, |B_n|, Estimate)

    def estimates(self):
        return [e.point for _, _, e in self.points]

    def rows(self):
        out = []
        for n, size, e in self.points:
            lo, hi = e.interval
            out.append({"n": n, "ball_size": size, "estimate": e.point, "lo95": lo, "hi95": hi})
        return out


def density_curve(rule, x, F, T, n_max, trials, seed, marginal=None):
    """Conditional stability given ``[x_{B_n}]`` for ``n = 0..n_max``."""
    pts = []
    for n in range(n_max + 1):
        b = G.ball(rule.spec, n)
        q = StabilityQuery(rule, x, F, T, b.elements, marginal, trials, seed)
        pts.append((n, len(b), conditional_stability_prob(q)))
    return DensityCurve(tuple(pts))


@dataclass(frozen=True)
class DichotomyReport:
    stability: tuple  # Estimate per sample
    curves: tuple  # DensityCurve per sample
    floor: float
    ceiling: float
    verdict: str
    query: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def fraction_below_floor(self):
        return float(np.mean([e.point <= self.floor for e in self.stability]))

    @property
    def fraction_converged(self):
        return float(np.mean([c.points[-1][2].point >= self.ceiling for c in self.curves]))

    def to_dict(self):
        return {
            "query": self.query,
            "estimates": [e.to_dict() for e in self.stability],
            "curve": [c.rows() for c in self.curves],
            "verdict": self.verdict,
            "seed": self.seed,
            "thresholds": {"sensitivity_floor": self.floor, "equicontinuity_ceiling": self.ceiling},
            "summary": {
                "fraction_below_floor": self.fraction_below_floor,
                "fraction_converged": self.fraction_converged,
            },
        }


def _verdict(below, converged):
    if converged == 1.0:
        return "consistent-with-equicontinuous"
    if below == 1.0:
        return "consistent-with-sensitive"
    return "neither-at-this-scale"


def dichotomy_report(rule, F, T, n_max, samples, trials, seed, marginal=None):
    """Stability estimates and density curves for ``samples`` random base points.

    Verdicts describe these finite data: all curves ending at or above the
    ceiling reads as equicontinuous, all stability estimates at or below the
    floor ``2 * 2^-(T+1)`` as sensitive, anything else as neither.
    """
    F = C.canonical_order(rule.spec, F)
    support = cone_support(rule, F, T, n_max)
    stab, curves = [], []
    for i in range(samples):
        x = C.random_pattern(rule.spec, rule.alphabet, support, rng.derive_seed(seed, 1, i), marginal, rng.AUX)
        s_i = rng.derive_seed(seed, 2, i)
        stab.append(stability_prob(StabilityQuery(rule, x, F, T, None, marginal, trials, s_i)))
        curves.append(density_curve(rule, x, F, T, n_max, trials, s_i, marginal))
    floor = sensitivity_floor(T)
    below = float(np.mean([e.point <= floor for e in stab]))
    conv = float(np.mean([c.points[-1][2].point >= EQUI_CEILING for c in curves]))
    query = {
        "rule": rule.name,
        "group": rule.spec.to_json(),
        "F": [rule.spec.arith.to_json(g) for g in F],
        "T": T,
        "n_max": n_max,
        "samples": samples,
        "trials": trials,
    }
    return DichotomyReport(tuple(stab), tuple(curves), floor, EQUI_CEILING, _verdict(below, conv), query, seed)


# --------------------------------------------------------------------------
# exact laws used as oracles


def shift_stability_exact(T):
    return 2.0 ** (-(T + 1))


def shift_conditional_exact(T, n):
    """Shift by +1 on Z, ``F = {0}``, conditioning on ``[-n, n]``."""
    return min(1.0, 2.0 ** (-max(0, T - n)))


def event_frequency(rule, g, t, symbol, trials, seed, marginal=None, chunk=DEFAULT_CHUNK):
    """Estimate ``P(phi^t(y)_g = symbol)`` for ``y`` drawn from the product marginal."""
    ev = C.ConeEvaluator(rule, [rule.spec.element(g)], t)
    n = len(ev.universe)
    k = 0
    for start in range(0, trials, chunk):
        cnt = min(chunk, trials - start)
        y = C.sample_states(rule.alphabet, rng.trial_seeds(seed, start, cnt), n, marginal)
        k += int(np.count_nonzero(ev.run(y)[:, t, 0] == symbol))
    return Estimate(k, trials, seed, {"t": t, "symbol": symbol})


# --------------------------------------------------------------------------
# coset factorization


def axis_subgroup(spec, K):
    """Index of the coordinate axis of ``IntGrid`` containing all of ``K``."""
    if spec.kind != "IntGrid" or spec.ball_power is not None:
        raise SpecError(f"coset factorization is implemented for IntGrid with standard generators, not {spec}")
    d = spec.arith.d
    for axis in range(d):
        if all(all(k[j] == 0 for j in range(d) if j != axis) for k in K):
            return axis
    raise SpecError(f"memory set {K} does not lie in a coordinate axis subgroup")


@dataclass(frozen=True)
class FactorizationRecord:
    joint: Estimate
    factors: tuple
    product: float
    product_sigma: float
    difference: float
    sigma: float
    cosets: int

    @property
    def agrees(self):
        return abs(self.difference) <= 3 * self.sigma if self.sigma > 0 else self.difference == 0

    def to_dict(self):
        return {
            "joint": self.joint.to_dict(),
            "factors": [f.to_dict() for f in self.factors],
            "product": self.product,
            "product_sigma": self.product_sigma,
            "difference": self.difference,
            "sigma": self.sigma,
            "cosets": self.cosets,
            "agrees": self.agrees,
        }


def _binom_sigma(e):
    # plus-four style guard keeps zero-count factors from giving zero spread
    p = (e.successes + 2) / (e.trials + 4)
    return math.sqrt(p * (1 - p) / e.trials)


def coset_factorization_check(rule, x, F, T, trials, seed, marginal=None):
    """Compare ``mu(C_T(x, F))`` with the product over the cosets ``F_i`` of ``F``."""
    spec = rule.spec
    axis = axis_subgroup(spec, rule.memory_set)
    F = C.canonical_order(spec, F)
    groups = {}
    for g in F:
        key = tuple(v for j, v in enumerate(g) if j != axis)
        groups.setdefault(key, []).append(g)
    joint = stability_prob(StabilityQuery(rule, x, F, T, None, marginal, trials, seed))
    factors = []
    for i, key in enumerate(sorted(groups)):
        q = StabilityQuery(rule, x, groups[key], T, None, marginal, trials, rng.derive_seed(seed, 7, i))
        factors.append(stability_prob(q))
    prod = float(np.prod([f.point for f in factors]))
    var = 0.0
    for f in factors:
        rest = float(np.prod([h.point for h in factors if h is not f]))
        var += (rest * _binom_sigma(f)) ** 2
    sig = math.sqrt(var + _binom_sigma(joint) ** 2)
    return FactorizationRecord(joint, tuple(factors), prod, math.sqrt(var), joint.point - prod, sig, len(groups))


# --------------------------------------------------------------------------
# percolated additive experiments


def percolated_components(rule, pattern):
    """Split ordinals of the percolated additive alphabet into ``(x, w)``."""
    m = len(rule.alphabet.components) - 1
    v = np.asarray(pattern.values if hasattr(pattern, "values") else pattern, dtype=np.int64)
    return v >> m, v & ((1 << m) - 1)


def environment_pattern(rule, support, x_bits, w_rows):
    """Percolated-additive pattern from site bits and bond rows (generator order)."""
    m = len(rule.alphabet.components) - 1
    weights = 1 << np.arange(m - 1, -1, -1)
    w = (np.asarray(w_rows, dtype=np.int64) * weights).sum(axis=-1)
    return C.Pattern(rule.spec, support, (np.asarray(x_bits, dtype=np.int64) << m) | w)


@dataclass(frozen=True)
class HalfBoundRecord:
    environment: int
    n: int
    escape: int
    T: int
    estimate: Estimate

    @property
    def within(self):
        return self.estimate.at_most(0.5)

    def to_dict(self):
        return {
            "environment": self.environment,
            "n": self.n,
            "escape": self.escape,
            "T": self.T,
            **self.estimate.to_dict(),
            "within_half_bound": self.within,
        }


@dataclass(frozen=True)
class HalfBoundReport:
    records: tuple
    environments: int
    escaped: dict  # n -> number of environments escaping B_n

    def escape_fraction(self, n):
        return self.escaped[n] / self.environments

    @property
    def all_within(self):
        return all(r.within for r in self.records)


def halfbound_experiment(spec, n_values, environments, trials, seed, slack=2):
    """Density estimates given ``[z_{B_n}]`` for environments whose dependence process leaves ``B_n``.

    Base points ``z = (x, w)`` are fair.  For each ``n`` the horizon is the
    escape time plus ``slack``.
    """
    rule = C.make_percolated_additive(spec)
    n_hi = max(n_values)
    escaped = {n: 0 for n in n_values}
    records = []
    for e in range(environments):
        es = rng.derive_seed(seed, 11, e)
        region = G.ball(spec, n_hi + 1)
        w_small = P.sample_bonds(0.5, region, es)
        times = {n: P.escape_time(w_small, n) for n in n_values}
        live = [n for n in n_values if times[n] is not None]
        if not live:
            continue
        T_max = max(times[n] for n in live) + slack
        support = cone_support(rule, [spec.identity()], T_max, n_hi)
        big = G.ball(spec, max(T_max, n_hi + 1))
        # the environment on the small ball is a prefix of the same seeded field
        w = P.sample_bonds(0.5, big, es)
        xs = P.sample_sites(0.5, big, es)
        pos = [big.index[g] for g in support]
        z = environment_pattern(rule, support, xs.open_bits[pos], w.bits[pos])
        for n in live:
            escaped[n] += 1
            T = times[n] + slack
            q = StabilityQuery(rule, z, [spec.identity()], T, G.ball(spec, n).elements, None, trials, rng.derive_seed(es, n))
            records.append(HalfBoundRecord(e, n, times[n], T, conditional_stability_prob(q)))
    return HalfBoundReport(tuple(records), environments, escaped)


def is_fixed_point(rule, x, F):
    """Exact check that one step leaves ``x`` unchanged on ``F``."""
    orb = C.evolve(x, rule, F, 1)
    return bool(np.array_equal(orb.frames[0], orb.frames[1]))


def zero_configuration(rule, support):
    return C.constant(rule.spec, support, 0)


def cylinder_lower_bound(rule):
    """``2^-(|K| * components)``: the fair measure of the cylinder of a pattern on ``K``."""
    return 2.0 ** (-(len(rule.memory_set) * len(rule.alphabet.components)))


@dataclass(frozen=True)
class AlmostEquiRecord:
    samples: int
    perturbations: int
    failures: int
    failures_on_E: int
    T: int

    def to_dict(self):
        return dict(self.__dict__)


def almost_equicontinuity_check(spec, F_radius, samples, perturbations, T, seed):
    """Agreement of orbits for perturbations of ``z'`` fixed on ``E = F S``.

    ``z' = (x, w')`` with ``w'`` equal to ``w`` on ``F = B_r`` and all bonds
    closed elsewhere.  Counts perturbations whose orbit on ``F`` (and on ``E``)
    differs from that of ``z'`` at some time ``t <= T``.
    """
    rule = C.make_percolated_additive(spec)
    F = G.ball(spec, F_radius).elements
    E = G.ball(spec, F_radius + 1).elements if spec.ball_power is None else None
    if E is None:
        mul = spec.arith.multiply
        E = C.canonical_order(spec, {mul(f, s) for f in F for s in G.generator_elements(spec)} | set(F))
    m = len(rule.alphabet.components) - 1
    wmask = (1 << m) - 1
    ev_E = C.ConeEvaluator(rule, E, T)
    # F is a prefix of E in ball order, so frames on F are the first |F| columns
    nF = len(F)
    u = ev_E.universe
    Fset = set(F)
    inF = np.array([g in Fset for g in u])
    inE = np.zeros(len(u), dtype=bool)
    inE[: len(E)] = True
    fails = fails_E = 0
    for i in range(samples):
        z = C.sample_states(rule.alphabet, rng.derive_seed(seed, 3, i), len(u))
        zp = np.where(inF, z, z & ~wmask)
        ref = ev_E.run(zp)
        seeds = rng.trial_seeds(rng.derive_seed(seed, 4, i), 0, perturbations)
        y = C.sample_states(rule.alphabet, seeds, len(u))
        y[:, inE] = zp[inE]
        fr = ev_E.run(y)
        diff = fr != ref
        fails += int(np.count_nonzero(diff[..., :nF].any(axis=(-1, -2))))
        fails_E += int(np.count_nonzero(diff.any(axis=(-1, -2))))
    return AlmostEquiRecord(samples, perturbations, fails, fails_E, T)


def reversible_round_trip(spec, windows, T, seed, F_radius=1):
    """Count failures of ``inverse^T o forward^T`` and ``forward^T o inverse^T`` on random windows.

    The forward orbit is computed on the cone needed by the inverse, so each
    composite is evaluated exactly on ``F = B_r``.
    """
    fwd, inv = C.make_reversible_percolated(spec)
    F = G.ball(spec, F_radius).elements
    K = fwd.memory_set
    # phi^T then psi^T on F needs values on cone(F, K, 2T)
    outer = C.ConeEvaluator(fwd, F, 2 * T)
    u = outer.universe
    mid = C.cone_levels(spec, F, K, T)[-1]
    fails = [0, 0]
    for i in range(windows):
        z = C.Pattern(spec, u, C.sample_states(fwd.alphabet, rng.derive_seed(seed, 5, i), len(u)))
        for which, (a, b) in enumerate(((fwd, inv), (inv, fwd))):
            first = C.ConeEvaluator(a, mid, T)
            img = C.Pattern(spec, first.window, first.run(first.gather(z))[T])
            back = C.evolve(img, b, F, T).frames[T]
            if not np.array_equal(back, z.restrict(C.canonical_order(spec, F)).values):
                fails[which] += 1
    return tuple(fails)
