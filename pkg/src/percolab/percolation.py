"""Bernoulli site and bond configurations on balls and the processes they drive.

* ``cluster_explore``: ``M'_n`` are the open sites reached from ``e`` by open
  walks of length ``n`` (``e`` itself need not be open).
* ``dependence_process``: ``M_n`` are the sites with an odd number of open bonds
  from ``M_{n-1}``; equivalently the support of ``phi^n(.)_e`` for the
  percolated additive rule.
* ``coupling_sample``: the staged joint construction of ``(x, w)`` at p = 1/2.

Bonds are directed: ``w[i, j]`` is the bond from ``g_i`` to ``g_i s_j`` and is
independent of the reverse bond.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from . import groups as G
from . import rng
from .errors import InputError, ResourceError
from .stats import Estimate, wilson_interval

DEFAULT_CHUNK = 512
PATH_BUDGET = 50_000_000


def _check_p(p):
    if not (isinstance(p, (int, float, np.floating)) and 0.0 <= p <= 1.0):
        raise InputError(f"probability must lie in [0, 1], got {p!r}")
    return float(p)


@dataclass(frozen=True, eq=False)
class SiteConfig:
    """Open (1) / closed (0) bits on every site of ``region``, in ball order."""

    region: G.Ball
    open_bits: np.ndarray

    def __post_init__(self):
        b = np.ascontiguousarray(self.open_bits, dtype=np.uint8)
        if b.shape != (len(self.region),):
            raise ValueError(f"expected {len(self.region)} site bits, got shape {b.shape}")
        object.__setattr__(self, "open_bits", b)

    def is_open(self, g):
        return bool(self.open_bits[self.region.index[g]])

    def open_set(self):
        return {self.region.elements[i] for i in np.flatnonzero(self.open_bits)}


@dataclass(frozen=True, eq=False)
class BondEnvironment:
    """Directed bond bits ``w_g(s)``: ``bits[i, j]`` is the bond ``(g_i, g_i s_j)``."""

    region: G.Ball
    bits: np.ndarray

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=np.uint8)
        m = len(G.generators(self.region.spec))
        if b.shape != (len(self.region), m):
            raise ValueError(f"expected bond bits of shape {(len(self.region), m)}, got {b.shape}")
        object.__setattr__(self, "bits", b)

    def bit(self, g, label):
        labels = [lab for lab, _ in G.generators(self.region.spec)]
        return int(self.bits[self.region.index[g], labels.index(label)])

    def restricted_to(self, radius):
        """The same environment on the prefix ball of the given radius."""
        b = G.ball(self.region.spec, radius)
        return BondEnvironment(b, self.bits[: len(b)])


def all_open_bonds(region):
    return BondEnvironment(region, np.ones((len(region), len(G.generators(region.spec))), dtype=np.uint8))


def all_closed_bonds(region):
    return BondEnvironment(region, np.zeros((len(region), len(G.generators(region.spec))), dtype=np.uint8))


def site_uniforms(region, seed):
    return rng.uniforms(seed, len(region), rng.SITES)


def sample_sites(p, region, seed):
    """Each site open independently with probability ``p`` (``u_g < p``)."""
    p = _check_p(p)
    return SiteConfig(region, (site_uniforms(region, seed) < p).astype(np.uint8))


def sample_bonds(p, region, seed):
    """Each directed bond open independently with probability ``p``."""
    p = _check_p(p)
    m = len(G.generators(region.spec))
    u = rng.uniforms(seed, len(region) * m, rng.BONDS).reshape(len(region), m)
    return BondEnvironment(region, (u < p).astype(np.uint8))


# --------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class Status:
    kind: str  # "Terminated" | "SurvivedToRadius" | "Truncated"
    value: int

    def __str__(self):
        return self.kind if self.kind == "Truncated" else f"{self.kind}({self.value})"


@dataclass(frozen=True, eq=False)
class ProcessTrace:
    """Levels ``M_0..M_n`` over a region, as index sets into the region's ball."""

    region: G.Ball
    levels: tuple
    status: Status

    @property
    def steps(self):
        return len(self.levels) - 1

    def level(self, n):
        return frozenset(self.region.elements[i] for i in self.levels[n])

    def cumulative(self, n=None):
        n = self.steps if n is None else n
        out = set()
        for lv in self.levels[: n + 1]:
            out.update(self.region.elements[i] for i in lv)
        return frozenset(out)

    def cumulative_indices(self, n=None):
        n = self.steps if n is None else n
        if n < 0:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([np.asarray(lv, dtype=np.int64) for lv in self.levels[: n + 1]]))

    def to_json(self):
        a = self.region.spec.arith
        return {
            "levels": [[a.to_json(self.region.elements[i]) for i in lv] for lv in self.levels],
            "status": str(self.status),
        }


def _status_from_levels(levels, region, R):
    """Status per the cumulative-stabilization rule, given levels 0..n."""
    cum = np.zeros(len(region), dtype=bool)
    cum[0] = True
    sphere = region.size_at(R - 1) if R > 0 else 0
    if R == 0:
        return Status("SurvivedToRadius", 0)
    for t in range(1, len(levels)):
        lv = np.asarray(levels[t], dtype=np.int64)
        fresh = lv[~cum[lv]]
        if fresh.size == 0:
            return Status("Terminated", t - 1)
        cum[fresh] = True
        if np.any(fresh >= sphere):
            return Status("SurvivedToRadius", R)
    return Status("Truncated", len(levels) - 1)


def _require_radius(region, R, what):
    if region.radius < R:
        raise ResourceError(f"{what} needs a region of radius >= {R}, got {region.radius}")


def dependence_process(w, R, steps=None):
    """Trace ``M_0..M_steps`` (default ``steps = R``) of the dependence process.

    ``M_n`` is computed from the bonds out of ``M_{n-1}`` only.
    """
    steps = R if steps is None else steps
    _require_radius(w.region, max(R, steps), "the dependence process")
    lv, overflow = K.dependence_levels(w.region.neighbors, w.bits, steps)
    if overflow:
        raise ResourceError("dependence process left the region")
    levels = tuple(tuple(np.flatnonzero(row).tolist()) for row in lv)
    return ProcessTrace(w.region, levels, _status_from_levels(levels, w.region, R))


def cluster_explore(x, R, steps=None):
    """Trace of the cluster exploration on ``x`` for ``steps`` steps (default ``R``)."""
    steps = R if steps is None else steps
    _require_radius(x.region, max(R, steps), "cluster exploration")
    lv, overflow = K.cluster_levels(x.region.neighbors, x.open_bits, steps)
    if overflow:
        raise ResourceError("cluster exploration left the region")
    levels = tuple(tuple(np.flatnonzero(row).tolist()) for row in lv)
    return ProcessTrace(x.region, levels, _status_from_levels(levels, x.region, R))


def _outcome_status(code, step, R):
    if code == K.TERMINATED:
        return Status("Terminated", int(step))
    if code == K.SURVIVED:
        return Status("SurvivedToRadius", R)
    if code == K.TRUNCATED:
        return Status("Truncated", int(step))
    raise ResourceError("process left the region")


def run_to_outcome(obj, R, max_steps=None):
    """Run the process of ``obj`` (SiteConfig or BondEnvironment) inside ``B_R``
    until its cumulative set stops growing or meets the sphere of radius ``R``."""
    region = obj.region
    _require_radius(region, R, "the process")
    sub = G.ball(region.spec, R)
    sphere = sub.size_at(R - 1) if R > 0 else 0
    cap = len(sub) + 1 if max_steps is None else max_steps
    nbr = sub.neighbors
    if isinstance(obj, BondEnvironment):
        s, t = K.dependence_outcomes(nbr, obj.bits[None, : len(sub)], sphere, cap)
    else:
        s, t = K.cluster_outcomes(nbr, obj.open_bits[None, : len(sub)], sphere, cap)
    return _outcome_status(s[0], t[0], R)


def escape_time(w, n, max_steps=None):
    """First step ``k`` with ``M_k`` not contained in ``B_n``; ``None`` if the
    process terminates first (or within ``max_steps`` it never leaves)."""
    region = w.region
    _require_radius(region, n + 1, "escape time")
    sub = G.ball(region.spec, n + 1)
    sphere = sub.size_at(n)
    cap = len(sub) + 1 if max_steps is None else max_steps
    s, t = K.dependence_outcomes(sub.neighbors, w.bits[None, : len(sub)], sphere, cap)
    return int(t[0]) if s[0] == K.SURVIVED else None


# --------------------------------------------------------------------------
# odd paths


def odd_path_set(w, length, budget=PATH_BUDGET):
    """Sites reached from ``e`` by an odd number of open walks of the given length."""
    if length > 12 and budget == PATH_BUDGET:
        raise ResourceError(f"walk length {length} exceeds the default enumeration limit of 12")
    _require_radius(w.region, length, "odd-path enumeration")
    par, used, exceeded = K.walk_parity_counts(w.region.neighbors, w.bits, length, budget)
    if exceeded:
        raise ResourceError(f"walk enumeration exceeded the budget of {budget} steps")
    return frozenset(w.region.elements[i] for i in np.flatnonzero(par))


def odd_path_parity(w, g, length, budget=PATH_BUDGET):
    """Parity of the number of open walks ``e = g_0, ..., g_length = g``."""
    g = w.region.spec.element(g)
    return int(g in odd_path_set(w, length, budget))


def parity_of_bits(bitvec):
    return int(np.bitwise_xor.reduce(np.asarray(bitvec, dtype=np.uint8))) if len(bitvec) else 0


# --------------------------------------------------------------------------
# coupling


@dataclass(frozen=True, eq=False)
class CouplingSample:
    x: SiteConfig
    w: BondEnvironment
    cluster: ProcessTrace
    dependence: ProcessTrace
    declared: np.ndarray  # sites whose state was set from bond parities

    def cumulative_agreement(self):
        """Per ``n``: whether ``M_{<=n}(w) == M'_{<=n}(x)``."""
        out = []
        for n in range(self.cluster.steps + 1):
            a = self.cluster.cumulative_indices(n)
            b = self.dependence.cumulative_indices(n)
            out.append(bool(np.array_equal(a, b)))
        return out


def coupling_sample(region, R, seed):
    """Joint sample of sites ``x`` and bonds ``w`` at p = 1/2 built in stages.

    Bonds are fair.  Site ``e`` and every site never reached by the staged
    construction are filled with independent fair bits; a site ``h`` first met
    in ``M_{n-1} S`` is declared open iff the number of open bonds from
    ``M_{n-1}`` into ``h`` is odd.
    """
    _require_radius(region, R + 1, "coupling_sample")
    w = sample_bonds(0.5, region, seed)
    dep = dependence_process(w, R)
    x = (site_uniforms(region, seed) < 0.5).astype(np.uint8)
    declared = _declare_sites(region.neighbors, w.bits, dep.levels, x)
    xc = SiteConfig(region, x)
    return CouplingSample(xc, w, cluster_explore(xc, R), dep, declared)


def _declare_sites(nbr, wbits, levels, x):
    n = nbr.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    declared = np.zeros(n, dtype=bool)
    for lv in levels:
        f = np.asarray(lv, dtype=np.int64)
        if f.size == 0:
            continue
        targets = nbr[f]
        fresh = np.unique(targets.ravel())
        fresh = fresh[(fresh >= 0) & ~seen[fresh]]
        if fresh.size == 0:
            continue
        open_t = targets[wbits[f].astype(bool)]
        counts = np.bincount(open_t[open_t >= 0], minlength=n)
        x[fresh] = counts[fresh] & 1
        seen[fresh] = True
        declared[fresh] = True
    return declared


# --------------------------------------------------------------------------
# survival and thresholds


@dataclass(frozen=True)
class SurvivalEstimate(Estimate):
    p: float = 0.0
    R: int = 0
    mode: str = ""

    def to_row(self):
        lo, hi = self.interval
        return {"p": self.p, "R": self.R, "trials": self.trials, "successes": self.successes, "estimate": self.point, "lo95": lo, "hi95": hi}


MODES = ("site-cluster", "bond-dependence")


def _mode(mode):
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def site_bottlenecks(spec, R, trials, seed, chunk=DEFAULT_CHUNK):
    """Per-trial critical values: trial ``i`` survives at ``p`` iff ``p > b_i``.

    Trial ``i`` uses the site uniforms of ``trial_seed(seed, i)`` on ``B_R``, the
    same coordinates :func:`sample_sites` reads, so all ``p`` share one coupling.
    """
    region = G.ball(spec, R)
    sphere = region.size_at(R - 1) if R > 0 else 0
    out = np.empty(trials)
    for start in range(0, trials, chunk):
        cnt = min(chunk, trials - start)
        seeds = rng.trial_seeds(seed, start, cnt)
        u = rng.uniforms(seeds, len(region), rng.SITES)
        out[start : start + cnt] = K.bottlenecks(region.neighbors, u, sphere)
    return out


def bond_outcomes(spec, p, R, trials, seed, chunk=DEFAULT_CHUNK):
    region = G.ball(spec, R)
    sphere = region.size_at(R - 1) if R > 0 else 0
    m = len(G.generators(spec))
    cap = len(region) + 1
    status = np.empty(trials, dtype=np.int64)
    for start in range(0, trials, chunk):
        cnt = min(chunk, trials - start)
        seeds = rng.trial_seeds(seed, start, cnt)
        u = rng.uniforms(seeds, len(region) * m, rng.BONDS).reshape(cnt, len(region), m)
        s, _ = K.dependence_outcomes(region.neighbors, (u < p).astype(np.uint8), sphere, cap)
        status[start : start + cnt] = s
    return status


def survival_probability(mode, p, R, trials, seed, spec=None, bottleneck=None):
    """Fraction of trials whose process reaches the sphere of radius ``R``.

    Site mode is monotone in ``p`` per trial; pass precomputed ``bottleneck``
    values to reuse the coupling across many ``p``.
    """
    mode = _mode(mode)
    p = _check_p(p)
    if not isinstance(trials, (int, np.integer)) or trials < 1:
        raise InputError(f"trials must be a positive int, got {trials!r}")
    spec = spec or G.int_line()
    if mode == "site-cluster":
        b = site_bottlenecks(spec, R, trials, seed) if bottleneck is None else bottleneck
        k = int(np.count_nonzero(p > b))
    else:
        k = int(np.count_nonzero(bond_outcomes(spec, p, R, trials, seed) == K.SURVIVED))
    return SurvivalEstimate(k, int(trials), int(seed), {}, p=p, R=int(R), mode=mode)


@dataclass(frozen=True)
class ThresholdReport:
    p_star: float
    bracket: tuple
    tolerance: float
    curve: tuple  # SurvivalEstimate per probe, in probe order
    warnings: tuple = ()
    mode: str = ""
    R: int = 0
    trials: int = 0
    seed: int = 0

    def to_dict(self):
        return {
            "p_star": self.p_star,
            "bracket": list(self.bracket),
            "tolerance": self.tolerance,
            "mode": self.mode,
            "R": self.R,
            "trials_per_probe": self.trials,
            "seed": self.seed,
            "warnings": list(self.warnings),
            "probes": len(self.curve),
        }


def threshold_estimate(mode, R, trials, tolerance, seed, spec=None, max_probes=64):
    """Bisection for ``survival = 1/2`` at radius ``R``.

    Each probe uses ``trials`` trials.  A probe whose 95% interval contains 1/2
    shrinks the bracket around itself by half instead of choosing a side.
    """
    mode = _mode(mode)
    if not tolerance > 0:
        raise InputError(f"tolerance must be positive, got {tolerance!r}")
    spec = spec or G.int_line()
    bott = site_bottlenecks(spec, R, trials, seed) if mode == "site-cluster" else None
    lo, hi = 0.0, 1.0
    curve = []
    notes = []
    for probe in range(max_probes):
        if (hi - lo) / 2 <= tolerance:
            break
        mid = (lo + hi) / 2
        if mode == "site-cluster":
            est = survival_probability(mode, mid, R, trials, seed, spec, bott)
        else:
            est = survival_probability(mode, mid, R, trials, rng.derive_seed(seed, probe), spec)
        curve.append(est)
        a, b = est.interval
        if a > 0.5:
            hi = mid
        elif b < 0.5:
            lo = mid
        else:
            q = (hi - lo) / 4
            lo, hi = mid - q, mid + q
    else:
        notes.append(f"probe limit {max_probes} reached before tolerance {tolerance}")
    ordered = sorted(curve, key=lambda e: e.p)
    for e1, e2 in zip(ordered, ordered[1:]):
        if e2.interval[1] < e1.interval[0]:
            notes.append(f"non-monotone survival: p={e1.p:.6g} -> {e1.point:.4g} but p={e2.p:.6g} -> {e2.point:.4g}")
    for n in notes:
        warnings.warn(n, RuntimeWarning, stacklevel=2)
    return ThresholdReport((lo + hi) / 2, (lo, hi), tolerance, tuple(curve), tuple(notes), mode, R, trials, seed)


def line_survival_exact(p, R):
    """Exact site survival to radius ``R`` on the integer line: ``2 p^R - p^{2R}``."""
    return 2 * p**R - p ** (2 * R)


def line_threshold_exact(R):
    """Root of ``2 p^R - p^{2R} = 1/2``: ``p = (1 - 1/sqrt 2)^{1/R}``."""
    return (1 - 1 / math.sqrt(2)) ** (1 / R)


def survival_curve_rows(curve):
    return [e.to_row() for e in sorted(curve, key=lambda e: e.p)]
