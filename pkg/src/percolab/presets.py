"""Named experiment configs, one acceptance criterion each."""

import copy

from .errors import InputError

_Z2 = {"kind": "IntGrid", "params": {"d": 2}}
_LINE = {"kind": "IntLine"}
_F2 = {"kind": "FreeGroup", "params": {"k": 2}}

# Fraction of fair IntGrid(2) environments whose dependence process leaves B_5,
# from a calibration run over 4000 environments (seeds unrelated to the preset's).
HALFBOUND_CALIBRATED_ESCAPE = 0.78

_PRESETS = {
    "coupling-f2": {
        "criterion": 1,
        "experiment": "coupling-check",
        "group": _F2,
        "master_seed": 20240101,
        "params": {"R": 6, "region_radius": 7, "samples": 10_000, "checks": ["identity"], "max_seconds": 60},
    },
    "parity-lemma": {
        "criterion": 2,
        "experiment": "coupling-check",
        "group": _F2,
        "master_seed": 20240102,
        "params": {
            "R": 6,
            "region_radius": 7,
            "samples": 10_000,
            "checks": ["marginal", "parity"],
            "marginal_radius": 2,
            "parity_max_bits": 8,
            "parity_sampled_bits": [16, 32, 64],
            "parity_trials": 10_000,
        },
    },
    "dependence-oracle": {
        "criterion": 3,
        "experiment": "dependence",
        "group": _Z2,
        "master_seed": 20240103,
        "params": {"environment": "random", "p": 0.5, "environments": 200, "steps": 4, "oracles": ["ca"]},
    },
    "odd-percolation-z2": {
        "criterion": 3,
        "experiment": "odd-percolation",
        "group": _Z2,
        "master_seed": 20240113,
        "params": {"p": 0.5, "environments": 200, "steps": 6},
    },
    "rule90-line": {
        "criterion": 4,
        "experiment": "dependence",
        "group": _LINE,
        "master_seed": 20240104,
        "params": {"environment": "all-open", "steps": 64, "oracles": ["lucas"]},
    },
    "pine-law": {
        "criterion": 5,
        "experiment": "ca-run",
        "group": _LINE,
        "master_seed": 20240105,
        "params": {
            "rule": "pine",
            "mode": "frequency",
            "q": [0.3, 0.5, 0.7],
            "n_max": 8,
            "trials": 100_000,
            "site": 0,
            "symbol": 1,
            "law": "q^n",
        },
    },
    "pine-law-exact": {
        "criterion": 5,
        "experiment": "ca-run",
        "group": _LINE,
        "master_seed": 20240105,
        "params": {
            "rule": "pine",
            "mode": "frequency",
            "q": [0.3, 0.5, 0.7],
            "n_max": 8,
            "trials": 100_000,
            "site": 0,
            "symbol": 1,
            "law": "q^(n+1)",
            "familywise": True,
        },
    },
    "shift-Z": {
        "criterion": 6,
        "experiment": "dichotomy",
        "group": _LINE,
        "master_seed": 20240106,
        "params": {
            "rule": "shift",
            "shift": 1,
            "F": [0],
            "T": 6,
            "n_max": 4,
            "samples": 10,
            "trials": 20_000,
            "expect_verdict": "consistent-with-sensitive",
            "horizon_trials": 100_000,
            "check_shift_law": True,
        },
    },
    "halfbound-z2": {
        "criterion": 7,
        "experiment": "density-curve",
        "group": _Z2,
        "master_seed": 20240107,
        "params": {
            "mode": "halfbound",
            "n_values": [2, 3, 4, 5],
            "environments": 40,
            "trials": 2000,
            "slack": 2,
            "min_escape_fraction": 0.3,
            "calibrated_escape_fraction": HALFBOUND_CALIBRATED_ESCAPE,
        },
    },
    "nonsensitive-zero": {
        "criterion": 8,
        "experiment": "ca-run",
        "group": _Z2,
        "master_seed": 20240108,
        "params": {"rule": "percolated-additive", "mode": "stability", "F": [[0, 0]], "T": 20,
                   "initial": {"zero": True}, "trials": 10_000},
    },
    "threshold-line": {
        "criterion": 9,
        "experiment": "threshold",
        "group": _LINE,
        "master_seed": 20240109,
        "params": {"mode": "site-cluster", "R": 64, "trials": 10_000, "tolerance": 1e-4,
                   "expect_exact_line_within": 0.002},
    },
    "threshold-z2": {
        "criterion": 9,
        "experiment": "threshold",
        "group": _Z2,
        "master_seed": 20240119,
        "params": {"mode": "site-cluster", "R": 64, "trials": 10_000, "tolerance": 0.002,
                   "expect_interval": [0.55, 0.65]},
    },
    "hall-strassen": {
        "criterion": 10,
        "experiment": "combinatorics-suite",
        "group": _LINE,
        "master_seed": 20240110,
        "params": {"suite": "hall-strassen", "instances": 500, "hall_size": 6, "strassen_size": 5},
    },
    "almost-equi": {
        "criterion": 11,
        "experiment": "ca-run",
        "group": _Z2,
        "master_seed": 20240111,
        "params": {"rule": "percolated-additive", "mode": "almost-equicontinuity", "F_radius": 2,
                   "samples": 100, "perturbations": 100, "T": 20},
    },
    "reversible": {
        "criterion": 12,
        "experiment": "ca-run",
        "group": _Z2,
        "master_seed": 20240112,
        "params": {"rule": "reversible-percolated", "mode": "round-trip", "windows": 1000, "T": 3, "F_radius": 1},
    },
    "coset-axis": {
        "criterion": 13,
        "experiment": "ca-run",
        "group": _Z2,
        "master_seed": 20240123,
        "params": {"rule": "shift", "shift": [1, 0], "mode": "coset-factorization", "F": [[0, 0], [0, 1]],
                   "T": 4, "trials": 100_000, "exact": 2.0**-10},
    },
    "renormalization": {
        "criterion": 14,
        "experiment": "combinatorics-suite",
        "group": _LINE,
        "master_seed": 20240114,
        "params": {"suite": "renormalization", "alpha": 0.1, "ell": 3, "samples": 100_000,
                   "coarse_radius": 3, "path_length": 3, "path_samples": 200},
    },
}


def names():
    return sorted(_PRESETS)


def preset(name):
    """A fresh copy of the named config (``name`` field filled in)."""
    try:
        cfg = copy.deepcopy(_PRESETS[name])
    except KeyError:
        raise InputError(f"unknown preset {name!r}; try list-presets") from None
    return {"name": name, **cfg}
