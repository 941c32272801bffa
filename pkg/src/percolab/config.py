"""Experiment configuration: JSON schema, validation and canonical hashing."""

import hashlib
import json

import jsonschema

from . import groups as G
from .errors import EncodingError, InputError, SpecError

EXPERIMENTS = (
    "percolate",
    "threshold",
    "ca-run",
    "dependence",
    "coupling-check",
    "dichotomy",
    "density-curve",
    "odd-percolation",
    "combinatorics-suite",
)

RULES = ("identity", "shift", "pine", "percolated-additive", "site-percolated-additive", "reversible-percolated")
MODES = ("site-cluster", "bond-dependence")

_int0 = {"type": "integer", "minimum": 0}
_int1 = {"type": "integer", "minimum": 1}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_open_prob = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_element = {"type": ["integer", "array", "string"]}
_elements = {"type": "array", "items": _element, "minItems": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


GROUP_SCHEMA = _obj(
    {
        "kind": {"enum": list(G.KINDS)},
        "params": {"type": "object"},
        "generators": {
            "oneOf": [{"const": "standard"}, _obj({"ball_power": _int1}, ["ball_power"])]
        },
    },
    ["kind"],
)

PARAM_SCHEMAS = {
    "percolate": _obj(
        {
            "mode": {"enum": list(MODES)},
            "p": {"oneOf": [_prob, {"type": "array", "items": _prob, "minItems": 1}]},
            "R": _int0,
            "trials": _int1,
            "exact": {"enum": ["none", "line"]},
        },
        ["mode", "p", "R", "trials"],
    ),
    "threshold": _obj(
        {
            "mode": {"enum": list(MODES)},
            "R": _int1,
            "trials": _int1,
            "tolerance": {"type": "number", "exclusiveMinimum": 0},
            "expect_exact_line_within": {"type": "number", "exclusiveMinimum": 0},
            "expect_interval": {"type": "array", "items": _prob, "minItems": 2, "maxItems": 2},
        },
        ["mode", "R", "trials", "tolerance"],
    ),
    "ca-run": _obj(
        {
            "rule": {"enum": list(RULES)},
            "shift": _element,
            "mode": {
                "enum": ["orbit", "frequency", "stability", "almost-equicontinuity", "round-trip", "coset-factorization"]
            },
            "F": _elements,
            "F_radius": _int0,
            "T": _int0,
            "initial": _obj(
                {
                    "delta": _element,
                    "bitstring": {"type": "string"},
                    "zero": {"type": "boolean"},
                    "random_seed": _int0,
                }
            ),
            "q": {"type": "array", "items": _prob, "minItems": 1},
            "n_max": _int1,
            "trials": _int1,
            "site": _element,
            "symbol": _int0,
            "law": {"enum": ["none", "q^n", "q^(n+1)"]},
            "familywise": {"type": "boolean"},
            "samples": _int1,
            "perturbations": _int1,
            "windows": _int1,
            "exact": {"type": "number", "minimum": 0, "maximum": 1},
        },
        ["rule", "mode"],
    ),
    "dependence": _obj(
        {
            "environment": {"enum": ["random", "all-open", "all-closed"]},
            "p": _prob,
            "environments": _int1,
            "steps": _int0,
            "oracles": {"type": "array", "items": {"enum": ["ca", "lucas"]}},
        },
        ["environment", "steps"],
    ),
    "coupling-check": _obj(
        {
            "R": _int0,
            "region_radius": _int1,
            "samples": _int1,
            "checks": {"type": "array", "items": {"enum": ["identity", "marginal", "parity"]}, "minItems": 1},
            "marginal_radius": _int0,
            "parity_max_bits": _int1,
            "parity_sampled_bits": {"type": "array", "items": _int1},
            "parity_trials": _int1,
            "max_seconds": {"type": "number", "exclusiveMinimum": 0},
        },
        ["R", "samples", "checks"],
    ),
    "dichotomy": _obj(
        {
            "rule": {"enum": list(RULES)},
            "shift": _element,
            "F": _elements,
            "T": _int0,
            "n_max": _int0,
            "samples": _int1,
            "trials": _int1,
            "expect_verdict": {
                "enum": ["consistent-with-sensitive", "consistent-with-equicontinuous", "neither-at-this-scale"]
            },
            "horizon_trials": _int1,
            "check_shift_law": {"type": "boolean"},
        },
        ["rule", "F", "T", "n_max", "samples", "trials"],
    ),
    "density-curve": _obj(
        {
            "mode": {"enum": ["curve", "halfbound"]},
            "rule": {"enum": list(RULES)},
            "shift": _element,
            "F": _elements,
            "T": _int0,
            "n_max": _int0,
            "trials": _int1,
            "base_seed": _int0,
            "check_shift_law": {"type": "boolean"},
            "n_values": {"type": "array", "items": _int0, "minItems": 1},
            "environments": _int1,
            "slack": _int0,
            "min_escape_fraction": _prob,
            "calibrated_escape_fraction": _prob,
        },
        ["mode", "trials"],
    ),
    "odd-percolation": _obj(
        {
            "p": _prob,
            "environments": _int1,
            "steps": _int0,
        },
        ["environments", "steps"],
    ),
    "combinatorics-suite": _obj(
        {
            "suite": {"enum": ["hall-strassen", "tiling", "tile-coupling", "renormalization"]},
            "instances": _int1,
            "hall_size": _int1,
            "strassen_size": _int1,
            "d": _int1,
            "L": _int1,
            "alpha": _open_prob,
            "beta": _open_prob,
            "tile_length": _int1,
            "ell": _int0,
            "samples": _int1,
            "coarse_radius": _int0,
            "path_length": _int1,
            "path_samples": _int1,
        },
        ["suite"],
    ),
}

CONFIG_SCHEMA = _obj(
    {
        "name": {"type": "string"},
        "experiment": {"enum": list(EXPERIMENTS)},
        "group": GROUP_SCHEMA,
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "criterion": {"type": "integer", "minimum": 1, "maximum": 15},
        "params": {"type": "object"},
        "output": _obj({"dir": {"type": "string"}}),
    },
    ["experiment", "group", "master_seed", "params"],
)


def _path(err):
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def validate(config):
    """Schema-check ``config``; returns the parsed GroupSpec.  Raises InputError naming the field."""
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise InputError(f"config field {_path(err)}: {err.message}") from None
    try:
        jsonschema.validate(config["params"], PARAM_SCHEMAS[config["experiment"]])
    except jsonschema.ValidationError as err:
        where = "params" + ("." + _path(err) if err.absolute_path else "")
        raise InputError(f"config field {where}: {err.message}") from None
    try:
        return G.GroupSpec.from_json(config["group"])
    except (SpecError, EncodingError) as err:
        raise InputError(f"config field group: {err}") from None


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config):
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as err:
        raise InputError(f"config {path} is not valid JSON: {err}") from None
    except OSError as err:
        raise InputError(f"cannot read config {path}: {err}") from None
