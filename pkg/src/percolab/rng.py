"""Counter-based random numbers.

Every random coordinate of an experiment is addressed by ``(trial_seed, stream,
coordinate)`` and mapped to a uniform double through the SplitMix64 output
function.  Value ``k`` of stream ``s`` under seed ``z`` is the ``k``-th output of
a SplitMix64 generator started at ``mix64(z ^ stream_constant(s))``.  Results
therefore do not depend on evaluation order, chunking or thread count.
"""

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1

# named streams keep site, bond and auxiliary randomness disjoint
SITES = 1
BONDS = 2
STATE = 3
AUX = 4


def mix64_int(z):
    """SplitMix64 finalizer on a Python int (mod 2**64)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def mix64(z):
    """Vectorized SplitMix64 finalizer on a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))


def trial_seed(master_seed, trial_index):
    """Seed of one trial: ``mix(master, index)``."""
    return mix64_int(mix64_int(master_seed) + (trial_index + 1) * GAMMA)


def trial_seeds(master_seed, start, count):
    """Seeds of trials ``start .. start+count-1`` as a uint64 array."""
    base = np.uint64(mix64_int(master_seed))
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(base + idx * np.uint64(GAMMA))


def derive_seed(seed, *tags):
    """Deterministic child seed of ``seed`` labelled by integer tags."""
    z = mix64_int(seed)
    for t in tags:
        z = mix64_int(z ^ mix64_int(int(t) + 0x632BE59BD9B4E019))
    return z


def _stream_base(seeds, stream):
    seeds = np.asarray(seeds, dtype=np.uint64)
    tag = np.uint64(mix64_int(stream * 0xD1B54A32D192ED03 + 1))
    return mix64(seeds ^ tag)


def uniforms(seeds, n, stream=SITES, offset=0):
    """Uniform doubles in [0, 1) for coordinates ``offset .. offset+n-1``.

    ``seeds`` may be a scalar (result shape ``(n,)``) or a 1-d array of trial
    seeds (result shape ``(len(seeds), n)``).
    """
    scalar = np.ndim(seeds) == 0
    base = _stream_base(np.atleast_1d(np.asarray(seeds, dtype=np.uint64)), stream)
    k = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = base[:, None] + k[None, :] * np.uint64(GAMMA)
    u = (mix64(z) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    return u[0] if scalar else u


def bits(seeds, n, p, stream=SITES, offset=0):
    """Bernoulli(p) bits (uint8) for the given coordinates: ``u < p``."""
    return (uniforms(seeds, n, stream, offset) < p).astype(np.uint8)
