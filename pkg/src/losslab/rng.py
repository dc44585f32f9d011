"""Counter-based random streams shared by every Monte-Carlo path.

Every random quantity in the package is a pure function of ``(seed, k)``
where ``k`` is the draw index inside a stream:

    draw(seed, k)   = fmix64(seed + (k + 1) * GOLDEN)          (mod 2**64)
    uniform(seed,k) = (draw(seed, k) >> 11) * 2**-53           in [0, 1)

``fmix64`` is the splitmix64 output finalizer.  A normal variate with index
``j`` consumes draws ``2j`` and ``2j + 1`` through Box-Muller (cosine branch
only)::

    z_j = sqrt(-2 ln(1 - u_{2j})) * cos(2 pi u_{2j+1})

Per-trial streams are keyed by ``trial_seed(master, i)``, the ``i``-th output
of a splitmix64 sequence started at ``fmix64(master)``.  Because nothing is
carried between trials, any partition of trials over workers reproduces the
same values.  The compiled kernels implement the identical recipe.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)
TWO_PI = 6.283185307179586

_GOLDEN_U = np.uint64(GOLDEN)
_M1_U = np.uint64(_M1)
_M2_U = np.uint64(_M2)


def fmix64(z: int) -> int:
    """splitmix64 finalizer on a Python int (wraps to 64 bits)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, index: int) -> int:
    """Seed of trial ``index`` under ``master_seed``."""
    if index < 0:
        raise ValueError(f"trial index must be non-negative, got {index}")
    return fmix64(fmix64(master_seed) + (index + 1) * GOLDEN)


def trial_seeds(master_seed: int, start: int, stop: int) -> np.ndarray:
    """Vectorized :func:`trial_seed` for indices ``start..stop-1`` (uint64)."""
    base = np.uint64(fmix64(master_seed))
    idx = np.arange(start + 1, stop + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return fmix64_array(base + idx * _GOLDEN_U)


def fmix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1_U
        z = (z ^ (z >> np.uint64(27))) * _M2_U
    return z ^ (z >> np.uint64(31))


def uniforms(seeds: np.ndarray | int, start: int, count: int) -> np.ndarray:
    """Draws ``start..start+count-1`` of each stream, shape ``(len(seeds), count)``."""
    s = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))[:, None]
    k = np.arange(start + 1, start + count + 1, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        bits = fmix64_array(s + k * _GOLDEN_U)
    return (bits >> np.uint64(11)).astype(np.float64) * _INV53


def normals(seeds: np.ndarray | int, start: int, count: int) -> np.ndarray:
    """Normal variates ``start..start+count-1`` of each stream.

    Normal ``j`` is built from uniform draws ``2j`` and ``2j + 1``.
    """
    u = uniforms(seeds, 2 * start, 2 * count)
    u1 = 1.0 - u[:, 0::2]
    u2 = u[:, 1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)


def uniform_scalar(seed: int, k: int) -> float:
    """Pure-Python reference for a single uniform draw; used as a test oracle."""
    return (fmix64(seed + (k + 1) * GOLDEN) >> 11) * _INV53
