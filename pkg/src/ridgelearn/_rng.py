"""Counter-derived random substreams.

All estimator randomness flows from one root seed.  Work is split into
fixed-size chunks and every chunk derives its own Philox stream from
(root seed, stage tag, call index, chunk index), so results are bit-identical
regardless of how many workers process the chunks.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "chunk_sizes", "CHUNK"]

CHUNK = 1 << 16  # samples per chunk; fixed so threading cannot change results

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z):
    """SplitMix64 finalizer on a Python int (mod 2^64)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def substream(seed, *counters):
    """A Generator keyed by the root seed and a tuple of counters.

    The (seed, counters) tuple is folded injectively-in-practice into the
    128-bit Philox key by iterated SplitMix64 mixing.
    """
    k0 = _mix(int(seed) & _MASK)
    k1 = _mix(k0 ^ _GOLDEN)
    for i, c in enumerate(counters):
        k0 = _mix(k0 ^ _mix((int(c) + (i + 1) * _GOLDEN) & _MASK))
        k1 = _mix((k1 + k0) & _MASK)
    key = np.array([k0, k1], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def chunk_sizes(m, chunk=CHUNK):
    """Split m samples into fixed-size chunks (last one ragged)."""
    sizes = []
    left = int(m)
    while left > 0:
        take = min(chunk, left)
        sizes.append(take)
        left -= take
    return sizes
