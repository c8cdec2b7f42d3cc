"""Counter-based random streams.

Every random draw in the package is a pure function of
``(seed, *fields, counter)``.  The key is derived from the seed and the
fields by iterating the SplitMix64 finalizer, and the draw for a given
counter is the SplitMix64 output at state ``key + (counter + 1) * GAMMA``.
Because no state is carried between draws, piece ``i`` of level ``n``
gets the same bits whether the level is sampled in one vectorised call,
in chunks, or in parallel workers.

For sequential Monte Carlo (trial loops) :func:`generator` hands out a
numpy ``Generator`` on a Philox bit generator keyed the same way.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# stable small integers for string tags
_TAGS = {"X": 1, "Y": 2, "select": 3, "sample": 4, "alpha": 5, "f": 6, "mc": 7}


def _mix_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _field(v) -> int:
    if isinstance(v, str):
        if v in _TAGS:
            return _TAGS[v]
        h = 0
        for ch in v.encode():
            h = _mix_int(h ^ ch)
        return h
    return int(v) & MASK64


def stream_key(seed: int, *fields) -> int:
    """64-bit key for the stream named by ``seed`` and ``fields``."""
    k = _mix_int(int(seed) + GAMMA)
    for f in fields:
        k = _mix_int(k ^ _mix_int(_field(f) + GAMMA))
    return k


def _mix_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))


def u64(seed: int, fields: tuple, counter) -> np.ndarray:
    """Raw 64-bit draws for each entry of ``counter``."""
    key = np.uint64(stream_key(seed, *fields))
    c = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = key + (c + np.uint64(1)) * np.uint64(GAMMA)
    return _mix_array(state)


def bits(seed: int, fields: tuple, counter, nbits: int) -> np.ndarray:
    """The low ``nbits`` bits of each draw, as a ``(len(counter), nbits)`` uint8 array."""
    raw = u64(seed, fields, counter)
    shifts = np.arange(nbits, dtype=np.uint64)
    return ((raw[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)


def uniform(seed: int, fields: tuple, counter) -> np.ndarray:
    """Doubles in [0, 1) with 53 random bits."""
    raw = u64(seed, fields, counter)
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def generator(seed: int, *fields) -> np.random.Generator:
    """Sequential generator on a Philox stream keyed like :func:`u64`."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *fields)))
