"""Fixed 64-bit mixing used for every keyed pseudorandom decision.

All green lists, bias vectors, and derived seeds in this package come from
one avalanche mixer so that results are bit-stable across runs and
platforms.  The mixer is the SplitMix64 finalizer:

    z  = x + 0x9E3779B97F4A7C15        (mod 2**64)
    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

Multi-argument mixing folds inputs left to right: mix(a, b) = M(M(a) ^ b),
where M is the finalizer above.  Token ids, keys, and salts are all treated
as unsigned 64-bit integers.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_MASK = 0xFFFFFFFFFFFFFFFF

# Sentinel used in place of a previous-token id when the context is empty.
EMPTY_CONTEXT_SENTINEL = 0xFFFFFFFF


def splitmix64(x: int) -> int:
    """One finalizer round on a Python int, reduced mod 2**64."""
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK
    return z ^ (z >> 31)


def mix(*values: int) -> int:
    """Fold any number of integers into one 64-bit hash."""
    acc = 0
    for v in values:
        acc = splitmix64(acc ^ (v & _MASK))
    return acc


def string_key(s: str) -> int:
    """Deterministic 64-bit key for a string (UTF-8 bytes folded 8 at a time)."""
    acc = splitmix64(len(s))
    data = s.encode("utf-8")
    for i in range(0, len(data), 8):
        acc = splitmix64(acc ^ int.from_bytes(data[i:i + 8], "little"))
    return acc


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized finalizer round over a uint64 array."""
    z = (x + np.uint64(_GOLDEN)).astype(np.uint64)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MUL1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MUL2)
    z ^= z >> np.uint64(31)
    return z


def mix_array(seed: int, ids: np.ndarray) -> np.ndarray:
    """Hash every id in `ids` against a fixed integer seed.

    Equivalent to [mix(seed, i) for i in ids] but vectorized.
    """
    base = np.uint64(splitmix64(seed & _MASK))
    return splitmix64_array(base ^ ids.astype(np.uint64))
