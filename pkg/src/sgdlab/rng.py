"""Counter-based random streams.

Every noise draw is addressed by ``(seed, trajectory, k, word)``: the Philox
key is ``(seed, trajectory)`` and iteration ``k`` owns the Philox counter
blocks ``[k * B, (k + 1) * B)`` with ``B`` blocks of four 64-bit words each.
Any iteration's raw words can be regenerated without replaying the ones
before it.
"""
from __future__ import annotations

import math

import numba
import numpy as np

WORDS_PER_BLOCK = 4
# trajectory id reserved for fresh Monte-Carlo draws in probes
PROBE_TRAJECTORY = 2**63 - 1

_U53 = 1.0 / 9007199254740992.0


def blocks_per_iteration(words: int) -> int:
    return -(-words // WORDS_PER_BLOCK)


def _key(seed: int, trajectory: int) -> np.ndarray:
    if not (0 <= seed < 2**64 and 0 <= trajectory < 2**64):
        raise ValueError("seed and trajectory id must be unsigned 64-bit integers")
    return np.array([seed, trajectory], dtype=np.uint64)


def iteration_stream(seed: int, trajectory: int, k: int, words_per_iter: int) -> np.random.Philox:
    """Philox generator positioned at the first word of iteration ``k``."""
    start = k * blocks_per_iteration(words_per_iter)
    return np.random.Philox(key=_key(seed, trajectory), counter=[start, 0, 0, 0])


def iteration_words(seed: int, trajectory: int, k0: int, n: int, words_per_iter: int) -> np.ndarray:
    """Raw words for iterations ``k0 .. k0 + n - 1``, shape ``(n, padded_words)``."""
    padded = blocks_per_iteration(words_per_iter) * WORDS_PER_BLOCK
    bg = iteration_stream(seed, trajectory, k0, words_per_iter)
    return bg.random_raw(n * padded).reshape(n, padded)


def probe_generator(seed: int) -> np.random.Generator:
    """Generator for fresh conditional draws, disjoint from every engine stream."""
    return np.random.Generator(np.random.Philox(key=_key(seed, PROBE_TRAJECTORY)))


def raw_words(rng, n: int, words_per_iter: int) -> np.ndarray:
    """Take ``n`` draws' worth of raw words from a Generator or BitGenerator."""
    bg = rng.bit_generator if isinstance(rng, np.random.Generator) else rng
    padded = blocks_per_iteration(words_per_iter) * WORDS_PER_BLOCK
    return np.asarray(bg.random_raw(n * padded), dtype=np.uint64).reshape(n, padded)


@numba.njit(cache=True, inline="always")
def to_unit(word):
    """Top 53 bits of a word as a double in [0, 1)."""
    return (word >> np.uint64(11)) * _U53


@numba.njit(cache=True, inline="always")
def to_normal(w1, w2):
    """Box-Muller (cosine branch) from two words."""
    u1 = to_unit(w1)
    u2 = to_unit(w2)
    return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)
