"""
Counter-based random streams.

A stream is identified by (seed, purpose tag, index). The same triple always
yields the same numbers regardless of how many other streams were drawn
before it, so sweeps can run their grid points in any order or in parallel.
"""

import zlib

import numpy as np

_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _seed_words(seed: int) -> list:
    seed = int(seed) & _MASK64
    return [seed & _MASK32, (seed >> 32) & _MASK32]


def stream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """
    Build a Philox generator keyed by (seed, tag, index).

    Args:
        seed: 64-bit provenance seed (negative values are reduced mod 2**64)
        tag: purpose label, e.g. 'couplings' or 'field'
        index: counter within the purpose (chunk number, sample number, ...)

    Returns:
        numpy Generator backed by a Philox bit generator
    """
    entropy = _seed_words(seed) + [zlib.crc32(tag.encode("utf-8")), int(index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
