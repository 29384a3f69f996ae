"""Seed derivation.

A master seed fans out to per-stage seeds with splitmix64: each label is
folded into the state (strings via CRC-32, integers directly) and one
splitmix64 output is taken per label. The same helpers supply cheap,
counter-based uniforms for the simulated cost model.
"""

from __future__ import annotations

import math
import zlib

M64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def derive(master: int, *labels: int | str) -> int:
    """Child seed of ``master`` for the path ``labels``; stable across runs."""
    s = splitmix64(master & M64)
    for label in labels:
        if isinstance(label, str):
            label = zlib.crc32(label.encode("utf-8"))
        s = splitmix64(s ^ (label & M64))
    return s


def uniform(seed: int, *labels: int | str) -> float:
    """A float in [0, 1) determined by ``(seed, labels)``."""
    return (derive(seed, *labels) >> 11) * (1.0 / (1 << 53))


def normal(seed: int, *labels: int | str) -> float:
    u1 = uniform(seed, *labels, "n1")
    u2 = uniform(seed, *labels, "n2")
    return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)
