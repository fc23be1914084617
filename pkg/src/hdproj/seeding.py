"""Seed derivation for reproducible, worker-count independent streams.

All randomness goes through numpy's Philox4x64 counter-based generator.
Substream ``r`` of a base seed is keyed by ``mix64(base_seed, r)``.
"""

from __future__ import annotations

from numpy.random import Generator, Philox

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _avalanche(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix64(base_seed: int, index: int) -> int:
    """SplitMix64 finaliser applied to the pair (base_seed, index)."""
    z = _avalanche((base_seed + _GOLDEN) & _MASK)
    return _avalanche((z + (index + 1) * _GOLDEN) & _MASK)


def rng_from_seed(seed: int) -> Generator:
    return Generator(Philox(seed))
