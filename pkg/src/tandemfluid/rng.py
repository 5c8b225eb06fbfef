"""Deterministic random streams for the simulators.

xoshiro256** seeded through splitmix64, so that any implementation of the
same algorithms (including the compiled kernel) reproduces identical draws
bit for bit from the same 64-bit seed.
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
# 1 / 2**53, used to map the top 53 bits of a draw onto [0, 1)
_INV53 = 1.0 / 9007199254740992.0


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state once; returns (new_state, output)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def replication_seed(seed: int, replication: int) -> int:
    """Derive the stream seed for one replication of a run."""
    _, mixed = splitmix64_next((seed + replication) & _MASK64)
    return mixed


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** with the canonical splitmix64 state initialisation."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        state = seed & _MASK64
        state, self.s0 = splitmix64_next(state)
        state, self.s1 = splitmix64_next(state)
        state, self.s2 = splitmix64_next(state)
        _, self.s3 = splitmix64_next(state)

    def next_uint64(self) -> int:
        result = (_rotl((self.s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (self.s1 << 17) & _MASK64
        self.s2 ^= self.s0
        self.s3 ^= self.s1
        self.s1 ^= self.s2
        self.s0 ^= self.s3
        self.s2 ^= t
        self.s3 = _rotl(self.s3, 45)
        return result

    def uniform(self) -> float:
        """Uniform draw on [0, 1) with 53 random mantissa bits."""
        return (self.next_uint64() >> 11) * _INV53

    def exponential(self, rate: float) -> float:
        """Exponential draw via the inverse CDF -ln(1-U)/rate."""
        if rate <= 0.0:
            raise ValueError(f"exponential rate must be positive, got {rate}")
        return -math.log(1.0 - self.uniform()) / rate
