"""Portable seeded random number generation.

All randomness in this package (instance generation, solver initial
conditions, local-search flips) flows through SplitMix64 so that any
instance or run is reproducible byte-for-byte from its 64-bit seed,
independent of platform or library versions.  SplitMix64 is a
counter-based generator: the state advances by a fixed Weyl increment
and each output is a bijective mix of the counter (Steele, Lea &
Flood, 2014).  The same constants are inlined in the numba kernels.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

# SplitMix64 constants.
WEYL = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """Finalizing mix of SplitMix64; bijective on 64-bit integers."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic 64-bit generator with a tiny, fixed algorithm."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + WEYL) & MASK64
        return mix64(self._state)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def coin(self) -> bool:
        return bool(self.next_u64() >> 63)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection."""
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        limit = MASK64 + 1 - ((MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def distinct(self, n: int, k: int) -> list[int]:
        """k distinct integers from [0, n), in draw order."""
        if k > n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        picked: list[int] = []
        while len(picked) < k:
            c = self.below(n)
            if c not in picked:
                picked.append(c)
        return picked
