"""Deterministic random streams shared by every planner and the bench harness.

All stochastic choices in this package go through SplitMix64 streams so that
runs are reproducible bit-for-bit from integer seeds, independently of Python
hash randomization and of whether the compiled search kernels are in use (the
compiled engines implement the identical generator).

Draw discipline: every choice point consumes exactly one draw (tie-breaks
draw even when a single candidate remains), so interleaved consumers stay in
lockstep across engine implementations.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """One SplitMix64 output step applied to a 64-bit value."""
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, tag: int) -> int:
    """Derive an independent child seed from a parent seed and an integer tag.

    Used to split master seeds into per-episode and per-decision streams
    without the streams ever sharing state.
    """
    return mix64(mix64((seed & _MASK) ^ ((tag & _MASK) * _GOLDEN & _MASK)))


class SplitMix64:
    """Tiny 64-bit generator with the exact semantics of the compiled twin."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        s = (self.state + _GOLDEN) & _MASK
        self.state = s
        z = ((s ^ (s >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def next_double(self) -> float:
        """Uniform draw in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * _INV_2_53

    def next_below(self, n: int) -> int:
        """Uniform-ish draw in [0, n); always consumes exactly one step."""
        return self.next_u64() % n
