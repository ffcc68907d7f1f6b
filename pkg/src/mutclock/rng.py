"""Deterministic random number generation shared by every backend.

The simulator promises bit-identical output for a fixed base seed, no matter
which backend runs it and no matter how replicates are distributed over
worker processes.  numpy's generators would make that promise awkward to keep
from C, so we carry our own xoshiro256++ implementation here and mirror it,
operation for operation, inside the compiled kernel.

Layout of the stream, per replicate:

* replicate ``i`` of a run with base seed ``s`` is seeded with
  ``splitmix64(s + (i+1)*GOLDEN)`` where GOLDEN = 0x9E3779B97F4A7C15
  (i.e. output ``i`` of the splitmix64 sequence started at ``s``);
* the xoshiro256++ state is filled with four further splitmix64 outputs of
  that per-replicate seed;
* uniforms in [0, 1) are ``(x >> 11) * 2^-53``; uniforms in (0, 1] add one
  ulp before scaling, so ``log(u)`` is always finite.

Any change to these rules is a compatibility break for recorded samples.
"""

from __future__ import annotations

import math

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15

_INV_2_53 = 2.0 ** -53


def splitmix64(z: int) -> int:
    """The splitmix64 finalizer: one 64-bit mixing step."""
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def replicate_seed(base_seed: int, index: int) -> int:
    """Seed for replicate ``index`` of a run with the given base seed."""
    if index < 0:
        raise ValueError("replicate index must be >= 0")
    return splitmix64((base_seed + (index + 1) * GOLDEN) & MASK64)


def state_from_seed(seed: int) -> tuple[int, int, int, int]:
    """Expand a 64-bit seed into a nonzero xoshiro256++ state."""
    s0 = splitmix64((seed + GOLDEN) & MASK64)
    s1 = splitmix64((seed + 2 * GOLDEN) & MASK64)
    s2 = splitmix64((seed + 3 * GOLDEN) & MASK64)
    s3 = splitmix64((seed + 4 * GOLDEN) & MASK64)
    if s0 == 0 and s1 == 0 and s2 == 0 and s3 == 0:  # pragma: no cover
        s0 = GOLDEN
    return s0, s1, s2, s3


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256PP:
    """xoshiro256++ with the exact draw semantics the kernels use."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        self.s0, self.s1, self.s2, self.s3 = state_from_seed(seed & MASK64)

    def next_u64(self) -> int:
        result = (_rotl((self.s0 + self.s3) & MASK64, 23) + self.s0) & MASK64
        t = (self.s1 << 17) & MASK64
        self.s2 ^= self.s0
        self.s3 ^= self.s1
        self.s1 ^= self.s2
        self.s0 ^= self.s3
        self.s2 ^= t
        self.s3 = _rotl(self.s3, 45)
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform_pos(self) -> float:
        """Uniform double in (0, 1]; safe to pass to log()."""
        return ((self.next_u64() >> 11) + 1) * _INV_2_53

    def exponential(self, rate: float) -> float:
        """Exponential(rate) variate."""
        return -math.log(self.uniform_pos()) / rate

    def getstate(self) -> tuple[int, int, int, int]:
        return (self.s0, self.s1, self.s2, self.s3)

    def setstate(self, state: tuple[int, int, int, int]) -> None:
        self.s0, self.s1, self.s2, self.s3 = (x & MASK64 for x in state)
