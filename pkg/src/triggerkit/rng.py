"""Portable 64-bit PRNG used for all scene/dataset randomness.

The generator is splitmix64: a single 64-bit additive counter whose output
is finalized by two xor-shift-multiply rounds.  Every draw is pure integer
arithmetic, so sequences are identical on any platform and any Python
build.  Floating-point helpers derive their values from the top 53 bits of
one 64-bit output.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic stream of 64-bit integers from one seed."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix(self._state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK64 - (_MASK64 + 1) % n
        while True:
            u = self.next_u64()
            if u <= limit:
                return u % n

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed: int, *keys: int) -> int:
    """Stable child seed from a root seed and integer keys.

    Used to key per-video and per-purpose streams off one dataset seed so
    that regeneration is bit-reproducible and order-independent.
    """
    z = seed & _MASK64
    for k in keys:
        z = _mix((z + _GAMMA) & _MASK64)
        z = _mix((z ^ (k & _MASK64)) & _MASK64)
    return z
