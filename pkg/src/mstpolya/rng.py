"""Counter-based random numbers keyed by (seed, trial, draw index).

Every draw is a pure function of its coordinates, so results do not depend
on how trials are scheduled.  The mixing function is the SplitMix64
finaliser; the compiled kernels in :mod:`mstpolya.simulate` implement the
same arithmetic and are tested against this module.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
TRIAL_SALT = 0xD1B54A32D192ED03


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, trial: int) -> int:
    """Key of the stream belonging to one trial."""
    return mix64(mix64(seed & MASK64) ^ ((trial + 1) * TRIAL_SALT & MASK64))


def draw(key: int, counter: int) -> int:
    """The ``counter``-th 64-bit output of stream ``key``."""
    return mix64((key + (counter + 1) * GOLDEN) & MASK64)


def _mask_for(bound: int) -> int:
    return (1 << (bound - 1).bit_length()) - 1 if bound > 1 else 0


class CounterRNG:
    """Sequential view of one stream."""

    def __init__(self, seed: int, trial: int = 0):
        self.key = stream_key(seed, trial)
        self.counter = 0

    def next64(self) -> int:
        x = draw(self.key, self.counter)
        self.counter += 1
        return x

    def randbelow(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by masked rejection (no modulo bias)."""
        if bound < 1:
            raise ValueError("bound must be positive")
        mask = _mask_for(bound)
        while True:
            x = self.next64() & mask
            if x < bound:
                return x
