"""Counter-based SplitMix64 streams and per-trial seed derivation.

All randomness in the package comes from this one generator so that the
pure-Python engines and the compiled kernels in :mod:`azuma_lab._kernels`
consume identical streams. The definition, bit for bit (arithmetic mod 2**64)::

    GAMMA = 0x9E3779B97F4A7C15

    mix64(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

    draw(s, i)         = mix64(s + (i + 1) * GAMMA)      # i-th output, i = 0, 1, ...
    derive_seed(m, k)  = draw(m, k)                      # seed of trial k under master m
    uniform(s, i)      = (draw(s, i) >> 11) * 2**-53     # in [0, 1)
    below(s, i, n)     = floor(uniform(s, i) * n)        # in {0, ..., n-1}

``draw`` is exactly the output sequence of the reference SplitMix64
generator started from state ``s``.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TWO_M53 = 1.0 / 9007199254740992.0

DEFAULT_SEED = 0x5EEDA2A7


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, k: int) -> int:
    """Seed of trial ``k`` (0-based) under ``master``."""
    return mix64((master + (k + 1) * GAMMA) & MASK64)


class SplitMix64:
    """Sequential view of a SplitMix64 stream.

    >>> hex(SplitMix64(0).next_u64())
    '0xe220a8397b1dcdaf'
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * _TWO_M53

    def randbelow(self, n: int) -> int:
        return int(self.random() * n)
