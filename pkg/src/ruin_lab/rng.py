"""Counter-seeded SplitMix64 streams.

Every Monte Carlo replica owns an independent stream whose starting state is
``mix64(seed, replica_index)``::

    finalize(z) = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
                  z ^= z >> 27; z *= 0x94D049BB133111EB
                  z ^= z >> 31
    mix64(seed, i) = finalize(seed ^ finalize((i + 1) * GOLDEN))

with ``GOLDEN = 0x9E3779B97F4A7C15`` and all arithmetic modulo 2**64.  The
stream then advances as plain SplitMix64: ``state += GOLDEN``, output
``finalize(state)``.  Floats use the top 53 bits, integers in ``[0, m)`` are
``floor(float * m)``.

The pure-Python :class:`SplitMix64` and the numba helpers below produce the
same sequence bit for bit, so a single replica of a batch run can be replayed
through the scalar game engine.
"""
from __future__ import annotations

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0


def finalize(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64(seed: int, index: int) -> int:
    """Derive the starting state of replica ``index`` under master ``seed``."""
    return finalize((seed & MASK64) ^ finalize(((index + 1) * GOLDEN) & MASK64))


class SplitMix64:
    """Minimal random stream exposing the subset of the numpy Generator API the engine uses."""

    def __init__(self, state: int):
        self.state = state & MASK64

    @classmethod
    def for_replica(cls, seed: int, index: int) -> "SplitMix64":
        return cls(mix64(seed, index))

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return finalize(self.state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * _INV53

    def integers(self, high: int) -> int:
        return int(self.random() * high)


_G = np.uint64(GOLDEN)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_UM1 = np.uint64(_M1)
_UM2 = np.uint64(_M2)


@njit(cache=True, nogil=True)
def nb_finalize(z):
    z = (z ^ (z >> _U30)) * _UM1
    z = (z ^ (z >> _U27)) * _UM2
    return z ^ (z >> _U31)


@njit(cache=True, nogil=True)
def nb_mix64(seed, index):
    return nb_finalize(seed ^ nb_finalize((np.uint64(index) + np.uint64(1)) * _G))


@njit(cache=True, nogil=True)
def nb_random(state):
    """Advance ``state`` (a length-1 uint64 array) and return a float in [0, 1)."""
    state[0] = state[0] + _G
    return float(nb_finalize(state[0]) >> _U11) * _INV53


@njit(cache=True, nogil=True)
def nb_integers(state, high):
    return int(nb_random(state) * high)
