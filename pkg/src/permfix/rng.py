"""Deterministic 64-bit random streams for the simulators.

The generator is SplitMix64 (Steele, Lea & Flood's mixing constants): state
advances by the golden-ratio increment and the output is a three-round
xor-shift-multiply scramble.  Per-replica streams are derived by hashing
(seed, replica index) through the same scramble, so replica r of a run is
reproducible in isolation and identical across the scalar and vectorized
paths.  Uniforms are 53-bit dyadics (out >> 11) * 2^-53 in [0, 1), exactly
representable both as doubles and as Fractions with denominator 2^53.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(GOLDEN)
_U_MIX1 = np.uint64(MIX1)
_U_MIX2 = np.uint64(MIX2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
TWO_NEG53 = 2.0 ** -53


def scramble(value: int) -> int:
    """The SplitMix64 output function on a single 64-bit word."""
    z = value & MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def stream_state(seed: int, replica: int) -> int:
    """Initial state of the stream for one replica: hash of (seed, replica)."""
    return scramble((scramble(seed & MASK64) + (replica + 1) * GOLDEN) & MASK64)


class Stream:
    """Scalar SplitMix64 stream; the reference implementation."""

    def __init__(self, seed: int, replica: int = 0):
        self.state = stream_state(seed, replica)

    def next_word(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return scramble(self.state)

    def uniform(self) -> float:
        return (self.next_word() >> 11) * TWO_NEG53

    def uniform_fraction(self) -> Fraction:
        """The same dyadic uniform as an exact rational (53-bit numerator)."""
        return Fraction(self.next_word() >> 11, 1 << 53)


class VectorStreams:
    """One SplitMix64 stream per replica, advanced in lockstep with numpy.

    Word k of row r equals word k of Stream(seed, first_replica + r); the
    uint64 arithmetic wraps modulo 2^64 exactly as the scalar path does.
    """

    def __init__(self, seed: int, first_replica: int, count: int):
        replicas = np.arange(first_replica, first_replica + count, dtype=np.uint64)
        base = np.uint64(scramble(seed & MASK64))
        with np.errstate(over="ignore"):
            states = base + (replicas + np.uint64(1)) * _U_GOLDEN
            self.states = self._scramble(states)

    @staticmethod
    def _scramble(z: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            z = (z ^ (z >> _U30)) * _U_MIX1
            z = (z ^ (z >> _U27)) * _U_MIX2
            return z ^ (z >> _U31)

    def next_words(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            self.states = self.states + _U_GOLDEN
            return self._scramble(self.states)

    def uniforms(self) -> np.ndarray:
        """One 53-bit dyadic uniform per replica."""
        return (self.next_words() >> _U11).astype(np.float64) * TWO_NEG53
