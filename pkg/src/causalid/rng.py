"""Deterministic pseudo-random streams for seeded model generation.

The generator is a SplitMix64 counter stream: output ``k`` of a stream with
base state ``s`` is ``mix64(s + (k + 1) * GAMMA)`` modulo 2**64.  Substreams
are keyed by a label through an FNV-1a hash, so each model variable draws
from its own stream regardless of generation order.  The exact byte stream
is pinned by golden tests; every constant here is load-bearing.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_U_GAMMA = np.uint64(_GAMMA)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_UM1 = np.uint64(0xBF58476D1CE4E5B9)
_UM2 = np.uint64(0x94D049BB133111EB)


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a plain Python int (mod 2**64)."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def fnv1a64(label: str) -> int:
    """FNV-1a hash of a UTF-8 label, used to key substreams."""
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


def _mix_array(z: np.ndarray) -> np.ndarray:
    # vectorized mix64; z must be uint64, wraps like the scalar path
    z = (z ^ (z >> _U30)) * _UM1
    z = (z ^ (z >> _U27)) * _UM2
    return z ^ (z >> _U31)


class Stream:
    """One deterministic output stream.

    A stream is positioned: every draw advances an internal counter, so two
    streams created from the same seed produce identical sequences only when
    consumed through identical call sequences.  ``spawn`` derives a child
    stream that is independent of the parent's position.
    """

    def __init__(self, seed: int):
        self._state = mix64(seed)
        self._pos = 0

    def spawn(self, label: str) -> "Stream":
        """Child stream keyed by (base state, label); position-independent."""
        child = Stream.__new__(Stream)
        child._state = mix64(self._state ^ fnv1a64(label))
        child._pos = 0
        return child

    def next_uint64(self) -> int:
        self._pos += 1
        return mix64((self._state + self._pos * _GAMMA) & _MASK)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform-ish integer in [lo, hi]; modulo bias is irrelevant here."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.next_uint64() % (hi - lo + 1)

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles in (0, 1], vectorized over the counter."""
        ks = np.arange(self._pos + 1, self._pos + n + 1, dtype=np.uint64)
        self._pos += n
        z = _mix_array(ks * _U_GAMMA + np.uint64(self._state))
        return ((z >> _U11).astype(np.float64) + 1.0) * 2.0**-53

    def exponentials(self, n: int) -> np.ndarray:
        """n unit-mean exponential variates (inverse-CDF of ``uniforms``)."""
        return -np.log(self.uniforms(n))
