"""Deterministic 64-bit random number generation.

Every randomized operation in the toolkit (manifest sampling, augmentation,
dataset splits) draws from one pinned generator so that outputs are
bit-identical across runs, platforms, and worker counts:

* generator: xoshiro256** (Blackman/Vigna), state seeded by four successive
  splitmix64 outputs of a 64-bit seed
* uniform doubles: ``(next_u64() >> 11) * 2**-53``, i.e. 53 random mantissa
  bits, values in [0, 1)
* per-item streams: ``derive_seed(master_seed, item_index)`` XORs the index
  into the master seed; the splitmix64 expansion decorrelates the streams

:class:`XoshiroStreams` advances many independent streams in lockstep using
NumPy uint64 arithmetic and is bit-compatible with :class:`Xoshiro256`: stream
``i`` produces exactly the values of ``Xoshiro256(seeds[i])``.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_TWO53_INV = 2.0**-53


def derive_seed(master_seed: int, index: int) -> int:
    """Seed for the independent per-item stream ``index``."""
    return (master_seed ^ index) & _MASK


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step; returns ``(next_state, output)``."""
    state = (state + _GOLDEN) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256:
    """Scalar xoshiro256** stream."""

    __slots__ = ("_s",)

    def __init__(self, seed: int):
        state = seed & _MASK
        s = []
        for _ in range(4):
            state, out = splitmix64(state)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def next_float(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _TWO53_INV

    def next_below(self, n: int) -> int:
        """Uniform-ish integer in [0, n) as ``floor(next_float() * n)``."""
        return int(self.next_float() * n)


def _np_rotl(x: np.ndarray, k: int) -> np.ndarray:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


class XoshiroStreams:
    """Vectorized bank of independent xoshiro256** streams."""

    def __init__(self, seeds: np.ndarray):
        state = np.asarray(seeds, dtype=np.uint64).copy()
        s = []
        for _ in range(4):
            state = state + np.uint64(_GOLDEN)
            z = state.copy()
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            s.append(z ^ (z >> np.uint64(31)))
        self._s = s
        self.size = state.shape[0]

    def next_u64(self, where: np.ndarray | None = None) -> np.ndarray:
        """Advance all streams by one draw, or only the ``where`` subset.

        With a boolean ``where`` mask, only the selected streams advance and
        the result holds one draw per selected stream (compressed order),
        matching ``target[where] = bank.next_u64(where=where)``.
        """
        s = self._s
        if where is None:
            s0, s1, s2, s3 = s
        else:
            s0, s1, s2, s3 = (x[where] for x in s)
        result = _np_rotl(s1 * np.uint64(5), 7) * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 = s2 ^ s0
        s3 = s3 ^ s1
        s1 = s1 ^ s2
        s0 = s0 ^ s3
        s2 = s2 ^ t
        s3 = _np_rotl(s3, 45)
        if where is None:
            self._s = [s0, s1, s2, s3]
        else:
            for slot, val in zip(self._s, (s0, s1, s2, s3)):
                slot[where] = val
        return result

    def next_float(self, where: np.ndarray | None = None) -> np.ndarray:
        return (self.next_u64(where) >> np.uint64(11)).astype(np.float64) * _TWO53_INV
