"""Counter-based random stream.

Every variate is a pure function of (seed, stream, counter), built on the
splitmix64 finisher over 64-bit integer arithmetic, so draws are identical
regardless of call order or parallel schedule.  Uniforms land in the open
interval (0, 1); normals use one Box-Muller cosine branch per counter,
consuming the uniform sub-counters (2c, 2c+1).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_STREAM_SALT = 0xD6E8FEB86659FD93


def _mix_int(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class CounterRng:
    """Seedable counter-indexed generator; all methods are stateless."""

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be nonnegative")
        key = _mix_int((seed * _GOLDEN + _GOLDEN) & _MASK)
        key = _mix_int(key ^ ((stream * _STREAM_SALT) & _MASK))
        self._key = np.uint64(key)

    def _words(self, start: int, count: int) -> np.ndarray:
        counters = np.arange(start, start + count, dtype=np.uint64)
        with np.errstate(over="ignore"):
            return _mix(self._key + counters * np.uint64(_GOLDEN))

    def uniform(self, start: int, count: int) -> np.ndarray:
        """count uniforms in (0, 1) at counters start..start+count-1."""
        words = self._words(start, count)
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def normal(self, start: int, count: int) -> np.ndarray:
        """count standard normals at counters start..start+count-1 (Box-Muller)."""
        u = self.uniform(2 * start, 2 * count)
        u1, u2 = u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
