"""Counter-based random streams for order-independent Monte Carlo.

Every item (a channel realization, a trace timestamp) owns a fixed window of
the Philox counter space, determined by ``(seed, domain, index)``.  Any subset
of items can therefore be generated in any order, in any number of chunks or
threads, and the values are always the same.
"""

from __future__ import annotations

import numpy as np

# Philox4x64 produces four 64-bit words per counter increment.
_WORDS_PER_COUNTER = 4
_SEED_MASK = (1 << 64) - 1

CHANNEL_DOMAIN = 0
TRACE_DOMAIN = 1
TAP_TRACE_DOMAIN = 2


def _uniform_open_closed(words):
    # 53-bit mantissa uniform in (0, 1]; never zero so log() is safe.
    return ((words >> np.uint64(11)).astype(np.float64) + 1.0) * (1.0 / 9007199254740992.0)


class RandomStream:
    """Source of standard complex Gaussians, ``E|z|**2 == 1``.

    Each item consumes ``per_item`` complex values drawn with Box-Muller from
    its own counter window.
    """

    def __init__(self, seed: int, domain: int = CHANNEL_DOMAIN):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = seed
        self.domain = int(domain)
        self._key = np.array([seed & _SEED_MASK, self.domain], dtype=np.uint64)

    def _stride(self, per_item):
        # One complex normal needs two uniforms, so two values per counter.
        return -(-per_item // 2)

    def complex_normal(self, start: int, count: int, per_item: int) -> np.ndarray:
        """Values for items ``start .. start+count-1``, shape ``(count, per_item)``."""
        if start < 0 or count < 0 or per_item < 1:
            raise ValueError("invalid item range")
        stride = self._stride(per_item)
        counter = np.zeros(4, dtype=np.uint64)
        counter[0] = np.uint64(start * stride)
        bitgen = np.random.Philox(key=self._key, counter=counter)
        words = bitgen.random_raw(count * stride * _WORDS_PER_COUNTER)
        words = words.reshape(count, stride * 2, 2)
        u1 = _uniform_open_closed(words[..., 0])
        u2 = _uniform_open_closed(words[..., 1])
        radius = np.sqrt(-np.log(u1))  # sqrt(-2 ln u) / sqrt(2)
        theta = (2.0 * np.pi) * u2
        z = radius * np.cos(theta) + 1j * (radius * np.sin(theta))
        return z[:, :per_item]

    def item(self, index: int, per_item: int) -> np.ndarray:
        return self.complex_normal(index, 1, per_item)[0]
