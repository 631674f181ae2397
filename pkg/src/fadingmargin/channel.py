"""Tapped-delay-line Rayleigh channels under time-reversal precoding.

Conventions: a :class:`TapChannel` holds ``taps[m, n]`` for antenna ``m`` and
delay ``n = 0 .. N-1``.  The effective channel after precoding is stored with
``2N - 1`` taps for delays ``-(N-1) .. N-1``; index ``N - 1`` is delay zero.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .rng import CHANNEL_DOMAIN, RandomStream

REALIZATION_CAP = 10**8
# Complex values generated per chunk; bounds peak memory of monte_carlo_gains.
_CHUNK_VALUES = 1 << 20


class DegenerateChannelError(ValueError):
    """All taps are zero, so precoding weights cannot be normalized."""


class ResourceLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class TapChannel:
    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.complex128)
        if taps.ndim != 2 or 0 in taps.shape:
            raise ValueError(f"taps must be a non-empty M x N matrix, got shape {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise ValueError("taps must be finite")
        object.__setattr__(self, "taps", taps)

    @property
    def m(self) -> int:
        return self.taps.shape[0]

    @property
    def n(self) -> int:
        return self.taps.shape[1]


@dataclass(frozen=True)
class PrecodingWeights:
    """Time-reversal filters.

    ``weights[m, j]`` is the filter coefficient applied at delay ``-j``.
    """

    weights: np.ndarray

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.weights.shape[1]

    def energy(self) -> float:
        return float(np.sum(np.abs(self.weights) ** 2))


@dataclass(frozen=True)
class EffectiveChannel:
    taps: np.ndarray

    @property
    def n(self) -> int:
        return (len(self.taps) + 1) // 2

    @property
    def delays(self) -> np.ndarray:
        return np.arange(-(self.n - 1), self.n)

    def at(self, delay: int) -> complex:
        if abs(delay) > self.n - 1:
            return 0j
        return complex(self.taps[delay + self.n - 1])

    @property
    def zero_delay(self) -> complex:
        return self.at(0)


@dataclass(frozen=True)
class SinrResult:
    sinr_linear: float
    signal_power: float
    isi_power: float
    mean_snr_linear: float

    @property
    def sinr_db(self) -> float:
        return 10.0 * np.log10(self.sinr_linear)


@dataclass(frozen=True)
class GainSamples:
    """Realizations of ``|h[0]|**2`` for the reference channel."""

    values: np.ndarray
    m: int
    n: int
    seed: int

    @property
    def realizations(self) -> int:
        return len(self.values)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def variance(self) -> float:
        return float(np.var(self.values, ddof=1)) if len(self.values) > 1 else 0.0

    def scv(self) -> float:
        return self.variance() / self.mean() ** 2


def _check_dims(m, n):
    if int(m) != m or int(n) != n or m < 1 or n < 1:
        raise ValueError(f"m and n must be positive integers, got m={m}, n={n}")


def gen_rayleigh_channel(m: int, n: int, stream: RandomStream, index: int = 0) -> TapChannel:
    """Draw realization ``index`` of ``stream``: i.i.d. CN(0, 1/n) taps."""
    _check_dims(m, n)
    z = stream.item(index, m * n).reshape(m, n)
    return TapChannel(z * np.sqrt(1.0 / n))


def time_reversal_weights(ch: TapChannel) -> PrecodingWeights:
    norm = np.linalg.norm(ch.taps)
    if norm == 0.0:
        raise DegenerateChannelError("cannot precode an all-zero channel")
    return PrecodingWeights(np.conj(ch.taps) / norm)


def effective_channel(ch: TapChannel, w: PrecodingWeights) -> EffectiveChannel:
    """Sum over antennas of the full linear convolution ``h_m * w_m``."""
    if ch.taps.shape != w.weights.shape:
        raise ValueError(
            f"channel {ch.taps.shape} and weights {w.weights.shape} dimensions differ"
        )
    out = np.zeros(2 * ch.n - 1, dtype=np.complex128)
    for h_m, w_m in zip(ch.taps, w.weights):
        # w_m reversed puts delay -(N-1) first, so the output starts there too.
        out += np.convolve(h_m, w_m[::-1])
    return EffectiveChannel(out)


def zero_delay_tap(ch: TapChannel) -> float:
    """Closed form of ``h[0]`` under time reversal: the Frobenius norm."""
    return float(np.linalg.norm(ch.taps))


def instantaneous_sinr(eff: EffectiveChannel, mean_snr_linear: float) -> SinrResult:
    """SINR with ISI from the off-centre taps and noise at ``1/mean_snr``.

    ``mean_snr_linear`` may be ``inf`` for the interference-limited case.
    """
    if not mean_snr_linear > 0:
        raise ValueError("mean SNR must be positive")
    powers = np.abs(eff.taps) ** 2
    centre = eff.n - 1
    signal = float(powers[centre])
    # Sum the two sides directly; subtracting the peak from the total cancels.
    isi = float(powers[:centre].sum() + powers[centre + 1 :].sum())
    denom = isi + 1.0 / mean_snr_linear
    if denom == 0.0:
        sinr = float("inf") if signal > 0 else float("nan")
    else:
        sinr = signal / denom
    return SinrResult(sinr, signal, isi, float(mean_snr_linear))


def effective_channel_batch(taps: np.ndarray) -> np.ndarray:
    """Time-reversal effective channels for a stack of ``(R, M, N)`` taps.

    Returns ``(R, 2N-1)`` with delay zero at column ``N-1``.
    """
    r, _, n = taps.shape
    norm = np.sqrt(np.sum(np.abs(taps) ** 2, axis=(1, 2)))
    out = np.empty((r, 2 * n - 1), dtype=np.complex128)
    for lag in range(n):
        # sum_m sum_j h[j + lag] conj(h[j])
        acc = np.einsum("rmj,rmj->r", taps[:, :, lag:], np.conj(taps[:, :, : n - lag]))
        out[:, n - 1 + lag] = acc
        out[:, n - 1 - lag] = np.conj(acc)
    return out / norm[:, None]


def _thread_count(threads):
    if threads is None:
        threads = int(os.environ.get("THREADS", "1") or 1)
    return max(1, int(threads))


def _chunks(total, size):
    return [(s, min(size, total - s)) for s in range(0, total, size)]


def draw_taps(m: int, n: int, start: int, count: int, seed: int) -> np.ndarray:
    """Taps of realizations ``start .. start+count-1`` as ``(count, m, n)``."""
    z = RandomStream(seed, CHANNEL_DOMAIN).complex_normal(start, count, m * n)
    return z.reshape(count, m, n) * np.sqrt(1.0 / n)


def monte_carlo_gains(
    m: int,
    n: int,
    realizations: int,
    seed: int,
    threads: int | None = None,
    cap: int | None = None,
) -> GainSamples:
    """Simulate ``|h[0]|**2`` for independent reference-channel draws.

    Realization ``r`` is exactly the channel returned by
    ``gen_rayleigh_channel(m, n, RandomStream(seed), r)``, so the output does
    not depend on ``threads``.
    """
    _check_dims(m, n)
    realizations = int(realizations)
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    cap = REALIZATION_CAP if cap is None else cap
    if realizations > cap:
        raise ResourceLimitError(f"{realizations} realizations exceed the cap of {cap}")
    out = np.empty(realizations, dtype=np.float64)
    chunk = max(1, _CHUNK_VALUES // (m * n))

    def work(span):
        start, count = span
        taps = draw_taps(m, n, start, count, seed)
        out[start : start + count] = np.sum(taps.real**2 + taps.imag**2, axis=(1, 2))

    spans = _chunks(realizations, chunk)
    workers = _thread_count(threads)
    if workers == 1 or len(spans) == 1:
        for span in spans:
            work(span)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, spans))
    return GainSamples(out, m, n, int(seed))


def monte_carlo_sinr(
    m: int,
    n: int,
    realizations: int,
    seed: int,
    mean_snr_linear: float,
    cap: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-realization ``(|h[0]|**2, SINR)`` using the full effective channel.

    Uses the same realizations as :func:`monte_carlo_gains`.
    """
    _check_dims(m, n)
    cap = REALIZATION_CAP if cap is None else cap
    if realizations > cap:
        raise ResourceLimitError(f"{realizations} realizations exceed the cap of {cap}")
    gains = np.empty(realizations)
    sinr = np.empty(realizations)
    chunk = max(1, _CHUNK_VALUES // (m * n * n))
    for start, count in _chunks(realizations, chunk):
        eff = effective_channel_batch(draw_taps(m, n, start, count, seed))
        p = np.abs(eff) ** 2
        signal = p[:, n - 1]
        isi = p[:, : n - 1].sum(axis=1) + p[:, n:].sum(axis=1)
        gains[start : start + count] = signal
        sinr[start : start + count] = signal / (isi + 1.0 / mean_snr_linear)
    return gains, sinr
