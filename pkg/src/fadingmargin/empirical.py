"""ECDF-based fading margins and the trace-to-table pipeline.

Gains are power ratios in linear units.  Quantiles are read off the step
ECDF without interpolation: the ``p``-quantile of ``n`` sorted samples is the
sample at 1-based rank ``ceil(p * n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .csi_io import CsiTrace
from .gamma import check_probability

NARROWBAND = "narrowband"
WIDEBAND = "wideband"
BANDS = (NARROWBAND, WIDEBAND)


class UnresolvableProbabilityError(ValueError):
    """``p`` is below ``1 / count`` and cannot be read off the ECDF."""


class DegenerateDistributionError(ValueError):
    pass


@dataclass(frozen=True)
class Ecdf:
    sorted_values: np.ndarray

    @property
    def count(self) -> int:
        return len(self.sorted_values)

    def __call__(self, x):
        """Fraction of samples ``<= x``."""
        return np.searchsorted(self.sorted_values, x, side="right") / self.count

    def curve(self) -> tuple[np.ndarray, np.ndarray]:
        """Step points ``(value, F)`` for plotting."""
        return self.sorted_values, np.arange(1, self.count + 1) / self.count


@dataclass(frozen=True)
class FadingMarginReport:
    p: float
    margin_db: float
    n_samples: int
    resolvable: bool
    q_median_linear: float
    q_p_linear: float


@dataclass
class GainRow:
    size: int
    band: str
    report: FadingMarginReport


@dataclass
class GainTable:
    """Fading margins per (array size, band), in ascending size order."""

    p: float
    rows: list[GainRow] = field(default_factory=list)

    def get(self, size: int, band: str) -> FadingMarginReport:
        for row in self.rows:
            if row.size == size and row.band == band:
                return row.report
        raise KeyError((size, band))

    def margins(self, band: str) -> list[float]:
        return [r.report.margin_db for r in self.rows if r.band == band]

    @property
    def sizes(self) -> list[int]:
        return sorted({r.size for r in self.rows})


def build_ecdf(samples) -> Ecdf:
    values = np.asarray(samples, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("cannot build an ECDF from no samples")
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise ValueError("samples must be finite and non-negative")
    return Ecdf(np.sort(values))


def _rank(p, count):
    # Rounding guards against p*count landing a hair above an integer.
    return max(1, math.ceil(round(p * count, 9)))


def is_resolvable(p: float, count: int) -> bool:
    return p * count >= 1.0 - 1e-12


def empirical_quantile(ecdf: Ecdf, p: float) -> float:
    p = check_probability(p)
    if not is_resolvable(p, ecdf.count):
        raise UnresolvableProbabilityError(
            f"p={p} needs at least {math.ceil(1 / p)} samples, have {ecdf.count}"
        )
    return float(ecdf.sorted_values[_rank(p, ecdf.count) - 1])


def fading_margin_from_ecdf(ecdf: Ecdf, p: float) -> FadingMarginReport:
    p = check_probability(p)
    median = empirical_quantile(ecdf, 0.5) if is_resolvable(0.5, ecdf.count) else ecdf.sorted_values[0]
    if median <= 0.0:
        raise DegenerateDistributionError("median gain is zero")
    if not is_resolvable(p, ecdf.count):
        return FadingMarginReport(p, math.nan, ecdf.count, False, float(median), math.nan)
    q_p = empirical_quantile(ecdf, p)
    margin = 10.0 * math.log10(median / q_p) if q_p > 0 else math.inf
    return FadingMarginReport(p, margin, ecdf.count, True, float(median), q_p)


def fading_margin_empirical(samples, p: float) -> FadingMarginReport:
    """Fading margin of a gain sample; no channel model involved."""
    return fading_margin_from_ecdf(build_ecdf(samples), p)


def estimate_large_scale(trace: CsiTrace) -> tuple[float, CsiTrace]:
    """Sample-mean power ``beta`` and the trace divided by ``sqrt(beta)``."""
    power = np.abs(trace.data) ** 2
    beta = float(np.mean(power))
    if beta == 0.0:
        raise DegenerateDistributionError("trace is all zeros")
    return beta, CsiTrace(trace.data / math.sqrt(beta), dict(trace.meta))


def _subset(trace, antennas):
    idx = np.asarray(list(antennas), dtype=int)
    if idx.size == 0:
        raise ValueError("antenna subset is empty")
    if idx.min() < 0 or idx.max() >= trace.m:
        raise IndexError(f"antenna index out of range for {trace.m} antennas")
    return trace.data[:, idx, :]


def narrowband_gains(trace: CsiTrace, antennas: Sequence[int]) -> np.ndarray:
    """Coherent array gain per (timestamp, subcarrier), timestamp-major."""
    h = _subset(trace, antennas)
    return (h.real**2 + h.imag**2).sum(axis=1).ravel()


def wideband_gains(trace: CsiTrace, antennas: Sequence[int]) -> np.ndarray:
    """Delay-domain tap energy per timestamp, via the subcarrier mean."""
    h = _subset(trace, antennas)
    return (h.real**2 + h.imag**2).mean(axis=2).sum(axis=1)


def subarrays(m: int, size: int, selection: str = "tiles", seed: int = 0) -> list[list[int]]:
    """Antenna index groups evaluated for one array size.

    ``tiles``: every disjoint contiguous block ``[i*size, (i+1)*size)``, pooled.
    ``prefix``: only ``[0, size)``.
    ``random``: one seeded random subset.
    """
    if not 1 <= size <= m:
        raise ValueError(f"array size {size} outside 1..{m}")
    if selection == "tiles":
        return [list(range(s, s + size)) for s in range(0, m - size + 1, size)]
    if selection == "prefix":
        return [list(range(size))]
    if selection == "random":
        rng = np.random.default_rng([seed, size])
        return [sorted(int(i) for i in rng.choice(m, size=size, replace=False))]
    raise ValueError(f"unknown selection mode {selection!r}")


def case_study(
    trace: CsiTrace,
    array_sizes: Sequence[int],
    p: float,
    normalize: bool = True,
    selection: str = "tiles",
    bands: Sequence[str] = BANDS,
    seed: int = 0,
) -> GainTable:
    """Narrowband and wideband fading margins for growing sub-arrays.

    Normalizes by the estimated large-scale coefficient, extracts coherent
    gains for each sub-array, and reads the margin off the pooled ECDF.
    Rows whose sample count cannot resolve ``p`` are kept and flagged.
    """
    p = check_probability(p)
    sizes = [int(s) for s in array_sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("array sizes must be strictly increasing")
    for s in sizes:
        if not 1 <= s <= trace.m:
            raise ValueError(f"array size {s} outside 1..{trace.m}")
    for band in bands:
        if band not in BANDS:
            raise ValueError(f"unknown band {band!r}")
    if normalize:
        _, trace = estimate_large_scale(trace)
    extract = {NARROWBAND: narrowband_gains, WIDEBAND: wideband_gains}
    table = GainTable(p)
    for size in sizes:
        groups = subarrays(trace.m, size, selection, seed)
        for band in BANDS:
            if band not in bands:
                continue
            samples = np.concatenate([extract[band](trace, g) for g in groups])
            table.rows.append(GainRow(size, band, fading_margin_empirical(samples, p)))
    return table
