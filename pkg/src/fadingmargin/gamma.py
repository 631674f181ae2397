"""Gamma-distribution machinery for the maximum-diversity reference channel.

The zero-delay tap power of a time-reversal precoded channel with ``m``
independent antennas and ``n`` equal-power Rayleigh taps follows
``Gamma(shape=m*n, scale=1/n)``.  Everything here is a pure function of its
arguments.

The regularized incomplete gamma function is evaluated with the usual pair of
expansions (power series below ``x = a + 1``, Lentz continued fraction above),
and quantiles are found by a bracketed Newton iteration in ``log(x)`` started
from the Wilson-Hilferty approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

HARDENING_THRESHOLD = 1e-2

_EPS = 1e-14
_BASE_ITERATIONS = 500
_TINY = 1e-300
_LOG_2PI = math.log(2.0 * math.pi)
_DB_PER_NEPER = 10.0 / math.log(10.0)


class ConvergenceError(ArithmeticError):
    """An iterative evaluation ran out of iterations."""


@dataclass(frozen=True)
class GammaParams:
    """Shape/scale pair of a Gamma distribution."""

    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise ValueError(f"shape must be positive and finite, got {self.shape}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    @classmethod
    def reference(cls, m: int, n: int) -> "GammaParams":
        """Law of ``|h[0]|**2`` for ``m`` antennas and ``n`` taps."""
        _check_counts(m, n)
        return cls(shape=float(m * n), scale=1.0 / n)

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def variance(self) -> float:
        return self.shape * self.scale**2


@dataclass(frozen=True)
class FadingMarginDb:
    margin_db: float
    p: float


def _check_counts(m, n):
    for name, v in (("m", m), ("n", n)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")


def check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly between 0 and 1, got {p}")
    return p


def to_db(x):
    """Power ratio to decibels."""
    return 10.0 * math.log10(x)


def from_db(x_db):
    return 10.0 ** (x_db / 10.0)


def log_gamma(a: float) -> float:
    """Natural log of the gamma function for ``a > 0``."""
    if not a > 0:
        raise ValueError(f"log_gamma is only defined here for a > 0, got {a}")
    return math.lgamma(a)


def _stirling_remainder(a):
    # lgamma(a) - [(a - 1/2) ln a - a + ln(2 pi)/2]; series is accurate to
    # ~1e-16 for a >= 15 and avoids cancellation for very large shapes.
    if a >= 15.0:
        r = 1.0 / (a * a)
        return (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / a
    return math.lgamma(a) - (a - 0.5) * math.log(a) + a - 0.5 * _LOG_2PI


def _log_kernel(a, x, log_x):
    """``a*ln(x) - x - lnGamma(a)``, the log prefactor of both expansions."""
    if a < 15.0:
        return a * log_x - x - math.lgamma(a)
    # Written around x = a so that the large, nearly equal terms cancel exactly.
    t = x / a - 1.0
    if abs(t) < 0.5:
        d = t - math.log1p(t)
    else:
        d = t - (log_x - math.log(a))
    return 0.5 * (math.log(a) - _LOG_2PI) - _stirling_remainder(a) - a * d


def _iteration_cap(a):
    # Both expansions need O(sqrt(a)) terms near the transition point x ~ a.
    return _BASE_ITERATIONS + int(20.0 * math.sqrt(a))


def _series_p(a, x, log_kernel):
    ap = a
    term = total = 1.0 / a
    for _ in range(_iteration_cap(a)):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(log_kernel)
    raise ConvergenceError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _continued_fraction_q(a, x, log_kernel):
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _iteration_cap(a) + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(log_kernel) * h
    raise ConvergenceError(
        f"incomplete gamma continued fraction did not converge (a={a}, x={x})"
    )


def _regularized_pq(a, x, log_x=None):
    """Return ``(P(a, x), Q(a, x))``.

    ``log_x`` may be supplied when ``x`` itself underflows to zero.
    """
    if log_x is None:
        if x == 0.0:
            return 0.0, 1.0
        log_x = math.log(x)
    if math.isinf(x):
        return 1.0, 0.0
    kernel = _log_kernel(a, x, log_x)
    if x < a + 1.0:
        p = _series_p(a, x, kernel)
        return p, 1.0 - p
    q = _continued_fraction_q(a, x, kernel)
    return 1.0 - q, q


def gamma_cdf(params: GammaParams, x: float) -> float:
    """Regularized lower incomplete gamma ``P(shape, x / scale)``."""
    if x < 0 or math.isnan(x):
        raise ValueError(f"gamma_cdf requires x >= 0, got {x}")
    return _regularized_pq(params.shape, x / params.scale)[0]


def gamma_sf(params: GammaParams, x: float) -> float:
    if x < 0 or math.isnan(x):
        raise ValueError(f"gamma_sf requires x >= 0, got {x}")
    return _regularized_pq(params.shape, x / params.scale)[1]


def _initial_log_guess(a, p):
    z = NormalDist().inv_cdf(p)
    c = 1.0 / (9.0 * a)
    wh = 1.0 - c + z * math.sqrt(c)
    if a >= 1.0 and wh > 0.0:
        return math.log(a) + 3.0 * math.log(wh)
    # Lower-tail limit P(a, x) ~ x**a / Gamma(a + 1).
    return (math.log(p) + math.lgamma(a + 1.0)) / a


def _log_quantile(a: float, p: float, max_iter: int = 200) -> float:
    """Solve ``P(a, exp(u)) = p`` for ``u`` (unit scale)."""
    upper = p > 0.5
    target = 1.0 - p if upper else p

    def residual(u):
        P, Q = _regularized_pq(a, math.exp(u), u)
        return (target - Q) if upper else (P - target)

    u = _initial_log_guess(a, p)
    f = residual(u)
    if f == 0.0:
        return u
    # Bracket the root; residual is increasing in u.
    step = 1.0
    lo = hi = u
    if f < 0:
        while True:
            lo, hi = hi, hi + step
            if residual(hi) >= 0:
                break
            step *= 2.0
            if hi > 800.0:
                raise ConvergenceError(f"could not bracket quantile (a={a}, p={p})")
    else:
        while True:
            lo, hi = lo - step, lo
            if residual(lo) <= 0:
                break
            step *= 2.0
            if lo < -1e7:
                raise ConvergenceError(f"could not bracket quantile (a={a}, p={p})")
        u = max(u, lo)
    u = min(max(u, lo), hi)

    for _ in range(max_iter):
        f = residual(u)
        if f == 0.0:
            return u
        if f < 0:
            lo = u
        else:
            hi = u
        x = math.exp(u)
        slope = math.exp(_log_kernel(a, x, u))  # dP/du
        u_new = u - f / slope if slope > 0 else 0.5 * (lo + hi)
        if not lo < u_new < hi:
            u_new = 0.5 * (lo + hi)
        if abs(u_new - u) <= 1e-15 * max(1.0, abs(u)) or hi - lo <= 1e-15 * max(1.0, abs(u)):
            return u_new
        u = u_new
    raise ConvergenceError(
        f"gamma quantile exhausted {max_iter} iterations (a={a}, p={p})"
    )


def gamma_quantile(params: GammaParams, p: float) -> float:
    """Inverse of :func:`gamma_cdf`.

    For extremely small shapes combined with small ``p`` the true quantile can
    lie below the smallest positive double, in which case ``0.0`` is returned;
    :func:`fading_margin` works in the log domain and is unaffected.
    """
    p = check_probability(p)
    return math.exp(_log_quantile(params.shape, p)) * params.scale


def fading_margin(params: GammaParams, p: float) -> FadingMarginDb:
    """``10*log10(Q(0.5) / Q(p))`` for a Gamma law; the scale cancels."""
    p = check_probability(p)
    if p == 0.5:
        return FadingMarginDb(0.0, p)
    u_median = _log_quantile(params.shape, 0.5)
    u_p = _log_quantile(params.shape, p)
    return FadingMarginDb(_DB_PER_NEPER * (u_median - u_p), p)


def fading_margin_analytic(m: int, n: int, p: float) -> FadingMarginDb:
    """Fading margin of the ``m``-antenna, ``n``-tap reference channel."""
    return fading_margin(GammaParams.reference(m, n), p)


def scv(m: int, n: int) -> float:
    """Squared coefficient of variation of ``|h[0]|**2``, i.e. ``1/(m*n)``."""
    _check_counts(m, n)
    return 1.0 / (m * n)


def is_hardened(m: int, n: int, threshold: float = HARDENING_THRESHOLD) -> bool:
    return scv(m, n) <= threshold


def analytic_cdf_curve(
    params: GammaParams, grid_db: Sequence[float]
) -> list[tuple[float, float]]:
    """Evaluate the CDF at gains given in dB.

    Returns ``(gain_db, cdf)`` pairs in grid order.
    """
    grid = [float(g) for g in grid_db]
    for g in grid:
        if not math.isfinite(g):
            raise ValueError("grid values must be finite")
    for a, b in zip(grid, grid[1:]):
        if not b > a:
            raise ValueError("grid must be strictly increasing")
    return [(g, gamma_cdf(params, from_db(g))) for g in grid]
