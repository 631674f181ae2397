"""Channel hardening as a link-budget fading margin."""

from .channel import (
    EffectiveChannel,
    GainSamples,
    PrecodingWeights,
    SinrResult,
    TapChannel,
    effective_channel,
    gen_rayleigh_channel,
    instantaneous_sinr,
    monte_carlo_gains,
    time_reversal_weights,
    zero_delay_tap,
)
from .csi_io import CsiTrace, read_trace, synth_from_taps, synth_iid_trace, write_trace
from .empirical import (
    Ecdf,
    FadingMarginReport,
    GainTable,
    build_ecdf,
    case_study,
    empirical_quantile,
    estimate_large_scale,
    fading_margin_empirical,
    narrowband_gains,
    wideband_gains,
)
from .gamma import (
    FadingMarginDb,
    GammaParams,
    analytic_cdf_curve,
    fading_margin,
    fading_margin_analytic,
    gamma_cdf,
    gamma_quantile,
    is_hardened,
    log_gamma,
    scv,
)
from .rng import RandomStream

__version__ = "0.1.0"
