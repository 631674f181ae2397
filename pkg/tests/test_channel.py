import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fadingmargin.channel import (
    DegenerateChannelError,
    EffectiveChannel,
    PrecodingWeights,
    ResourceLimitError,
    TapChannel,
    draw_taps,
    effective_channel,
    effective_channel_batch,
    gen_rayleigh_channel,
    instantaneous_sinr,
    monte_carlo_gains,
    monte_carlo_sinr,
    time_reversal_weights,
    zero_delay_tap,
)
from fadingmargin.rng import RandomStream


def brute_force_effective(h, w):
    """Direct double sum: eff[l] = sum_m sum_j h_m[j] * wfilt_m[l - j]."""
    m, n = h.shape
    out = {}
    for lag in range(-(n - 1), n):
        acc = 0j
        for a in range(m):
            for j in range(n):
                d = lag - j  # filter delay, valid for -(n-1) .. 0
                if -(n - 1) <= d <= 0:
                    acc += h[a, j] * w[a, -d]
        out[lag] = acc
    return np.array([out[lag] for lag in range(-(n - 1), n)])


def random_channel(rng, m, n):
    return TapChannel((rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2 * n))


class TestRandomStream:
    def test_deterministic(self):
        a = RandomStream(11).complex_normal(0, 5, 7)
        b = RandomStream(11).complex_normal(0, 5, 7)
        assert np.array_equal(a, b)

    def test_items_independent_of_chunking(self):
        s = RandomStream(3)
        whole = s.complex_normal(0, 10, 5)
        pieces = np.vstack([s.complex_normal(0, 4, 5), s.complex_normal(4, 6, 5)])
        assert np.array_equal(whole, pieces)
        assert np.array_equal(whole[7], s.item(7, 5))

    def test_seed_and_domain_separate_streams(self):
        a = RandomStream(1).item(0, 4)
        assert not np.array_equal(a, RandomStream(2).item(0, 4))
        assert not np.array_equal(a, RandomStream(1, domain=1).item(0, 4))

    def test_unit_power_and_circularity(self):
        z = RandomStream(5).complex_normal(0, 250_000, 4).ravel()
        assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=0.004)
        assert np.var(z.real) == pytest.approx(0.5, abs=0.004)
        assert abs(np.mean(z * z)) < 0.005

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            RandomStream(-1)


class TestGenRayleigh:
    def test_shape_and_determinism(self):
        a = gen_rayleigh_channel(3, 4, RandomStream(9), index=2)
        b = gen_rayleigh_channel(3, 4, RandomStream(9), index=2)
        assert (a.m, a.n) == (3, 4)
        assert np.array_equal(a.taps, b.taps)

    def test_unit_variance_single_tap(self):
        taps = draw_taps(1, 1, 0, 1_000_000, seed=21)
        assert np.mean(np.abs(taps) ** 2) == pytest.approx(1.0, abs=0.004)

    def test_unit_energy_per_antenna(self):
        taps = draw_taps(1, 4, 0, 1_000_000, seed=22)
        energy = np.sum(np.abs(taps) ** 2, axis=2)
        assert np.mean(energy) == pytest.approx(1.0, abs=0.004)
        assert np.var(taps.real) == pytest.approx(1 / 8, rel=0.01)

    def test_matches_batch_draw(self):
        batch = draw_taps(2, 3, 0, 6, seed=4)
        for r in range(6):
            assert np.array_equal(gen_rayleigh_channel(2, 3, RandomStream(4), r).taps, batch[r])


class TestTimeReversal:
    def test_scalar(self):
        w = time_reversal_weights(TapChannel([[3 + 4j]]))
        assert w.weights[0, 0] == pytest.approx((3 - 4j) / 5)

    def test_unit_energy(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            ch = random_channel(rng, rng.integers(1, 10), rng.integers(1, 10))
            assert abs(time_reversal_weights(ch).energy() - 1.0) <= 1e-12

    def test_zero_channel(self):
        with pytest.raises(DegenerateChannelError):
            time_reversal_weights(TapChannel(np.zeros((2, 3))))


class TestEffectiveChannel:
    def test_scalar(self):
        ch = TapChannel([[3 - 4j]])
        eff = effective_channel(ch, time_reversal_weights(ch))
        assert eff.taps == pytest.approx([5.0])

    def test_two_tap_by_hand(self):
        # h = [1, i]: autocorrelation / sqrt(2) gives lags -1, 0, +1.
        ch = TapChannel([[1, 1j]])
        eff = effective_channel(ch, time_reversal_weights(ch))
        s = 1 / np.sqrt(2)
        assert eff.taps == pytest.approx([-1j * s, 2 * s, 1j * s])
        assert eff.at(1) == pytest.approx(1j * s)
        assert eff.at(5) == 0

    @pytest.mark.parametrize("m, n", [(1, 1), (1, 5), (3, 2), (4, 7)])
    def test_matches_brute_force(self, m, n):
        rng = np.random.default_rng(m * 100 + n)
        ch = random_channel(rng, m, n)
        w = time_reversal_weights(ch)
        expected = brute_force_effective(ch.taps, w.weights)
        assert np.allclose(effective_channel(ch, w).taps, expected, atol=1e-14)

    def test_arbitrary_weights_brute_force(self):
        rng = np.random.default_rng(7)
        ch = random_channel(rng, 3, 4)
        w = PrecodingWeights(random_channel(rng, 3, 4).taps)
        assert np.allclose(effective_channel(ch, w).taps, brute_force_effective(ch.taps, w.weights))

    def test_dimension_mismatch(self):
        ch = TapChannel(np.ones((2, 3)))
        with pytest.raises(ValueError):
            effective_channel(ch, PrecodingWeights(np.ones((2, 2))))

    def test_batch_matches_single(self):
        taps = draw_taps(5, 6, 0, 8, seed=1)
        batch = effective_channel_batch(taps)
        for r in range(8):
            ch = TapChannel(taps[r])
            single = effective_channel(ch, time_reversal_weights(ch)).taps
            assert np.allclose(batch[r], single, atol=1e-13)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32))
    def test_zero_delay_identity_and_symmetry(self, m, n, seed):
        ch = gen_rayleigh_channel(m, n, RandomStream(seed))
        eff = effective_channel(ch, time_reversal_weights(ch))
        h0 = zero_delay_tap(ch)
        assert abs(eff.zero_delay - h0) <= 1e-12 * h0
        lags = np.arange(1, n)
        diffs = [abs(eff.at(-int(l)) - np.conj(eff.at(int(l)))) for l in lags]
        assert max(diffs, default=0.0) <= 1e-12 * h0


def test_zero_delay_tap_values():
    assert zero_delay_tap(TapChannel([[3 + 4j]])) == 5.0
    assert zero_delay_tap(TapChannel(np.ones((2, 2)))) == 2.0


class TestSinr:
    def test_no_isi(self):
        res = instantaneous_sinr(EffectiveChannel(np.array([2.0 + 0j])), 10.0)
        assert res.sinr_linear == pytest.approx(40.0)
        assert res.isi_power == 0.0

    def test_interference_limited(self):
        eff = EffectiveChannel(np.array([1.0, 2.0, 0.0]) + 0j)
        assert instantaneous_sinr(eff, float("inf")).sinr_linear == 4.0
        assert instantaneous_sinr(eff, 1e9).sinr_linear == pytest.approx(4.0, rel=1e-8)

    def test_noise_limited(self):
        eff = EffectiveChannel(np.array([0.3, 2.0, 0.4]) + 0j)
        gamma = 1e-6
        res = instantaneous_sinr(eff, gamma)
        assert res.sinr_linear == pytest.approx(gamma * 4.0, rel=1e-3)
        assert res.sinr_linear <= gamma * res.signal_power

    def test_three_term_recomputation(self):
        # Received power split into signal, ISI and noise for explicit
        # large-scale gain, transmit power and noise power.
        rng = np.random.default_rng(12)
        for _ in range(50):
            m, n = rng.integers(1, 9), rng.integers(1, 9)
            ch = random_channel(rng, m, n)
            eff = effective_channel(ch, time_reversal_weights(ch))
            beta, px, pe = rng.uniform(0.1, 3, size=3)
            signal = beta * abs(eff.at(0)) ** 2 * px
            isi = beta * sum(abs(eff.at(l)) ** 2 for l in range(-n, n + 1) if l != 0) * px
            expected = signal / (isi + pe)
            got = instantaneous_sinr(eff, beta * px / pe).sinr_linear
            assert got == pytest.approx(expected, rel=1e-12)

    def test_rejects_nonpositive_snr(self):
        with pytest.raises(ValueError):
            instantaneous_sinr(EffectiveChannel(np.array([1.0 + 0j])), 0.0)


class TestMonteCarlo:
    def test_moments_single_tap(self):
        g = monte_carlo_gains(4, 1, 1_000_000, seed=10)
        assert g.mean() == pytest.approx(4.0, abs=0.008)
        assert g.variance() == pytest.approx(4.0, abs=0.03)

    def test_scv(self):
        g = monte_carlo_gains(16, 4, 1_000_000, seed=11)
        assert g.scv() == pytest.approx(1 / 64, rel=0.1)

    def test_thread_independent(self):
        a = monte_carlo_gains(3, 2, 300_000, seed=5, threads=1)
        b = monte_carlo_gains(3, 2, 300_000, seed=5, threads=4)
        assert np.array_equal(a.values, b.values)

    def test_matches_per_realization_path(self):
        g = monte_carlo_gains(3, 4, 20, seed=8)
        for r in range(20):
            ch = gen_rayleigh_channel(3, 4, RandomStream(8), r)
            eff = effective_channel(ch, time_reversal_weights(ch))
            assert g.values[r] == pytest.approx(abs(eff.zero_delay) ** 2, rel=1e-12)

    def test_cap(self):
        with pytest.raises(ResourceLimitError):
            monte_carlo_gains(1, 1, 1001, seed=0, cap=1000)

    def test_invalid(self):
        with pytest.raises(ValueError):
            monte_carlo_gains(1, 1, 0, seed=0)

    def test_sinr_path_shares_realizations(self):
        gains, sinr = monte_carlo_sinr(2, 3, 500, seed=6, mean_snr_linear=10.0)
        assert np.allclose(gains, monte_carlo_gains(2, 3, 500, seed=6).values, rtol=1e-12)
        taps = draw_taps(2, 3, 0, 500, seed=6)
        for r in (0, 123, 499):
            ch = TapChannel(taps[r])
            ref = instantaneous_sinr(effective_channel(ch, time_reversal_weights(ch)), 10.0)
            assert sinr[r] == pytest.approx(ref.sinr_linear, rel=1e-12)
