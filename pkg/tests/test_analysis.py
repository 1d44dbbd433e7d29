import numpy as np
import pytest

from aeroservo import analysis as an


def cfg_small():
    return an.SpectralConfig(nperseg=256, overlap=0.5, sample_rate=10.0)


class TestCoherence:
    def test_self_coherence_is_one(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=4096)
        f, c = an.coherence(x, x, cfg_small())
        assert np.nanmax(np.abs(c[1:] - 1.0)) < 1e-9

    def test_scaled_copy_is_one(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=4096)
        f, c = an.coherence(x, 3.7 * x, cfg_small())
        assert np.nanmax(np.abs(c[1:] - 1.0)) < 1e-9

    def test_independent_noise_low_coherence(self):
        rng = np.random.default_rng(2)
        n = 256 * 40  # >= 32 averages at 50% overlap
        x = rng.normal(size=n)
        y = rng.normal(size=n)
        f, c = an.coherence(x, y, cfg_small())
        assert np.nanmean(c) < 0.15

    def test_delay_preserves_magnitude_coherence(self):
        rng = np.random.default_rng(3)
        n = 256 * 24
        x = rng.normal(size=n + 3)
        f, c = an.coherence(x[:-3], x[3:], cfg_small())
        # a pure delay only rotates phase; keep away from Nyquist where the
        # windowed estimate loses a little
        band = f < 3.0
        assert np.nanmean(c[band][1:]) > 0.9

    def test_bounded_in_unit_interval(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=4096)
        y = 0.5 * x + rng.normal(size=4096)
        _, c = an.coherence(x, y, cfg_small())
        assert np.nanmin(c) >= -1e-9
        assert np.nanmax(c) <= 1.0 + 1e-9

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            an.coherence(np.zeros(300), np.zeros(300), cfg_small())

    def test_zero_spectrum_bin_is_nan(self):
        x = np.zeros(4096)
        y = np.zeros(4096)
        _, c = an.coherence(x, y, cfg_small())
        assert np.all(np.isnan(c))

    def test_pooling_reduces_variance(self):
        rng = np.random.default_rng(5)
        pairs = []
        for _ in range(6):
            x = rng.normal(size=2048)
            pairs.append((x, x + rng.normal(size=2048)))
        f, c = an.pooled_coherence(pairs, cfg_small())
        assert np.nanmin(c) >= -1e-9 and np.nanmax(c) <= 1.0 + 1e-9

    def test_spectral_config_validation(self):
        with pytest.raises(ValueError):
            an.SpectralConfig(nperseg=1000)
        with pytest.raises(ValueError):
            an.SpectralConfig(overlap=0.95)


class TestHalfCrossing:
    def test_linear_interpolation_example(self):
        f = np.array([0.05, 0.10])
        c = np.array([0.8, 0.2])
        assert an.coherence_half_crossing(f, c) == pytest.approx(0.075, rel=1e-12)

    def test_no_crossing_reported_absent(self):
        f = np.linspace(0.01, 1.0, 50)
        assert an.coherence_half_crossing(f, np.ones(50)) is None

    def test_first_crossing_wins(self):
        f = np.array([0.02, 0.04, 0.06, 0.08])
        c = np.array([0.9, 0.4, 0.6, 0.3])
        got = an.coherence_half_crossing(f, c)
        assert 0.02 < got < 0.04


class TestSegmentStats:
    def make_inputs(self, n=6000, dt=0.1):
        t = np.arange(n) * dt
        loads = {"tower": np.ones(n) * 5.0, "blade": -np.ones(n) * 2.0}
        truth = {"u_eff": np.full(n, 12.0), "delta": np.full(n, 0.03)}
        return t, loads, truth

    def test_constant_load_extreme_every_segment(self):
        t, loads, truth = self.make_inputs()
        rows = an.segment_stats(t, loads, truth, segment_s=100.0)
        assert len(rows) == 6
        assert all(r.extremes["tower"] == 5.0 for r in rows)
        assert all(r.extremes["blade"] == -2.0 for r in rows)

    def test_600s_in_100s_segments_gives_six(self):
        t, loads, truth = self.make_inputs(n=6000, dt=0.1)
        rows = an.segment_stats(t, loads, truth, segment_s=100.0)
        assert len(rows) == 6

    def test_triangle_wave_extremes_closed_form(self):
        n, dt = 4000, 0.1
        t = np.arange(n) * dt
        tri = 7.0 * (2.0 * np.abs((t / 50.0) % 2.0 - 1.0) - 1.0)
        loads = {"ch": tri}
        truth = {"u_eff": np.full(n, 10.0), "delta": np.zeros(n)}
        rows = an.segment_stats(t, loads, truth, segment_s=100.0)
        for r in rows:
            assert abs(r.extremes["ch"]) == pytest.approx(7.0, rel=1e-2)

    def test_translation_invariance(self):
        t, loads, truth = self.make_inputs(n=2000)
        rows1 = an.segment_stats(t, loads, truth, segment_s=100.0)
        rows2 = an.segment_stats(t + 500.0, loads, truth, segment_s=100.0)
        assert [r.extremes for r in rows1] == [r.extremes for r in rows2]
        assert [r.delta_mean for r in rows1] == [r.delta_mean for r in rows2]

    def test_signed_extreme_keeps_sign_of_largest_magnitude(self):
        assert an.signed_extreme([1.0, -3.0, 2.0]) == -3.0
        assert an.signed_extreme([1.0, 3.0, -2.0]) == 3.0


class TestQuantileThreshold:
    def test_linear_interpolated_order_statistic(self):
        out, sparse = an.quantile_threshold({12.0: list(range(1, 11))}, 0.8)
        assert out[12.0] == pytest.approx(8.2, rel=1e-12)
        assert not sparse

    def test_all_equal_values(self):
        out, _ = an.quantile_threshold({10.0: [0.4] * 8}, 0.8)
        assert out[10.0] == 0.4

    def test_q_one_is_maximum(self):
        out, _ = an.quantile_threshold({10.0: [1.0, 5.0, 2.0, 4.0, 3.0]}, 1.0)
        assert out[10.0] == 5.0

    def test_sparse_bin_pooled_and_flagged(self):
        out, sparse = an.quantile_threshold(
            {10.0: list(range(1, 11)), 14.0: [100.0]}, 0.8)
        assert sparse == [14.0]
        pooled = list(range(1, 11)) + [100.0]
        assert out[14.0] == pytest.approx(float(np.quantile(pooled, 0.8)), rel=1e-12)

    def test_monotone_in_q(self):
        vals = {10.0: [0.1, 0.5, 0.3, 0.9, 0.7, 0.2]}
        qs = [0.2, 0.5, 0.8, 1.0]
        thr = [an.quantile_threshold(vals, q)[0][10.0] for q in qs]
        assert all(a <= b for a, b in zip(thr, thr[1:]))

    def test_affine_equivariance(self):
        vals = [0.3, 0.9, 0.1, 0.7, 0.5, 0.6]
        base = an.quantile_threshold({1.0: vals}, 0.8)[0][1.0]
        scaled = an.quantile_threshold({1.0: [3.0 * v + 2.0 for v in vals]}, 0.8)[0][1.0]
        assert scaled == pytest.approx(3.0 * base + 2.0, rel=1e-12)


class TestExceedance:
    def test_plotting_positions_nine_values(self):
        curve = an.exceedance(list(range(1, 11)))
        # N=10: probabilities 1 - k/11
        expect = 1.0 - np.arange(1, 11) / 11.0
        assert np.allclose(curve.probabilities, expect)

    def test_nine_distinct_values_exact(self):
        vals = [float(k) for k in range(1, 10)] + [9.5]
        curve = an.exceedance(vals)
        assert curve.probabilities[0] == pytest.approx(1.0 - 1.0 / 11.0)

    def test_monotone_with_duplicates(self):
        curve = an.exceedance([5.0] * 6 + [7.0] * 6)
        assert np.all(np.diff(curve.values) >= 0.0)
        assert np.all(np.diff(curve.probabilities) < 0.0)
        assert np.all((curve.probabilities > 0.0) & (curve.probabilities <= 1.0))

    def test_identical_inputs_identical_curves(self):
        a = an.exceedance(list(range(20)))
        b = an.exceedance(list(range(20)))
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.probabilities, b.probabilities)

    def test_too_few_rejected(self):
        with pytest.raises(ValueError):
            an.exceedance([1.0] * 9)


class TestErrorHistogram:
    def test_identical_series_single_zero_bin(self):
        x = np.linspace(0.0, 1.0, 2000)
        h = an.error_histogram(x, x, dt=0.1, cutoff_hz=0.08)
        assert h.bias == 0.0
        assert h.std == 0.0

    def test_constant_offset(self):
        x = np.linspace(0.0, 1.0, 2000)
        h = an.error_histogram(x + 0.01, x, dt=0.1, cutoff_hz=0.08)
        assert h.bias == pytest.approx(0.01, rel=1e-9)
        assert h.std == pytest.approx(0.0, abs=1e-15)

    def test_settling_interval_excluded(self):
        n = 2000
        x = np.zeros(n)
        e = x.copy()
        skip = int(np.ceil(3.0 / 0.08 / 0.1))
        e[:skip] = 100.0  # transient junk that must not count
        h = an.error_histogram(e, x, dt=0.1, cutoff_hz=0.08)
        assert h.bias == 0.0
