import numpy as np
import pytest

from vocalis.signals import (
    SampledSignal,
    SignalError,
    band_pass,
    moving_average,
    window_samples,
)


class TestSampledSignal:
    def test_one_dim_becomes_single_channel(self):
        sig = SampledSignal(np.arange(5.0), 100.0)
        assert sig.channel_count == 1
        assert sig.n_samples == 5
        assert sig.duration_s == pytest.approx(0.05)

    def test_data_is_read_only(self):
        sig = SampledSignal(np.zeros((2, 4)), 100.0)
        with pytest.raises(ValueError):
            sig.data[0, 0] = 1.0

    def test_rejects_bad_rate_and_shape(self):
        with pytest.raises(SignalError):
            SampledSignal(np.zeros(4), 0.0)
        with pytest.raises(SignalError):
            SampledSignal(np.zeros(4), -10.0)
        with pytest.raises(SignalError):
            SampledSignal(np.zeros((2, 2, 2)), 100.0)

    def test_single_channel_guard(self):
        sig = SampledSignal(np.zeros((2, 4)), 100.0)
        with pytest.raises(SignalError):
            sig.single_channel()

    def test_slice_shifts_origin(self):
        sig = SampledSignal(np.arange(10.0), 100.0, origin_s=1.0)
        part = sig.slice_samples(3, 7)
        assert part.n_samples == 4
        assert part.origin_s == pytest.approx(1.03)
        assert np.array_equal(part.data[0], np.arange(3.0, 7.0))

    def test_slice_clamps_bounds(self):
        sig = SampledSignal(np.arange(5.0), 100.0)
        part = sig.slice_samples(-2, 99)
        assert part.n_samples == 5
        assert part.origin_s == 0.0


class TestWindowSamples:
    def test_exact_conversion(self):
        assert window_samples(200.0, 2000.0) == 400
        assert window_samples(200.0, 48000.0) == 9600
        assert window_samples(10.0, 2000.0) == 20
        assert window_samples(100.0, 2000.0) == 200

    def test_sub_sample_window_rejected(self):
        with pytest.raises(SignalError):
            window_samples(0.1, 100.0)


class TestMovingAverage:
    def test_constant_signal_unchanged(self):
        sig = SampledSignal(np.full(100, 3.5), 1000.0)
        out = moving_average(sig, 10.0)
        assert np.allclose(out.data, 3.5)

    def test_hand_computed_interior(self):
        # 3-sample window at 1000 Hz over a ramp: interior values are the
        # center sample itself (mean of an arithmetic triple).
        sig = SampledSignal(np.arange(10.0), 1000.0)
        out = moving_average(sig, 3.0)
        assert np.allclose(out.data[0][1:-1], np.arange(10.0)[1:-1])

    def test_preserves_mean_scale(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(500)
        sig = SampledSignal(x, 2000.0)
        out = moving_average(sig, 10.0)
        assert out.n_samples == 500
        # smoothing shrinks variance but the DC content survives
        assert np.mean(out.data) == pytest.approx(np.mean(x), abs=0.02)
        assert np.std(out.data) < np.std(x)

    def test_per_channel_independent(self):
        rng = np.random.default_rng(1)
        a, b = rng.standard_normal((2, 300))
        merged = moving_average(SampledSignal(np.stack([a, b]), 1000.0), 7.0)
        alone = moving_average(SampledSignal(a, 1000.0), 7.0)
        assert np.array_equal(merged.data[0], alone.data[0])

    def test_window_longer_than_signal(self):
        with pytest.raises(SignalError):
            moving_average(SampledSignal(np.zeros(5), 1000.0), 100.0)

    def test_one_sample_window_is_identity(self):
        sig = SampledSignal(np.arange(8.0), 1000.0)
        assert np.array_equal(moving_average(sig, 1.0).data, sig.data)


class TestBandPass:
    RATE = 48000.0

    def _tone(self, freq, duration=1.0, amp=1.0):
        t = np.arange(int(self.RATE * duration)) / self.RATE
        return SampledSignal(amp * np.sin(2 * np.pi * freq * t), self.RATE)

    def _rms_interior(self, sig):
        x = sig.data[0]
        k = len(x) // 10
        return float(np.sqrt(np.mean(x[k:-k] ** 2)))

    def test_passband_near_unity(self):
        for freq in (800.0, 1500.0, 3000.0):
            out = band_pass(self._tone(freq))
            assert self._rms_interior(out) == pytest.approx(1 / np.sqrt(2), rel=0.02)

    def test_stopband_attenuation_40_db(self):
        ref = 1 / np.sqrt(2)
        # an octave below the low edge and an octave above the high edge
        for freq in (250.0, 8000.0):
            out = band_pass(self._tone(freq))
            atten_db = 20 * np.log10(self._rms_interior(out) / ref)
            assert atten_db < -40.0

    def test_zero_phase_alignment(self):
        # A burst stays centered where it was: group delay is zero.
        n = int(self.RATE)
        x = np.zeros(n)
        center = n // 2
        t = np.arange(-500, 500) / self.RATE
        x[center - 500 : center + 500] = np.sin(2 * np.pi * 2000.0 * t) * np.hanning(1000)
        out = band_pass(SampledSignal(x, self.RATE))
        env = np.abs(out.data[0])
        assert abs(int(np.argmax(env)) - center) < 200

    def test_band_validation(self):
        sig = self._tone(1000.0, duration=0.1)
        with pytest.raises(SignalError):
            band_pass(sig, low_hz=0.0, high_hz=100.0)
        with pytest.raises(SignalError):
            band_pass(sig, low_hz=500.0, high_hz=400.0)
        with pytest.raises(SignalError):
            band_pass(sig, low_hz=500.0, high_hz=24000.0)

    def test_keeps_rate_and_origin(self):
        sig = SampledSignal(np.random.default_rng(2).standard_normal(4800), self.RATE, origin_s=2.5)
        out = band_pass(sig)
        assert out.rate_hz == self.RATE
        assert out.origin_s == 2.5
        assert out.n_samples == sig.n_samples
