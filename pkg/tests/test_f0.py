import numpy as np
import pytest

from vocalis.f0 import estimate_f0
from vocalis.signals import SampledSignal

RATE = 48000.0


def tone(freq, duration=0.2, amp=0.5, rate=RATE, phase=0.0):
    t = np.arange(int(duration * rate)) / rate
    return SampledSignal(amp * np.sin(2 * np.pi * freq * t + phase), rate)


class TestEstimateF0:
    @pytest.mark.parametrize("freq", [98.0, 220.0, 440.0, 1318.5])
    def test_pure_tone_recovered(self, freq):
        got = estimate_f0(tone(freq))
        assert got is not None
        assert got == pytest.approx(freq, rel=0.005)

    def test_sub_hz_accuracy_mid_range(self):
        got = estimate_f0(tone(220.0))
        assert abs(got - 220.0) < 0.5

    def test_harmonic_rich_voice_like(self):
        t = np.arange(int(0.2 * RATE)) / RATE
        x = sum((0.5 / k) * np.sin(2 * np.pi * 150.0 * k * t) for k in range(1, 6))
        got = estimate_f0(SampledSignal(x, RATE))
        assert got == pytest.approx(150.0, rel=0.01)

    def test_silence_unvoiced(self):
        assert estimate_f0(SampledSignal(np.zeros(9600), RATE)) is None

    def test_white_noise_unvoiced(self):
        rng = np.random.default_rng(40)
        assert estimate_f0(SampledSignal(rng.standard_normal(9600), RATE)) is None

    def test_too_short_frame(self):
        # below 2 * lag_max (= 1600 samples at the default 60 Hz floor)
        assert estimate_f0(tone(440.0, duration=1000 / RATE)) is None

    def test_out_of_range_low(self):
        assert estimate_f0(tone(30.0, duration=0.5)) is None

    def test_dc_offset_removed(self):
        sig = tone(220.0)
        shifted = SampledSignal(sig.data[0] + 3.0, RATE)
        assert estimate_f0(shifted) == pytest.approx(220.0, rel=0.005)

    def test_amplitude_independent(self):
        a = estimate_f0(tone(330.0, amp=0.01))
        b = estimate_f0(tone(330.0, amp=0.9))
        assert a == pytest.approx(b, rel=1e-6)

    def test_custom_range(self):
        got = estimate_f0(tone(50.0, duration=0.5), f_min=40.0)
        assert got == pytest.approx(50.0, rel=0.01)
