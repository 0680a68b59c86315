"""Uniformly sampled signals and basic time-domain filtering.

A :class:`SampledSignal` holds one or more channels sampled at a common
rate: raw EMG traces (arbitrary amplifier units) or audio (normalized to
[-1, 1]). All downstream processing consumes this type.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps


class SignalError(ValueError):
    """Raised when a signal violates a precondition of an operation."""


@dataclass(frozen=True)
class SampledSignal:
    """Multi-channel time series on a uniform sample grid.

    data is channel-major: shape (channel_count, n_samples). A 1-D array
    is accepted and treated as a single channel.
    """

    data: np.ndarray
    rate_hz: float
    origin_s: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise SignalError(f"signal data must be 1-D or 2-D, got ndim={arr.ndim}")
        if self.rate_hz <= 0:
            raise SignalError(f"rate_hz must be positive, got {self.rate_hz}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channel_count(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.rate_hz

    def channel(self, index: int) -> np.ndarray:
        """One channel as a read-only 1-D array."""
        return self.data[index]

    def single_channel(self) -> np.ndarray:
        """The only channel; raises if the signal is multi-channel."""
        if self.channel_count != 1:
            raise SignalError(
                f"expected a single-channel signal, got {self.channel_count} channels"
            )
        return self.data[0]

    def slice_samples(self, start: int, stop: int) -> "SampledSignal":
        """Sample-index slice [start, stop) keeping rate and shifting origin."""
        start = max(0, start)
        stop = min(self.n_samples, stop)
        return SampledSignal(
            data=self.data[:, start:stop],
            rate_hz=self.rate_hz,
            origin_s=self.origin_s + start / self.rate_hz,
        )


def window_samples(window_ms: float, rate_hz: float) -> int:
    """Convert a window length in milliseconds to a sample count (>= 1)."""
    n = int(round(window_ms * 1e-3 * rate_hz))
    if n < 1:
        raise SignalError(
            f"window of {window_ms} ms is shorter than one sample at {rate_hz} Hz"
        )
    return n


def moving_average(signal: SampledSignal, window_ms: float) -> SampledSignal:
    """Centered moving mean per channel, same length as the input.

    Boundaries use reflected padding, so a constant signal stays constant.
    For even window sizes the window extends one sample further to the right.
    """
    k = window_samples(window_ms, signal.rate_hz)
    n = signal.n_samples
    if k > n:
        raise SignalError("window exceeds signal")
    if k == 1:
        return signal
    pad_left = (k - 1) // 2
    pad_right = k // 2
    kernel = np.full(k, 1.0 / k)
    out = np.empty_like(signal.data)
    for ch in range(signal.channel_count):
        padded = np.pad(signal.data[ch], (pad_left, pad_right), mode="reflect")
        out[ch] = np.convolve(padded, kernel, mode="valid")
    return SampledSignal(out, signal.rate_hz, signal.origin_s)


# Stop-band attenuation target (dB) for the band-pass filter, checked at
# low_hz/2 and min(2*high_hz, 0.98*Nyquist). A 4th-order Butterworth applied
# forward-backward gives ~48 dB one octave out; order 5 leaves margin.
BANDPASS_ORDER = 5


def band_pass(
    signal: SampledSignal, low_hz: float = 500.0, high_hz: float = 4000.0
) -> SampledSignal:
    """Zero-phase Butterworth band-pass (forward-backward application).

    Zero phase keeps the audio aligned with concurrently recorded EMG
    windows, which matters for any cross-signal correlation downstream.
    """
    nyquist = signal.rate_hz / 2.0
    if not 0 < low_hz < high_hz:
        raise SignalError(f"invalid band [{low_hz}, {high_hz}] Hz")
    if high_hz >= nyquist:
        raise SignalError(
            f"band edge {high_hz} Hz is outside Nyquist ({nyquist} Hz)"
        )
    sos = sps.butter(
        BANDPASS_ORDER, [low_hz, high_hz], btype="bandpass", fs=signal.rate_hz, output="sos"
    )
    out = sps.sosfiltfilt(sos, signal.data, axis=1)
    return SampledSignal(out, signal.rate_hz, signal.origin_s)
