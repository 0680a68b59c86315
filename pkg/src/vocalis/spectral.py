"""Short-time spectra and the singing power ratio (SPR).

SPR is the dB ratio of spectral energy in the 2-4 kHz band (the
"singer's formant" region that carries the ring of a trained voice)
to the 0.5-1 kHz band. Energies are sums of squared STFT magnitudes
over the bins whose center frequency falls inside each band.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import SampledSignal, SignalError

DEFAULT_WINDOW_SIZE = 2048
DEFAULT_HOP = 512

DEFAULT_HIGH_BAND_HZ = (2000.0, 4000.0)
DEFAULT_LOW_BAND_HZ = (500.0, 1000.0)

# Energy floor added to both band energies; keeps the ratio finite on
# silent frames. In squared-magnitude units.
DEFAULT_SPR_EPSILON = 1e-12


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude spectrogram: frames x frequency bins."""

    magnitudes: np.ndarray
    rate_hz: float
    window_size: int
    hop: int

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        mags.setflags(write=False)
        object.__setattr__(self, "magnitudes", mags)

    @property
    def bin_hz(self) -> float:
        return self.rate_hz / self.window_size

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def n_bins(self) -> int:
        return self.magnitudes.shape[1]

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_hz

    def frame_time_s(self, frame: int) -> float:
        """Center time of a frame, relative to the signal start."""
        return (frame * self.hop + self.window_size / 2) / self.rate_hz


@dataclass(frozen=True)
class SprSeries:
    """Per-frame SPR in dB plus the whole-segment value.

    segment_db is computed from band energies summed over all frames,
    not from averaging the per-frame dB values.
    """

    values: np.ndarray
    segment_db: float
    high_band_hz: tuple[float, float] = DEFAULT_HIGH_BAND_HZ
    low_band_hz: tuple[float, float] = DEFAULT_LOW_BAND_HZ
    epsilon: float = DEFAULT_SPR_EPSILON

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


def stft_magnitude(
    signal: SampledSignal,
    window_size: int = DEFAULT_WINDOW_SIZE,
    hop: int = DEFAULT_HOP,
) -> Spectrogram:
    """Magnitudes of the DFT of consecutive tapered frames.

    Frames lie fully inside the signal (no padding or centering); the
    taper is a symmetric cosine (Hann) window.
    """
    x = signal.single_channel()
    if len(x) < window_size:
        raise SignalError(
            f"signal of {len(x)} samples is shorter than one {window_size}-sample window"
        )
    if hop < 1:
        raise SignalError(f"hop must be >= 1, got {hop}")
    taper = np.hanning(window_size)
    n_frames = (len(x) - window_size) // hop + 1
    mags = np.empty((n_frames, window_size // 2 + 1))
    for f in range(n_frames):
        frame = x[f * hop : f * hop + window_size]
        mags[f] = np.abs(np.fft.rfft(frame * taper))
    return Spectrogram(mags, signal.rate_hz, window_size, hop)


def band_bins(spec: Spectrogram, band_hz: tuple[float, float]) -> np.ndarray:
    """Indices of the bins whose center frequency lies in band_hz, inclusive."""
    lo, hi = band_hz
    freqs = spec.bin_frequencies()
    return np.flatnonzero((freqs >= lo) & (freqs <= hi))


def spr(
    spec: Spectrogram,
    high_band_hz: tuple[float, float] = DEFAULT_HIGH_BAND_HZ,
    low_band_hz: tuple[float, float] = DEFAULT_LOW_BAND_HZ,
    epsilon: float = DEFAULT_SPR_EPSILON,
) -> SprSeries:
    """Singing power ratio per frame and for the whole segment.

    SPR = 10*log10((E_high + eps) / (E_low + eps)), E = sum of squared
    magnitudes over the band's bins.
    """
    nyquist = spec.rate_hz / 2.0
    for band in (high_band_hz, low_band_hz):
        if band[0] >= band[1]:
            raise SignalError(f"invalid band {band}")
        if band[1] > nyquist:
            raise SignalError(f"band {band} exceeds Nyquist ({nyquist} Hz)")
    hi_bins = band_bins(spec, high_band_hz)
    lo_bins = band_bins(spec, low_band_hz)
    if len(hi_bins) == 0 or len(lo_bins) == 0:
        raise SignalError("band contains no spectrogram bins")

    power = spec.magnitudes**2
    e_high = power[:, hi_bins].sum(axis=1)
    e_low = power[:, lo_bins].sum(axis=1)
    per_frame = 10.0 * np.log10((e_high + epsilon) / (e_low + epsilon))
    segment = 10.0 * np.log10((e_high.sum() + epsilon) / (e_low.sum() + epsilon))
    return SprSeries(
        values=per_frame,
        segment_db=float(segment),
        high_band_hz=high_band_hz,
        low_band_hz=low_band_hz,
        epsilon=epsilon,
    )
