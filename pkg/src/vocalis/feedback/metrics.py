"""Per-bin metric pipeline shared by the batch and streaming paths.

Both the reference builder and the live engine cut their inputs into
grid bins (200 ms by default) and push the bins, in order, through one
:class:`BinComputer`. Because the two paths run the very same code on
the very same slices, a full replay reproduces the batch metrics bit
for bit; the advertised equivalence tolerance is slack, not a fudge.

Per bin:

* EMG is smoothed with a short moving average, the analytic-signal
  envelope is taken per channel and channel-averaged; its mean is
  ``envelope_mean``.
* ``stability_window_db`` applies the envelope-stability score to the
  concatenated envelopes of the trailing bins (5 bins = 1.0 s at the
  default grid), a sliding variant of the per-segment score used in
  offline analysis.
* ``rms_norm`` is the channel-mean RMS of the raw EMG bin mapped to the
  MVC scale.
* ``spr_db`` is the whole-bin singing power ratio of the band-passed
  audio bin.
* ``f0_hz`` comes from the autocorrelation estimator on the raw audio
  bin; None while unvoiced.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..envelope import Envelope, hilbert_envelope, stability
from ..emg import MvcCalibration
from ..f0 import estimate_f0
from ..signals import SampledSignal, SignalError, band_pass, moving_average, window_samples
from ..spectral import DEFAULT_WINDOW_SIZE, spr, stft_magnitude

DENOISE_WINDOW_MS = 10.0
STABILITY_SPAN_BINS = 5
DEFAULT_GRID_MS = 200.0


@dataclass(frozen=True)
class BinMetrics:
    envelope_mean: float
    stability_window_db: float
    rms_norm: float
    spr_db: float
    f0_hz: float | None = None


class BinComputer:
    """Stateful bin-by-bin metric computer.

    State is only the trailing envelope history for the sliding
    stability score, so feeding the same bins in the same order always
    yields the same outputs. Create a fresh instance per session or
    reference build.
    """

    def __init__(
        self,
        emg_rate_hz: float,
        audio_rate_hz: float,
        calibration: MvcCalibration,
        grid_ms: float = DEFAULT_GRID_MS,
        stability_span_bins: int = STABILITY_SPAN_BINS,
        band_low_hz: float = 500.0,
        band_high_hz: float = 4000.0,
    ):
        if grid_ms <= 0:
            raise SignalError(f"grid_ms must be positive, got {grid_ms}")
        if stability_span_bins < 1:
            raise SignalError("stability_span_bins must be >= 1")
        self.emg_rate_hz = float(emg_rate_hz)
        self.audio_rate_hz = float(audio_rate_hz)
        self.grid_ms = float(grid_ms)
        self.calibration = calibration
        self.band_low_hz = band_low_hz
        self.band_high_hz = band_high_hz
        self.emg_bin_samples = window_samples(grid_ms, emg_rate_hz)
        self.audio_bin_samples = window_samples(grid_ms, audio_rate_hz)
        if self.audio_bin_samples < DEFAULT_WINDOW_SIZE:
            raise SignalError(
                f"a {grid_ms} ms grid bin holds {self.audio_bin_samples} audio samples, "
                f"fewer than the {DEFAULT_WINDOW_SIZE}-sample spectral window"
            )
        if self.emg_bin_samples < 8:
            raise SignalError(
                f"a {grid_ms} ms grid bin holds only {self.emg_bin_samples} EMG samples"
            )
        self._env_tail: deque[np.ndarray] = deque(maxlen=stability_span_bins)

    def reset(self) -> None:
        self._env_tail.clear()

    def compute(self, emg_bin: np.ndarray, audio_bin: np.ndarray) -> BinMetrics:
        """Metrics for one grid bin; arrays must hold exactly one bin."""
        emg_bin = np.atleast_2d(np.asarray(emg_bin, dtype=np.float64))
        audio_bin = np.asarray(audio_bin, dtype=np.float64).reshape(-1)
        if emg_bin.shape[1] != self.emg_bin_samples:
            raise SignalError(
                f"EMG bin has {emg_bin.shape[1]} samples, expected {self.emg_bin_samples}"
            )
        if len(audio_bin) != self.audio_bin_samples:
            raise SignalError(
                f"audio bin has {len(audio_bin)} samples, expected {self.audio_bin_samples}"
            )

        smoothed = moving_average(
            SampledSignal(emg_bin, self.emg_rate_hz), DENOISE_WINDOW_MS
        )
        channel_envs = [
            hilbert_envelope(
                SampledSignal(smoothed.data[ch], self.emg_rate_hz), trim_fraction=0.0
            ).values
            for ch in range(smoothed.channel_count)
        ]
        env = np.mean(channel_envs, axis=0)
        self._env_tail.append(env)
        tail = np.concatenate(self._env_tail)
        stability_db = stability(Envelope(tail, self.emg_rate_hz, 0.0)).s

        rms = float(np.mean(np.sqrt(np.mean(emg_bin * emg_bin, axis=1))))
        rms_norm = max((rms - self.calibration.baseline_noise) / self.calibration.span, 0.0)

        audio_sig = SampledSignal(audio_bin, self.audio_rate_hz)
        filtered = band_pass(audio_sig, self.band_low_hz, self.band_high_hz)
        spr_db = spr(stft_magnitude(filtered)).segment_db
        f0 = estimate_f0(audio_sig)

        return BinMetrics(
            envelope_mean=float(np.mean(env)),
            stability_window_db=stability_db,
            rms_norm=rms_norm,
            spr_db=spr_db,
            f0_hz=f0,
        )
