"""EMG amplitude features: MVC calibration, windowed RMS, normalization.

The maximum-voluntary-contraction (MVC) calibration turns raw amplifier
units into a subject-relative scale: 0 at resting baseline, 1 at the
calibration maximum. RMS is computed over fixed windows (200 ms by
default) and normalized against that calibration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signals import SampledSignal, SignalError, moving_average, window_samples

# Envelope smoothing applied before locating the calibration maximum.
MVC_ENVELOPE_WINDOW_MS = 100.0

# A stretch counts as rest when the envelope stays below this fraction of
# the running maximum.
REST_THRESHOLD_FRACTION = 0.10


class CalibrationError(ValueError):
    """Raised when an MVC calibration cannot be computed or is degenerate."""


@dataclass(frozen=True)
class MvcCalibration:
    """Result of the maximum-voluntary-contraction protocol.

    The protocol: repeated ~sustain_s vocal efforts at maximum comfortable
    intensity inside a window_s calibration window, separated by rest_s
    rests. mvc_amplitude and baseline_noise are in raw signal units.
    """

    mvc_amplitude: float
    baseline_noise: float
    window_s: float = 35.0
    sustain_s: float = 3.0
    rest_s: float = 5.0
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.mvc_amplitude > self.baseline_noise >= 0:
            raise CalibrationError(
                "calibration requires mvc_amplitude > baseline_noise >= 0, got "
                f"mvc={self.mvc_amplitude}, baseline={self.baseline_noise}"
            )

    @property
    def span(self) -> float:
        return self.mvc_amplitude - self.baseline_noise


@dataclass(frozen=True)
class RmsSeries:
    """Per-window RMS values, optionally MVC-normalized.

    values is the channel-averaged series; per_channel retains the
    individual channels (channels x windows) for audit.
    """

    values: np.ndarray
    window_ms: float
    hop_ms: float
    normalized: bool = False
    per_channel: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.per_channel is not None:
            pc = np.asarray(self.per_channel, dtype=np.float64)
            pc.setflags(write=False)
            object.__setattr__(self, "per_channel", pc)

    def __len__(self) -> int:
        return len(self.values)


def _rest_runs(below: np.ndarray, min_len: int) -> list[tuple[int, int]]:
    """Contiguous [start, stop) runs of True at least min_len long."""
    runs = []
    start = None
    for i, flag in enumerate(below):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start >= min_len:
                runs.append((start, i))
            start = None
    if start is not None and len(below) - start >= min_len:
        runs.append((start, len(below)))
    return runs


def mvc_from_calibration(
    signal: SampledSignal,
    window_s: float = 35.0,
    sustain_s: float = 3.0,
    rest_s: float = 5.0,
) -> MvcCalibration:
    """Extract MVC amplitude and baseline noise from a calibration recording.

    The first window_s seconds are analyzed. The signal is rectified and
    smoothed with a moving average; the maximum of that envelope is the MVC
    amplitude. Rest intervals are stretches where the envelope stays below
    10% of its running maximum for at least rest_s/2; the baseline is the
    median envelope over them. If no rest interval is found the 5th
    percentile is used instead and the result carries a warning.
    """
    if signal.duration_s < window_s:
        raise CalibrationError(
            f"calibration signal is {signal.duration_s:.2f}s, need {window_s}s"
        )
    n = int(round(window_s * signal.rate_hz))
    window = signal.slice_samples(0, n)
    rectified = SampledSignal(np.abs(window.data), window.rate_hz, window.origin_s)
    env_sig = moving_average(rectified, MVC_ENVELOPE_WINDOW_MS)
    # Multi-channel calibration recordings are fused by the channel mean,
    # same rule as every other EMG metric.
    env = env_sig.data.mean(axis=0)

    mvc_amplitude = float(np.max(env))
    running_max = np.maximum.accumulate(env)
    below = env < REST_THRESHOLD_FRACTION * running_max
    min_len = int(round(rest_s * 0.5 * signal.rate_hz))
    runs = _rest_runs(below, max(min_len, 1))

    warnings: tuple[str, ...] = ()
    if runs:
        rest_values = np.concatenate([env[a:b] for a, b in runs])
        baseline = float(np.median(rest_values))
    else:
        baseline = float(np.percentile(env, 5))
        warnings = ("rest not detected",)

    if not mvc_amplitude > baseline:
        raise CalibrationError("no contraction detected")
    return MvcCalibration(
        mvc_amplitude=mvc_amplitude,
        baseline_noise=baseline,
        window_s=window_s,
        sustain_s=sustain_s,
        rest_s=rest_s,
        warnings=warnings,
    )


def rms_windows(
    signal: SampledSignal, window_ms: float = 200.0, hop_ms: float | None = None
) -> RmsSeries:
    """Root-mean-square amplitude over fixed windows.

    The trailing partial window is discarded so every value covers the
    same duration. Multi-channel signals yield the arithmetic mean of the
    per-channel RMS values; the per-channel series is kept alongside.
    """
    if hop_ms is None:
        hop_ms = window_ms
    if signal.n_samples == 0:
        raise SignalError("empty signal")
    win = window_samples(window_ms, signal.rate_hz)
    hop = window_samples(hop_ms, signal.rate_hz)
    if win > signal.n_samples:
        raise SignalError("window exceeds signal")
    n_windows = (signal.n_samples - win) // hop + 1
    per_channel = np.empty((signal.channel_count, n_windows))
    for ch in range(signal.channel_count):
        x = signal.data[ch]
        for w in range(n_windows):
            seg = x[w * hop : w * hop + win]
            per_channel[ch, w] = np.sqrt(np.mean(seg * seg))
    return RmsSeries(
        values=per_channel.mean(axis=0),
        window_ms=window_ms,
        hop_ms=hop_ms,
        normalized=False,
        per_channel=per_channel,
    )


def normalize_mvc(series: RmsSeries, cal: MvcCalibration) -> RmsSeries:
    """Map RMS values onto the MVC scale: baseline -> 0, MVC maximum -> 1.

    The map is affine and clamped below at zero only; values above the
    calibration maximum stay above 1 rather than saturating.
    """
    if not cal.span > 0:
        raise CalibrationError("degenerate calibration: zero span")

    def apply(v: np.ndarray) -> np.ndarray:
        return np.maximum((v - cal.baseline_noise) / cal.span, 0.0)

    return RmsSeries(
        values=apply(series.values),
        window_ms=series.window_ms,
        hop_ms=series.hop_ms,
        normalized=True,
        per_channel=None if series.per_channel is None else apply(series.per_channel),
    )
