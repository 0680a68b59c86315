"""Autocorrelation fundamental-frequency estimator.

Plumbing for the pitch ladder in the live view, not an analysis metric:
a normalized-autocorrelation peak picker with parabolic interpolation.
Returns None for unvoiced or too-short frames instead of raising.
"""
from __future__ import annotations

import numpy as np

from .signals import SampledSignal

DEFAULT_F_MIN = 60.0
DEFAULT_F_MAX = 1500.0

# Minimum normalized autocorrelation at the picked lag for a frame to
# count as voiced. Empirical; white noise peaks stay well below this.
VOICING_CONFIDENCE = 0.3


def estimate_f0(
    frame: SampledSignal,
    f_min: float = DEFAULT_F_MIN,
    f_max: float = DEFAULT_F_MAX,
    confidence_threshold: float = VOICING_CONFIDENCE,
) -> float | None:
    x = frame.single_channel()
    rate = frame.rate_hz
    lag_min = int(np.floor(rate / f_max))
    lag_max = int(np.ceil(rate / f_min))
    if lag_min < 1 or len(x) < 2 * lag_max:
        return None

    x = x - np.mean(x)
    r0 = float(np.dot(x, x))
    if r0 <= 0.0:
        return None

    # Full autocorrelation via FFT, normalized by the zero-lag energy.
    n = len(x)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spectrum = np.fft.rfft(x, nfft)
    acf = np.fft.irfft(spectrum * np.conj(spectrum), nfft)[: lag_max + 2]
    acf = acf / r0

    # Consider local maxima only. A plain argmax can land on the search
    # boundary while still climbing the shoulder of the zero-lag peak
    # (period below range) or toward a longer period above the range.
    lags = np.arange(lag_min, lag_max + 1)
    is_max = (acf[lags] >= acf[lags - 1]) & (acf[lags] >= acf[lags + 1])
    candidates = lags[is_max]
    if len(candidates) == 0:
        return None
    peak = int(candidates[np.argmax(acf[candidates])])
    if acf[peak] < confidence_threshold:
        return None

    # Parabolic interpolation around the peak for sub-sample lag accuracy.
    lag = float(peak)
    if lag_min < peak < lag_max:
        left, mid, right = acf[peak - 1], acf[peak], acf[peak + 1]
        denom = left - 2 * mid + right
        if denom < 0:
            lag += 0.5 * (left - right) / denom

    f0 = rate / lag
    if not f_min <= f0 <= f_max:
        return None
    return float(f0)
