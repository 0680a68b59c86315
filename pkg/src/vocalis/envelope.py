"""Amplitude envelopes and the envelope-stability score.

The envelope is the magnitude of the analytic signal (frequency-domain
Hilbert construction over the whole segment). Stability is the mean
absolute dB ratio between consecutive envelope samples, modeled on the
shimmer measure from acoustic voice analysis: lower means steadier
muscle activity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

from .signals import SampledSignal, SignalError

# Floor applied to envelope values before taking ratios; prevents log(0)
# on silent segments. In signal units, configurable per call.
DEFAULT_ENVELOPE_EPSILON = 1e-12

# Fraction trimmed from each end of the envelope; the whole-segment
# analytic signal is unreliable at the boundaries.
DEFAULT_TRIM_FRACTION = 0.05


@dataclass(frozen=True)
class Envelope:
    """Nonnegative amplitude envelope at the source sample rate."""

    values: np.ndarray
    source_rate_hz: float
    trim_fraction: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class StabilityScore:
    """Mean |20*log10(A_{t+1}/A_t)| over an envelope, in dB.

    n_terms is the number of consecutive-sample ratios averaged (N-1).
    """

    s: float
    n_terms: int


def hilbert_envelope(
    signal: SampledSignal, trim_fraction: float = DEFAULT_TRIM_FRACTION
) -> Envelope:
    """Envelope of a single-channel signal via the analytic signal.

    trim_fraction of the samples is discarded at each end to drop the
    edge effects of the whole-segment FFT construction.
    """
    if not 0.0 <= trim_fraction <= 0.25:
        raise SignalError(f"trim_fraction must be in [0, 0.25], got {trim_fraction}")
    x = signal.single_channel()
    if len(x) < 8:
        raise SignalError(f"signal too short for envelope extraction ({len(x)} samples)")
    env = np.abs(hilbert(x))
    trim = int(len(env) * trim_fraction)
    if trim:
        env = env[trim:-trim]
    return Envelope(env, signal.rate_hz, trim_fraction)


def stability(
    envelope: Envelope, epsilon: float = DEFAULT_ENVELOPE_EPSILON
) -> StabilityScore:
    """Envelope-stability score in dB; 0 for a perfectly steady envelope.

    Each envelope value is floored at epsilon before the ratio, so the
    score is finite even across silent stretches. Computed on the ratio
    of consecutive values (not a difference of logs) so that a uniform
    gain change cancels inside the division.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    a = np.maximum(envelope.values, epsilon)
    if len(a) < 2:
        raise SignalError("stability needs at least two envelope samples")
    terms = np.abs(20.0 * np.log10(a[1:] / a[:-1]))
    return StabilityScore(s=float(np.mean(terms)), n_terms=len(terms))
