"""vocalis: vocal-training signal metrics, statistics, and live feedback.

The package is organized in layers:

* signal primitives: :mod:`vocalis.signals`, :mod:`vocalis.envelope`,
  :mod:`vocalis.emg`, :mod:`vocalis.spectral`, :mod:`vocalis.f0`,
  :mod:`vocalis.grid`
* domain data: :mod:`vocalis.notes`, :mod:`vocalis.geometry`,
  :mod:`vocalis.dataset`
* inference: :mod:`vocalis.stats`
* live sessions: :mod:`vocalis.feedback`
* front door: :mod:`vocalis.cli`, :mod:`vocalis.config`
"""
from .envelope import Envelope, StabilityScore, hilbert_envelope, stability
from .emg import (
    CalibrationError,
    MvcCalibration,
    RmsSeries,
    mvc_from_calibration,
    normalize_mvc,
    rms_windows,
)
from .f0 import estimate_f0
from .geometry import (
    LandmarkError,
    LandmarkSet,
    LengthMeasurement,
    PitchLengthStats,
    per_pitch_lengths,
    vocal_cord_length,
)
from .grid import GridSeries, overlap, resample_to_grid
from .notes import (
    PitchError,
    PitchEvent,
    PitchLabel,
    format_spn,
    parse_spn,
    scale_schedule,
)
from .signals import SampledSignal, SignalError, band_pass, moving_average
from .spectral import Spectrogram, SprSeries, spr, stft_magnitude
from .stats import (
    CorrelationResult,
    PairedSample,
    PcaResult,
    RankBiserial,
    StatsError,
    TestResult,
    bh_fdr,
    cohens_d,
    pca,
    pearson,
    pre_post_per_pitch,
    rank_biserial,
    wilcoxon_signed_rank,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "CorrelationResult",
    "Envelope",
    "GridSeries",
    "LandmarkError",
    "LandmarkSet",
    "LengthMeasurement",
    "MvcCalibration",
    "PairedSample",
    "PcaResult",
    "PitchError",
    "PitchEvent",
    "PitchLabel",
    "PitchLengthStats",
    "RankBiserial",
    "RmsSeries",
    "SampledSignal",
    "SignalError",
    "Spectrogram",
    "SprSeries",
    "StabilityScore",
    "StatsError",
    "TestResult",
    "band_pass",
    "bh_fdr",
    "cohens_d",
    "estimate_f0",
    "format_spn",
    "hilbert_envelope",
    "moving_average",
    "mvc_from_calibration",
    "normalize_mvc",
    "overlap",
    "parse_spn",
    "pca",
    "pearson",
    "per_pitch_lengths",
    "pre_post_per_pitch",
    "rank_biserial",
    "resample_to_grid",
    "rms_windows",
    "scale_schedule",
    "spr",
    "stability",
    "stft_magnitude",
    "vocal_cord_length",
    "wilcoxon_signed_rank",
    "__version__",
]
