"""Vocal-fold length from annotated ultrasound landmarks.

Five key points are annotated per frame: the anterior connection of the
two folds and the inner/outer posterior ends of the left and right fold.
The length is the mean of the distances from the connection point to the
midpoint of each fold's posterior pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import mean, stdev

Point = tuple[float, float]


class LandmarkError(ValueError):
    """Raised for invalid landmark coordinates."""


@dataclass(frozen=True)
class LandmarkSet:
    """One annotated ultrasound frame, coordinates in pixels.

    vs: anterior connection of the folds; l1/l2 and r1/r2: inner and
    outer posterior ends of the left and right fold.
    """

    vs: Point
    l1: Point
    l2: Point
    r1: Point
    r2: Point
    frame_index: int = 0
    calibration_mm_per_px: float | None = None

    def __post_init__(self):
        for name in ("vs", "l1", "l2", "r1", "r2"):
            x, y = getattr(self, name)
            if not (math.isfinite(x) and math.isfinite(y)):
                raise LandmarkError(f"landmark {name} has non-finite coordinates")
        if self.frame_index < 0:
            raise LandmarkError(f"frame_index must be >= 0, got {self.frame_index}")
        if self.calibration_mm_per_px is not None and self.calibration_mm_per_px <= 0:
            raise LandmarkError("calibration_mm_per_px must be positive")


@dataclass(frozen=True)
class LengthMeasurement:
    """Vocal-fold length for one frame; pixels, or mm when calibrated."""

    length: float
    frame_index: int = 0
    pitch_label: str | None = None
    unit: str = "px"


@dataclass(frozen=True)
class PitchLengthStats:
    """Per-pitch aggregate over annotated frames."""

    pitch_label: str
    mean: float
    sd: float | None
    count: int
    underannotated: bool


def _dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _midpoint(a: Point, b: Point) -> Point:
    return ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0)


def vocal_cord_length(landmarks: LandmarkSet) -> LengthMeasurement:
    """Mean distance from the anterior connection to each fold's midpoint."""
    left = _dist(landmarks.vs, _midpoint(landmarks.l1, landmarks.l2))
    right = _dist(landmarks.vs, _midpoint(landmarks.r1, landmarks.r2))
    length = 0.5 * (left + right)
    if landmarks.calibration_mm_per_px is not None:
        return LengthMeasurement(
            length * landmarks.calibration_mm_per_px, landmarks.frame_index, unit="mm"
        )
    return LengthMeasurement(length, landmarks.frame_index)


def per_pitch_lengths(
    measurements: dict[str, list[LengthMeasurement]], frames_per_pitch: int = 5
) -> list[PitchLengthStats]:
    """Mean and sample SD per pitch label.

    Groups with fewer than frames_per_pitch annotations are flagged, not
    rejected; single-frame groups report no SD.
    """
    if not measurements:
        raise LandmarkError("no measurements")
    stats = []
    for pitch, group in measurements.items():
        if not group:
            raise LandmarkError(f"pitch {pitch!r} has no measurements")
        lengths = [m.length for m in group]
        stats.append(
            PitchLengthStats(
                pitch_label=pitch,
                mean=mean(lengths),
                sd=stdev(lengths) if len(lengths) > 1 else None,
                count=len(lengths),
                underannotated=len(lengths) < frames_per_pitch,
            )
        )
    return stats
