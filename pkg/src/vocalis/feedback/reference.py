"""Expert reference traces: grid-aligned metric series built offline.

A ReferenceTrace is what a practice session is compared against. It is
built from a recorded session by the exact per-bin pipeline the live
engine runs, so replaying the source recording against its own trace
yields zero deviation everywhere.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..dataset import Session
from ..emg import MvcCalibration, mvc_from_calibration
from ..notes import PitchEvent, parse_spn
from .metrics import BinComputer, BinMetrics, DEFAULT_GRID_MS

REFERENCE_SCHEMA_VERSION = 1


class ReferenceError(Exception):
    pass


@dataclass(frozen=True)
class ReferenceBin:
    rms_norm: float
    stability_window_db: float
    spr_db: float
    envelope_mean: float
    f0_hz: float | None = None
    carried: bool = False

    def as_metrics(self) -> BinMetrics:
        return BinMetrics(
            envelope_mean=self.envelope_mean,
            stability_window_db=self.stability_window_db,
            rms_norm=self.rms_norm,
            spr_db=self.spr_db,
            f0_hz=self.f0_hz,
        )


@dataclass(frozen=True)
class ReferenceTrace:
    grid_ms: float
    bins: tuple[ReferenceBin, ...]
    schedule: tuple[PitchEvent, ...]
    participant_id: str
    session_id: str
    gender: str | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.grid_ms <= 0:
            raise ReferenceError(f"grid_ms must be positive, got {self.grid_ms}")
        for i, b in enumerate(self.bins):
            for name, v in (
                ("rms_norm", b.rms_norm),
                ("stability_window_db", b.stability_window_db),
                ("spr_db", b.spr_db),
                ("envelope_mean", b.envelope_mean),
            ):
                if not math.isfinite(v):
                    raise ReferenceError(f"bin {i}: non-finite {name}")

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    @property
    def duration_s(self) -> float:
        return self.n_bins * self.grid_ms / 1000.0

    def to_obj(self) -> dict:
        return {
            "schema_version": REFERENCE_SCHEMA_VERSION,
            "grid_ms": self.grid_ms,
            "participant_id": self.participant_id,
            "session_id": self.session_id,
            "gender": self.gender,
            "warnings": list(self.warnings),
            "schedule": [
                {
                    "pitch": ev.label.spn,
                    "start_s": ev.start_s,
                    "end_s": ev.end_s,
                    "source": ev.source,
                }
                for ev in self.schedule
            ],
            "bins": [
                {
                    "rms_norm": b.rms_norm,
                    "stability_window_db": b.stability_window_db,
                    "spr_db": b.spr_db,
                    "envelope_mean": b.envelope_mean,
                    "f0_hz": b.f0_hz,
                    "carried": b.carried,
                }
                for b in self.bins
            ],
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ReferenceTrace":
        if obj.get("schema_version") != REFERENCE_SCHEMA_VERSION:
            raise ReferenceError(
                f"unsupported reference schema_version {obj.get('schema_version')!r}"
            )
        try:
            schedule = tuple(
                PitchEvent(
                    label=parse_spn(ev["pitch"]),
                    start_s=float(ev["start_s"]),
                    end_s=float(ev["end_s"]),
                    source=ev.get("source", "scale_task"),
                )
                for ev in obj.get("schedule", [])
            )
            bins = tuple(
                ReferenceBin(
                    rms_norm=float(b["rms_norm"]),
                    stability_window_db=float(b["stability_window_db"]),
                    spr_db=float(b["spr_db"]),
                    envelope_mean=float(b["envelope_mean"]),
                    f0_hz=None if b.get("f0_hz") is None else float(b["f0_hz"]),
                    carried=bool(b.get("carried", False)),
                )
                for b in obj.get("bins", [])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ReferenceError(f"malformed reference document: {exc}") from exc
        return cls(
            grid_ms=float(obj["grid_ms"]),
            bins=bins,
            schedule=schedule,
            participant_id=str(obj.get("participant_id", "")),
            session_id=str(obj.get("session_id", "")),
            gender=obj.get("gender"),
            warnings=tuple(obj.get("warnings", [])),
        )

    def save(self, path: Path | str) -> None:
        text = json.dumps(self.to_obj(), indent=2, allow_nan=False)
        Path(path).write_text(text + "\n")

    @classmethod
    def load(cls, path: Path | str) -> "ReferenceTrace":
        path = Path(path)
        if not path.exists():
            raise ReferenceError(f"reference file not found: {path}")
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ReferenceError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_obj(obj)


def derive_calibration(session: Session) -> tuple[MvcCalibration, list[str]]:
    """Calibration from the session's MVC recording, or its own EMG.

    When the manifest names no separate MVC file the session signal
    itself is used, which inflates the baseline if the singer never
    rests; the returned warning records that.
    """
    warnings: list[str] = []
    recording = session.mvc_recording()
    if recording is None:
        recording = session.emg()
        warnings.append("calibration derived from the session signal itself")
    window_s = min(35.0, recording.duration_s)
    cal = mvc_from_calibration(recording, window_s=window_s)
    warnings.extend(cal.warnings)
    return cal, warnings


def build_reference(
    session: Session,
    grid_ms: float = DEFAULT_GRID_MS,
    calibration: MvcCalibration | None = None,
    session_id: str | None = None,
) -> ReferenceTrace:
    """Run the per-bin pipeline over a whole session, bin 0 upward.

    Uses exactly the same BinComputer as the live engine; only complete
    bins present in both modalities are kept.
    """
    missing = [m for m in ("emg", "audio") if m not in session.manifest.modalities]
    if missing:
        raise ReferenceError(f"session is missing required modalities: {missing}")
    if not session.events:
        raise ReferenceError("session has no pitch events to schedule against")

    warnings: list[str] = []
    if calibration is None:
        calibration, cal_warnings = derive_calibration(session)
        warnings.extend(cal_warnings)

    emg = session.emg()
    audio = session.audio()
    computer = BinComputer(
        emg_rate_hz=emg.rate_hz,
        audio_rate_hz=audio.rate_hz,
        calibration=calibration,
        grid_ms=grid_ms,
    )
    n_bins = min(
        emg.n_samples // computer.emg_bin_samples,
        audio.n_samples // computer.audio_bin_samples,
    )
    bins = []
    for k in range(n_bins):
        eg, ag = computer.emg_bin_samples, computer.audio_bin_samples
        metrics = computer.compute(
            emg.data[:, k * eg : (k + 1) * eg],
            audio.data[0, k * ag : (k + 1) * ag],
        )
        bins.append(
            ReferenceBin(
                rms_norm=metrics.rms_norm,
                stability_window_db=metrics.stability_window_db,
                spr_db=metrics.spr_db,
                envelope_mean=metrics.envelope_mean,
                f0_hz=metrics.f0_hz,
                carried=False,
            )
        )
    return ReferenceTrace(
        grid_ms=grid_ms,
        bins=tuple(bins),
        schedule=session.events,
        participant_id=session.manifest.participant_id,
        session_id=session_id or "session",
        gender=session.manifest.gender,
        warnings=tuple(warnings),
    )
