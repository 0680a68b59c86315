"""Session persistence: manifests, EMG CSV, WAV audio, landmark records.

A session is a directory of modality files tied together by a JSON
manifest. The file formats here are the canonical on-disk contract;
recordings from other tooling are converted into them externally.

Formats (all numeric text locale-independent, dot decimal separator):

* EMG: CSV, first line ``# rate_hz=<int> channels=<int>``, then one row
  per sample with one column per channel.
* Audio: PCM WAV, 16-bit integer or 32-bit float; multi-channel files
  are mixed down by averaging, with a warning.
* Landmarks: newline-delimited JSON, one object per annotated frame:
  ``{"frame": int, "p_vs": [x, y], "p_vl1": ..., "p_vl2": ...,
  "p_vr1": ..., "p_vr2": ..., "pitch": "C4"}``.
* Manifest: one JSON document, ``schema_version`` 1.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .geometry import LandmarkSet
from .notes import PitchEvent, PitchLabel, parse_spn
from .signals import SampledSignal

MANIFEST_SCHEMA_VERSION = 1

SKILL_LEVELS = ("novice", "experienced", "professional")
MODALITIES = ("emg", "ultrasound", "audio")
PHASES = ("pre", "post")
METRICS = ("stability", "length", "rms", "spr")


class DatasetError(Exception):
    """Base for all session-loading failures."""


class ManifestError(DatasetError):
    """Manifest missing, unparseable, or schema-invalid."""


class MissingFileError(DatasetError):
    """A file referenced by the manifest does not exist."""


class RateMismatchError(DatasetError):
    """A file header disagrees with the manifest's declared rate."""


class FormatError(DatasetError):
    """A modality file is malformed."""


# ---------------------------------------------------------------------------
# EMG CSV
# ---------------------------------------------------------------------------

def write_emg_csv(path: Path | str, signal: SampledSignal) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# rate_hz={int(signal.rate_hz)} channels={signal.channel_count}\n")
        writer = csv.writer(fh)
        for row in signal.data.T:
            writer.writerow([repr(float(v)) for v in row])


def read_emg_csv(path: Path | str) -> SampledSignal:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"missing modality file: {path}")
    with path.open() as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise FormatError(f"{path}: missing '# rate_hz=... channels=...' header")
        fields = dict(
            part.split("=", 1) for part in header.lstrip("#").split() if "=" in part
        )
        try:
            rate = int(fields["rate_hz"])
            channels = int(fields["channels"])
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{path}: bad header {header!r}") from exc
        rows = []
        for lineno, line in enumerate(csv.reader(fh), start=2):
            if not line:
                continue
            if len(line) != channels:
                raise FormatError(
                    f"{path}:{lineno}: expected {channels} columns, got {len(line)}"
                )
            try:
                rows.append([float(v) for v in line])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric sample") from exc
    if not rows:
        raise FormatError(f"{path}: no samples")
    return SampledSignal(np.asarray(rows).T, float(rate))


# ---------------------------------------------------------------------------
# WAV audio
# ---------------------------------------------------------------------------

def write_wav(path: Path | str, signal: SampledSignal) -> None:
    """Mono 32-bit float WAV."""
    wavfile.write(Path(path), int(signal.rate_hz), signal.single_channel().astype(np.float32))


def read_wav(path: Path | str) -> tuple[SampledSignal, list[str]]:
    """Read a WAV as a mono signal in [-1, 1]; returns (signal, warnings)."""
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"missing modality file: {path}")
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise FormatError(f"{path}: unreadable WAV ({exc})") from exc
    if data.dtype == np.int16:
        samples = data / 32768.0
    elif data.dtype == np.int32:
        samples = data / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported WAV sample format {data.dtype}")
    warnings = []
    if samples.ndim == 2:
        warnings.append(f"{path.name}: {samples.shape[1]}-channel audio mixed down by averaging")
        samples = samples.mean(axis=1)
    return SampledSignal(samples, float(rate)), warnings


# ---------------------------------------------------------------------------
# Landmark annotations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LandmarkRecord:
    landmarks: LandmarkSet
    pitch: str | None


_LANDMARK_KEYS = ("p_vs", "p_vl1", "p_vl2", "p_vr1", "p_vr2")


def write_landmarks(path: Path | str, records: list[LandmarkRecord]) -> None:
    with Path(path).open("w") as fh:
        for rec in records:
            lm = rec.landmarks
            obj = {
                "frame": lm.frame_index,
                "p_vs": list(lm.vs),
                "p_vl1": list(lm.l1),
                "p_vl2": list(lm.l2),
                "p_vr1": list(lm.r1),
                "p_vr2": list(lm.r2),
                "pitch": rec.pitch,
            }
            fh.write(json.dumps(obj) + "\n")


def read_landmarks(path: Path | str) -> list[LandmarkRecord]:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"missing modality file: {path}")
    records = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                points = {k: (float(obj[k][0]), float(obj[k][1])) for k in _LANDMARK_KEYS}
                lm = LandmarkSet(
                    vs=points["p_vs"],
                    l1=points["p_vl1"],
                    l2=points["p_vl2"],
                    r1=points["p_vr1"],
                    r2=points["p_vr2"],
                    frame_index=int(obj["frame"]),
                )
            except (KeyError, IndexError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad landmark record ({exc})") from exc
            records.append(LandmarkRecord(landmarks=lm, pitch=obj.get("pitch")))
    return records


# ---------------------------------------------------------------------------
# Manifest and session
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SessionManifest:
    participant_id: str
    skill_level: str
    modalities: frozenset[str]
    emg_rate_hz: float | None = None
    audio_rate_hz: float | None = None
    video_fps: float | None = None
    pitch_events: tuple[PitchEvent, ...] = ()
    files: dict[str, str] = field(default_factory=dict)
    gender: str | None = None
    root: Path = Path(".")

    def path_for(self, modality: str) -> Path:
        return self.root / self.files[modality]


def _parse_events(raw: list[dict]) -> tuple[PitchEvent, ...]:
    events = []
    for obj in raw:
        events.append(
            PitchEvent(
                label=parse_spn(obj["pitch"]),
                start_s=float(obj["start_s"]),
                end_s=float(obj["end_s"]),
                source=obj.get("source", "scale_task"),
            )
        )
    return tuple(events)


def write_manifest(path: Path | str, manifest: SessionManifest) -> None:
    obj = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "participant_id": manifest.participant_id,
        "skill_level": manifest.skill_level,
        "modalities": sorted(manifest.modalities),
        "emg_rate_hz": manifest.emg_rate_hz,
        "audio_rate_hz": manifest.audio_rate_hz,
        "video_fps": manifest.video_fps,
        "pitch_events": [
            {
                "pitch": ev.label.spn,
                "start_s": ev.start_s,
                "end_s": ev.end_s,
                "source": ev.source,
            }
            for ev in manifest.pitch_events
        ],
        "files": manifest.files,
        "gender": manifest.gender,
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def load_manifest(path: Path | str) -> SessionManifest:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"manifest not found: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    if obj.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(
            f"{path}: unsupported schema_version {obj.get('schema_version')!r}"
        )
    skill = obj.get("skill_level")
    if skill not in SKILL_LEVELS:
        raise ManifestError(f"{path}: skill_level must be one of {SKILL_LEVELS}")
    modalities = frozenset(obj.get("modalities", []))
    unknown = modalities.difference(MODALITIES)
    if unknown:
        raise ManifestError(f"{path}: unknown modalities {sorted(unknown)}")
    try:
        events = _parse_events(obj.get("pitch_events", []))
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"{path}: bad pitch_events ({exc})") from exc
    return SessionManifest(
        participant_id=str(obj.get("participant_id", "")),
        skill_level=skill,
        modalities=modalities,
        emg_rate_hz=obj.get("emg_rate_hz"),
        audio_rate_hz=obj.get("audio_rate_hz"),
        video_fps=obj.get("video_fps"),
        pitch_events=events,
        files=dict(obj.get("files", {})),
        gender=obj.get("gender"),
        root=path.parent,
    )


class Session:
    """Loaded session with lazily materialized modality data.

    File existence is checked up front; signal data is read on first
    access and cached. A Session is immutable once constructed.
    """

    def __init__(self, manifest: SessionManifest):
        self.manifest = manifest
        self.warnings: list[str] = []
        self._emg: SampledSignal | None = None
        self._audio: SampledSignal | None = None
        self._landmarks: list[LandmarkRecord] | None = None
        self._mvc: SampledSignal | None = None
        for modality in sorted(manifest.modalities):
            key = "landmarks" if modality == "ultrasound" else modality
            if key not in manifest.files:
                raise ManifestError(
                    f"manifest declares {modality} but files has no {key!r} entry"
                )
            if not manifest.path_for(key).exists():
                raise MissingFileError(
                    f"missing modality file: {manifest.path_for(key)}"
                )

    @property
    def events(self) -> tuple[PitchEvent, ...]:
        return self.manifest.pitch_events

    def emg(self) -> SampledSignal:
        if self._emg is None:
            if "emg" not in self.manifest.modalities:
                raise DatasetError("session has no EMG modality")
            sig = read_emg_csv(self.manifest.path_for("emg"))
            declared = self.manifest.emg_rate_hz
            if declared is not None and sig.rate_hz != declared:
                raise RateMismatchError(
                    f"EMG rate mismatch: file says {sig.rate_hz}, manifest says {declared}"
                )
            self._emg = sig
        return self._emg

    def audio(self) -> SampledSignal:
        if self._audio is None:
            if "audio" not in self.manifest.modalities:
                raise DatasetError("session has no audio modality")
            sig, warnings = read_wav(self.manifest.path_for("audio"))
            declared = self.manifest.audio_rate_hz
            if declared is not None and sig.rate_hz != declared:
                raise RateMismatchError(
                    f"audio rate mismatch: file says {sig.rate_hz}, manifest says {declared}"
                )
            self.warnings.extend(warnings)
            self._audio = sig
        return self._audio

    def landmarks(self) -> list[LandmarkRecord]:
        if self._landmarks is None:
            if "ultrasound" not in self.manifest.modalities:
                raise DatasetError("session has no ultrasound modality")
            self._landmarks = read_landmarks(self.manifest.path_for("landmarks"))
        return self._landmarks

    def mvc_recording(self) -> SampledSignal | None:
        """The separate MVC calibration recording, when the session has one."""
        if "mvc" not in self.manifest.files:
            return None
        if self._mvc is None:
            path = self.manifest.path_for("mvc")
            if not path.exists():
                raise MissingFileError(f"missing modality file: {path}")
            self._mvc = read_emg_csv(path)
        return self._mvc


def load_session(path: Path | str) -> Session:
    return Session(load_manifest(path))


# ---------------------------------------------------------------------------
# Pitch segmentation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PitchSegment:
    label: PitchLabel
    signal: SampledSignal
    truncated: bool = False


@dataclass
class SegmentationResult:
    segments: list[PitchSegment]
    skipped: list[tuple[PitchEvent, str]]


def segment_by_pitch(
    signal: SampledSignal, events: list[PitchEvent] | tuple[PitchEvent, ...]
) -> SegmentationResult:
    """Sample-accurate [start_s, end_s) slices of the signal per event.

    Events running past the end of the signal are truncated and flagged;
    events starting at or after the end are skipped with a warning record.
    """
    n = signal.n_samples
    rate = signal.rate_hz
    segments: list[PitchSegment] = []
    skipped: list[tuple[PitchEvent, str]] = []
    for ev in events:
        i0 = int(round(ev.start_s * rate))
        i1 = int(round(ev.end_s * rate))
        if i0 >= n:
            skipped.append((ev, f"{ev.label.spn}: starts after signal end"))
            continue
        truncated = i1 > n
        segments.append(
            PitchSegment(
                label=ev.label,
                signal=signal.slice_samples(i0, min(i1, n)),
                truncated=truncated,
            )
        )
    return SegmentationResult(segments=segments, skipped=skipped)


# ---------------------------------------------------------------------------
# Feature table export
# ---------------------------------------------------------------------------

FEATURE_COLUMNS = ("participant", "pitch", "phase", "metric", "value", "group", "gender", "order")


@dataclass(frozen=True)
class FeatureRow:
    participant: str
    pitch: str
    phase: str
    metric: str
    value: float
    group: str = ""
    gender: str = ""
    order: str = ""


class FeatureTable:
    """Long-format metric table keyed by (participant, pitch, phase, metric).

    Duplicate keys and non-finite values are rejected at insertion, so an
    exported table never contains missing cells.
    """

    def __init__(self):
        self._rows: dict[tuple[str, str, str, str], FeatureRow] = {}

    def __len__(self) -> int:
        return len(self._rows)

    def add(self, row: FeatureRow) -> None:
        if row.phase not in PHASES:
            raise ValueError(f"phase must be one of {PHASES}, got {row.phase!r}")
        if row.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {row.metric!r}")
        if not math.isfinite(row.value):
            raise ValueError(f"non-finite value for {row.participant}/{row.pitch}")
        key = (row.participant, row.pitch, row.phase, row.metric)
        if key in self._rows:
            raise ValueError(f"duplicate feature key {key}")
        self._rows[key] = row

    def rows(self) -> list[FeatureRow]:
        """Rows ordered by participant, pitch (musically), phase, metric."""

        def sort_key(row: FeatureRow):
            try:
                pitch_key = (0, parse_spn(row.pitch).midi, row.pitch)
            except Exception:
                pitch_key = (1, 0, row.pitch)
            return (row.participant, pitch_key, row.phase, row.metric)

        return sorted(self._rows.values(), key=sort_key)

    def value(self, participant: str, pitch: str, phase: str, metric: str) -> float | None:
        row = self._rows.get((participant, pitch, phase, metric))
        return None if row is None else row.value

    def participants(self) -> list[str]:
        return sorted({r.participant for r in self._rows.values()})

    def pitches(self, metric: str | None = None) -> list[str]:
        labels = {
            r.pitch for r in self._rows.values() if metric is None or r.metric == metric
        }

        def key(p):
            try:
                return (0, parse_spn(p).midi, p)
            except Exception:
                return (1, 0, p)

        return sorted(labels, key=key)


def export_features(table: FeatureTable, path: Path | str) -> int:
    """Write the table as CSV in the documented column order; returns row count."""
    path = Path(path)
    rows = table.rows()
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURE_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.participant,
                    row.pitch,
                    row.phase,
                    row.metric,
                    repr(row.value),
                    row.group,
                    row.gender,
                    row.order,
                ]
            )
    return len(rows)


def read_feature_csv(path: Path | str) -> FeatureTable:
    """Inverse of export_features."""
    table = FeatureTable()
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        for record in reader:
            table.add(
                FeatureRow(
                    participant=record["participant"],
                    pitch=record["pitch"],
                    phase=record["phase"],
                    metric=record["metric"],
                    value=float(record["value"]),
                    group=record.get("group", ""),
                    gender=record.get("gender", ""),
                    order=record.get("order", ""),
                )
            )
    return table
