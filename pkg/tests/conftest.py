"""Shared synthetic fixtures.

Sessions are generated, never recorded: EMG is band-limited noise under a
slow amplitude profile, audio is a two-tone mixture with one component in
each comparison band, and the MVC recording alternates contraction bursts
with rest. Everything is seeded so tests are reproducible.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from vocalis.dataset import (
    LandmarkRecord,
    SessionManifest,
    load_session,
    write_emg_csv,
    write_landmarks,
    write_manifest,
    write_wav,
)
from vocalis.geometry import LandmarkSet
from vocalis.notes import PitchEvent, PitchLabel, parse_spn
from vocalis.signals import SampledSignal

EMG_RATE = 2000.0
AUDIO_RATE = 48000.0


def make_emg(
    duration_s: float,
    rate_hz: float = EMG_RATE,
    channels: int = 2,
    seed: int = 7,
    profile_hz: float = 0.5,
) -> SampledSignal:
    """Noise carrier under a slow sinusoidal amplitude profile."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    amp = 0.5 + 0.4 * np.sin(2.0 * np.pi * profile_hz * t)
    data = np.stack([amp * rng.standard_normal(n) for _ in range(channels)])
    return SampledSignal(data, rate_hz)


def make_audio(
    duration_s: float,
    rate_hz: float = AUDIO_RATE,
    freqs: tuple[float, ...] = (700.0, 3000.0),
    amps: tuple[float, ...] = (0.4, 0.2),
    noise: float = 0.0,
    seed: int = 13,
) -> SampledSignal:
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    x = np.zeros(n)
    for f, a in zip(freqs, amps):
        x += a * np.sin(2.0 * np.pi * f * t)
    if noise > 0.0:
        x += noise * np.random.default_rng(seed).standard_normal(n)
    return SampledSignal(x, rate_hz)


def make_mvc(
    duration_s: float = 36.0,
    rate_hz: float = EMG_RATE,
    channels: int = 2,
    seed: int = 11,
) -> SampledSignal:
    """Calibration recording: 3 s contraction bursts every 8 s, rest between."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    amp = np.where((t % 8.0) < 3.0, 1.0, 0.01)
    data = np.stack([amp * rng.standard_normal(n) for _ in range(channels)])
    return SampledSignal(data, rate_hz)


def two_pitch_events() -> tuple[PitchEvent, ...]:
    return (
        PitchEvent(label=parse_spn("A3"), start_s=0.0, end_s=2.0),
        PitchEvent(label=parse_spn("C4"), start_s=2.0, end_s=4.0),
    )


def make_landmark_records(
    pitches: list[str], frames_per_pitch: int = 5, jitter: float = 0.0, seed: int = 3
) -> list[LandmarkRecord]:
    """3-4-5 right-triangle geometry, optionally jittered per frame."""
    rng = np.random.default_rng(seed)
    records = []
    frame = 0
    for pitch in pitches:
        for _ in range(frames_per_pitch):
            d = rng.normal(0.0, jitter, size=10) if jitter else np.zeros(10)
            lm = LandmarkSet(
                vs=(0.0 + d[0], 0.0 + d[1]),
                l1=(3.0 + d[2], 3.0 + d[3]),
                l2=(3.0 + d[4], 5.0 + d[5]),
                r1=(-3.0 + d[6], 3.0 + d[7]),
                r2=(-3.0 + d[8], 5.0 + d[9]),
                frame_index=frame,
            )
            records.append(LandmarkRecord(landmarks=lm, pitch=pitch))
            frame += 1
    return records


def write_session(
    root: Path,
    name: str = "s01",
    participant_id: str = "p01",
    duration_s: float = 4.0,
    events: tuple[PitchEvent, ...] | None = None,
    emg: SampledSignal | None = None,
    audio: SampledSignal | None = None,
    with_mvc: bool = True,
    with_landmarks: bool = False,
    gender: str | None = "female",
    skill_level: str = "novice",
    emg_seed: int = 7,
    audio_seed: int = 13,
) -> Path:
    """Write a complete session directory; returns the manifest path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if events is None:
        events = two_pitch_events()
    if emg is None:
        emg = make_emg(duration_s, seed=emg_seed)
    if audio is None:
        audio = make_audio(duration_s, seed=audio_seed)
    files = {"emg": f"{name}_emg.csv", "audio": f"{name}_audio.wav"}
    modalities = {"emg", "audio"}
    write_emg_csv(root / files["emg"], emg)
    write_wav(root / files["audio"], audio)
    if with_mvc:
        files["mvc"] = f"{name}_mvc.csv"
        write_emg_csv(root / files["mvc"], make_mvc(channels=emg.channel_count))
    if with_landmarks:
        files["landmarks"] = f"{name}_landmarks.ndjson"
        modalities.add("ultrasound")
        write_landmarks(
            root / files["landmarks"],
            make_landmark_records([ev.label.spn for ev in events]),
        )
    manifest = SessionManifest(
        participant_id=participant_id,
        skill_level=skill_level,
        modalities=frozenset(modalities),
        emg_rate_hz=emg.rate_hz,
        audio_rate_hz=audio.rate_hz,
        video_fps=60.0 if with_landmarks else None,
        pitch_events=events,
        files=files,
        gender=gender,
        root=root,
    )
    path = root / f"{name}.json"
    write_manifest(path, manifest)
    return path


@pytest.fixture
def session_dir(tmp_path):
    """A standard 4 s two-pitch session with an MVC recording."""
    return write_session(tmp_path / "sess")


@pytest.fixture
def session(session_dir):
    return load_session(session_dir)


def read_json(path: Path):
    with Path(path).open() as fh:
        return json.load(fh)
