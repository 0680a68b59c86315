"""The live practice session: phase machine, chunk ingestion, frame ticks.

A FeedbackSession moves strictly around the cycle
Idle -> Calibrating -> Practicing -> Review -> Idle. During Calibrating
it accumulates EMG for the MVC estimate; during Practicing it cuts the
incoming chunks into grid bins, runs the shared per-bin pipeline, and
emits one FeedbackFrame per tick (30 per second by default).

Frames are causal by construction: the frame at tick time t uses the
last grid bin that ends at or before t, regardless of how much more
signal happens to sit in the buffers. Everything is deterministic, so
the same chunk sequence always yields the same frame stream.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..emg import CalibrationError, MvcCalibration, mvc_from_calibration
from ..notes import PitchEvent
from ..signals import SampledSignal
from .metrics import BinComputer, BinMetrics, DEFAULT_GRID_MS
from .reference import ReferenceTrace

PHASE_IDLE = "Idle"
PHASE_CALIBRATING = "Calibrating"
PHASE_PRACTICING = "Practicing"
PHASE_REVIEW = "Review"

DEFAULT_TICK_HZ = 30.0
DEFAULT_CALIBRATION_WINDOW_S = 35.0


class EngineError(Exception):
    pass


class PhaseError(EngineError):
    """An operation was attempted outside its legal phase."""


class ChunkError(EngineError):
    """A chunk disagrees with the session's rates or time line."""


@dataclass(frozen=True)
class Deviation:
    rms_delta: float
    stability_delta: float
    spr_delta: float
    f0_cents: float | None = None


@dataclass(frozen=True)
class FeedbackFrame:
    t_s: float
    phase: str
    target_pitch: str | None = None
    learner: BinMetrics | None = None
    expert: BinMetrics | None = None
    deviation: Deviation | None = None

    def to_json_obj(self) -> dict:
        """The wire form: exact field names, absent optionals omitted."""
        obj: dict = {"t_s": self.t_s, "phase": self.phase}
        if self.target_pitch is not None:
            obj["target_pitch"] = self.target_pitch
        if self.learner is not None:
            obj["learner"] = _metrics_obj(self.learner)
        if self.expert is not None:
            obj["expert"] = _metrics_obj(self.expert)
        if self.deviation is not None:
            dev: dict = {
                "rms_delta": self.deviation.rms_delta,
                "stability_delta": self.deviation.stability_delta,
                "spr_delta": self.deviation.spr_delta,
            }
            if self.deviation.f0_cents is not None:
                dev["f0_cents"] = self.deviation.f0_cents
            obj["deviation"] = dev
        return obj


def _metrics_obj(m: BinMetrics) -> dict:
    obj = {
        "envelope_mean": m.envelope_mean,
        "stability_window_db": m.stability_window_db,
        "rms_norm": m.rms_norm,
        "spr_db": m.spr_db,
    }
    if m.f0_hz is not None:
        obj["f0_hz"] = m.f0_hz
    return obj


class _SampleBuffer:
    """FIFO of raw sample arrays with cheap bin extraction."""

    def __init__(self, channels: int | None = None):
        self._chunks: deque[np.ndarray] = deque()
        self._available = 0
        self.n_seen = 0
        self.channels = channels

    def append(self, data: np.ndarray) -> None:
        data = np.atleast_2d(data)
        if self.channels is None:
            self.channels = data.shape[0]
        elif data.shape[0] != self.channels:
            raise ChunkError(
                f"chunk has {data.shape[0]} channels, expected {self.channels}"
            )
        self._chunks.append(data)
        self._available += data.shape[1]
        self.n_seen += data.shape[1]

    @property
    def available(self) -> int:
        return self._available

    def take(self, n: int) -> np.ndarray:
        if n > self._available:
            raise ChunkError(f"requested {n} samples, only {self._available} buffered")
        parts = []
        remaining = n
        while remaining > 0:
            head = self._chunks[0]
            if head.shape[1] <= remaining:
                parts.append(head)
                remaining -= head.shape[1]
                self._chunks.popleft()
            else:
                parts.append(head[:, :remaining])
                self._chunks[0] = head[:, remaining:]
                remaining = 0
        self._available -= n
        return parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)

    def concatenate(self) -> np.ndarray:
        if not self._chunks:
            return np.empty((self.channels or 1, 0))
        return np.concatenate(list(self._chunks), axis=1)


class FeedbackSession:
    """One training session: a sequential pipeline fed by process_chunk.

    Both EMG and audio are required; the session is created with the
    manifest's rates and refuses chunks that disagree with them.
    """

    def __init__(
        self,
        emg_rate_hz: float,
        audio_rate_hz: float,
        tick_hz: float = DEFAULT_TICK_HZ,
        grid_ms: float = DEFAULT_GRID_MS,
        calibration_window_s: float = DEFAULT_CALIBRATION_WINDOW_S,
    ):
        if emg_rate_hz <= 0 or audio_rate_hz <= 0:
            raise EngineError("sample rates must be positive")
        if tick_hz <= 0:
            raise EngineError(f"tick_hz must be positive, got {tick_hz}")
        self.emg_rate_hz = float(emg_rate_hz)
        self.audio_rate_hz = float(audio_rate_hz)
        self.tick_hz = float(tick_hz)
        self.grid_ms = float(grid_ms)
        self.calibration_window_s = float(calibration_window_s)

        self.phase = PHASE_IDLE
        self.calibration: MvcCalibration | None = None
        self.reference: ReferenceTrace | None = None
        self.schedule: tuple[PitchEvent, ...] = ()
        self.warnings: list[str] = []

        self._cal_buffer: _SampleBuffer | None = None
        self._computer: BinComputer | None = None
        self._emg: _SampleBuffer | None = None
        self._audio: _SampleBuffer | None = None
        self._learner_bins: list[BinMetrics] = []
        self._bins_done = 0
        self._next_tick = 0
        self._frames_emitted = 0
        self._summary: ReviewSummary | None = None

    # -- phase transitions ---------------------------------------------------

    def _require_phase(self, expected: str, op: str) -> None:
        if self.phase != expected:
            raise PhaseError(f"{op} is not legal in phase {self.phase}")

    def start_calibration(self) -> str:
        self._require_phase(PHASE_IDLE, "start_calibration")
        self.phase = PHASE_CALIBRATING
        self.calibration = None
        self._cal_buffer = _SampleBuffer()
        return self.phase

    def set_calibration(self, calibration: MvcCalibration) -> None:
        """Inject a precomputed MVC estimate instead of streaming one in."""
        self._require_phase(PHASE_CALIBRATING, "set_calibration")
        self.calibration = calibration

    def finish_calibration(self) -> MvcCalibration:
        """Compute the MVC estimate from whatever has been buffered.

        Called automatically once calibration_window_s seconds have
        arrived; call it directly when replaying a shorter recording.
        """
        self._require_phase(PHASE_CALIBRATING, "finish_calibration")
        if self.calibration is not None:
            return self.calibration
        if self._cal_buffer is None or self._cal_buffer.n_seen == 0:
            raise CalibrationError("no calibration signal received")
        data = self._cal_buffer.concatenate()
        signal = SampledSignal(data, self.emg_rate_hz)
        window = min(self.calibration_window_s, signal.duration_s)
        self.calibration = mvc_from_calibration(signal, window_s=window)
        self.warnings.extend(self.calibration.warnings)
        return self.calibration

    def start_practice(
        self,
        reference: ReferenceTrace,
        schedule: tuple[PitchEvent, ...] | None = None,
    ) -> str:
        self._require_phase(PHASE_CALIBRATING, "start_practice")
        if self.calibration is None:
            raise EngineError(
                "calibration incomplete: practice requires a completed MVC estimate"
            )
        if reference.grid_ms != self.grid_ms:
            raise EngineError(
                f"reference grid is {reference.grid_ms} ms, session grid is {self.grid_ms} ms"
            )
        self.reference = reference
        self.schedule = tuple(schedule) if schedule is not None else reference.schedule
        self._computer = BinComputer(
            emg_rate_hz=self.emg_rate_hz,
            audio_rate_hz=self.audio_rate_hz,
            calibration=self.calibration,
            grid_ms=self.grid_ms,
        )
        self._emg = _SampleBuffer()
        self._audio = _SampleBuffer()
        self._learner_bins = []
        self._bins_done = 0
        self._next_tick = 0
        self._frames_emitted = 0
        self.phase = PHASE_PRACTICING
        return self.phase

    def end_session(self) -> str:
        if self.phase == PHASE_PRACTICING:
            self._summary = self._build_summary()
            self.phase = PHASE_REVIEW
        elif self.phase == PHASE_REVIEW:
            self.phase = PHASE_IDLE
        else:
            raise PhaseError(f"end_session is not legal in phase {self.phase}")
        return self.phase

    # -- chunk ingestion -----------------------------------------------------

    def _check_chunk(self, chunk: SampledSignal, rate: float, buffer: _SampleBuffer, name: str):
        if chunk.rate_hz != rate:
            raise ChunkError(
                f"{name} chunk rate {chunk.rate_hz} Hz does not match session rate {rate} Hz"
            )
        expected = buffer.n_seen / rate
        # origin_s == 0.0 on a non-first chunk means the caller is not
        # timestamping; anything else must line up with the stream head.
        if chunk.origin_s != 0.0 or buffer.n_seen == 0:
            if chunk.origin_s < expected - 0.5 / rate:
                raise ChunkError(
                    f"{name} chunk at t={chunk.origin_s:.4f}s regresses behind "
                    f"stream head t={expected:.4f}s"
                )
            if chunk.origin_s > expected + 0.5 / rate:
                raise ChunkError(
                    f"{name} chunk at t={chunk.origin_s:.4f}s leaves a gap after "
                    f"stream head t={expected:.4f}s"
                )

    def process_chunk(
        self,
        emg: SampledSignal | None = None,
        audio: SampledSignal | None = None,
    ) -> list[FeedbackFrame]:
        """Feed the next chunk(s); returns the frames they unlock.

        During Calibrating only EMG is consumed and no frames are
        produced. During Practicing both modalities advance the bin
        pipeline and ticks are emitted for every 1/tick_hz boundary both
        modalities have crossed.
        """
        if self.phase == PHASE_CALIBRATING:
            if emg is not None:
                self._check_chunk(emg, self.emg_rate_hz, self._cal_buffer, "EMG")
                self._cal_buffer.append(emg.data)
                if (
                    self.calibration is None
                    and self._cal_buffer.n_seen
                    >= self.calibration_window_s * self.emg_rate_hz
                ):
                    self.finish_calibration()
            return []
        if self.phase != PHASE_PRACTICING:
            raise PhaseError(f"process_chunk is not legal in phase {self.phase}")

        if emg is not None:
            self._check_chunk(emg, self.emg_rate_hz, self._emg, "EMG")
            self._emg.append(emg.data)
        if audio is not None:
            self._check_chunk(audio, self.audio_rate_hz, self._audio, "audio")
            if audio.channel_count != 1:
                raise ChunkError("audio chunks must be single-channel")
            self._audio.append(audio.data)

        self._advance_bins()
        return self._emit_ticks()

    def _advance_bins(self) -> None:
        eg = self._computer.emg_bin_samples
        ag = self._computer.audio_bin_samples
        complete = min(self._emg.n_seen // eg, self._audio.n_seen // ag)
        while self._bins_done < complete:
            emg_bin = self._emg.take(eg)
            audio_bin = self._audio.take(ag)
            self._learner_bins.append(self._computer.compute(emg_bin, audio_bin[0]))
            self._bins_done += 1

    def _causal_bins(self, tick: int) -> int:
        """Bins whose span ends at or before tick/tick_hz, per sample counts."""
        eg = self._computer.emg_bin_samples
        ag = self._computer.audio_bin_samples
        by_emg = self._bins_ending_by(tick, eg, self.emg_rate_hz)
        by_audio = self._bins_ending_by(tick, ag, self.audio_rate_hz)
        return min(by_emg, by_audio)

    def _bins_ending_by(self, tick: int, bin_samples: int, rate: float) -> int:
        # (k+1) * bin_samples * tick_hz <= tick * rate, solved for count k+1.
        # Rates and tick_hz are floats but small integers in practice; the
        # products stay well inside exact float range.
        limit = tick * rate / self.tick_hz
        return int(math.floor(limit / bin_samples + 1e-9))

    def _target_pitch_at(self, t_s: float) -> str | None:
        for ev in self.schedule:
            if ev.start_s <= t_s < ev.end_s:
                return ev.label.spn
        return None

    def _emit_ticks(self) -> list[FeedbackFrame]:
        frames = []
        while self._tick_ready(self._next_tick):
            frames.append(self._frame_for_tick(self._next_tick))
            self._next_tick += 1
            self._frames_emitted += 1
        return frames

    def _tick_ready(self, tick: int) -> bool:
        return (
            self._emg.n_seen * self.tick_hz >= tick * self.emg_rate_hz
            and self._audio.n_seen * self.tick_hz >= tick * self.audio_rate_hz
        )

    def _frame_for_tick(self, tick: int) -> FeedbackFrame:
        t_s = tick / self.tick_hz
        usable = min(self._causal_bins(tick), len(self._learner_bins))
        learner = expert = None
        deviation = None
        if usable > 0:
            learner = self._learner_bins[usable - 1]
            if self.reference is not None and usable - 1 < self.reference.n_bins:
                expert = self.reference.bins[usable - 1].as_metrics()
        if learner is not None and expert is not None:
            f0_cents = None
            if learner.f0_hz is not None and expert.f0_hz is not None:
                f0_cents = 1200.0 * math.log2(learner.f0_hz / expert.f0_hz)
            deviation = Deviation(
                rms_delta=learner.rms_norm - expert.rms_norm,
                stability_delta=learner.stability_window_db - expert.stability_window_db,
                spr_delta=learner.spr_db - expert.spr_db,
                f0_cents=f0_cents,
            )
        return FeedbackFrame(
            t_s=t_s,
            phase=self.phase,
            target_pitch=self._target_pitch_at(t_s),
            learner=learner,
            expert=expert,
            deviation=deviation,
        )

    # -- results -------------------------------------------------------------

    @property
    def learner_bins(self) -> tuple[BinMetrics, ...]:
        return tuple(self._learner_bins)

    @property
    def frames_emitted(self) -> int:
        return self._frames_emitted

    def summary(self) -> "ReviewSummary":
        if self.phase != PHASE_REVIEW or self._summary is None:
            raise PhaseError("summary is only available in the Review phase")
        return self._summary

    def _build_summary(self) -> "ReviewSummary":
        grid_s = self.grid_ms / 1000.0
        # Bin edges are k*grid_s in floating point; a tiny slack keeps a bin
        # whose edge lands within rounding error of an event boundary from
        # being dropped by both neighbors.
        slack = grid_s * 1e-9
        per_pitch = []
        for ev in self.schedule:
            values = []
            rms_values = []
            for k, m in enumerate(self._learner_bins):
                if ev.start_s - slack <= k * grid_s and (k + 1) * grid_s <= ev.end_s + slack:
                    values.append(m.stability_window_db)
                    rms_values.append(m.rms_norm)
            per_pitch.append(
                PitchSummary(
                    pitch=ev.label.spn,
                    n_bins=len(values),
                    mean_stability_db=float(np.mean(values)) if values else None,
                    mean_rms_norm=float(np.mean(rms_values)) if rms_values else None,
                )
            )
        spr_deltas = []
        rms_deltas = []
        if self.reference is not None:
            for k, m in enumerate(self._learner_bins):
                if k < self.reference.n_bins:
                    ref = self.reference.bins[k]
                    spr_deltas.append(m.spr_db - ref.spr_db)
                    rms_deltas.append(m.rms_norm - ref.rms_norm)
        return ReviewSummary(
            per_pitch=tuple(per_pitch),
            mean_spr_delta=float(np.mean(spr_deltas)) if spr_deltas else None,
            mean_rms_delta=float(np.mean(rms_deltas)) if rms_deltas else None,
            n_bins=len(self._learner_bins),
            n_frames=self._frames_emitted,
        )


@dataclass(frozen=True)
class PitchSummary:
    pitch: str
    n_bins: int
    mean_stability_db: float | None
    mean_rms_norm: float | None


@dataclass(frozen=True)
class ReviewSummary:
    per_pitch: tuple[PitchSummary, ...]
    mean_spr_delta: float | None
    mean_rms_delta: float | None
    n_bins: int
    n_frames: int

    def to_obj(self) -> dict:
        return {
            "per_pitch": [
                {
                    "pitch": p.pitch,
                    "n_bins": p.n_bins,
                    "mean_stability_db": p.mean_stability_db,
                    "mean_rms_norm": p.mean_rms_norm,
                }
                for p in self.per_pitch
            ],
            "mean_spr_delta": self.mean_spr_delta,
            "mean_rms_delta": self.mean_rms_delta,
            "n_bins": self.n_bins,
            "n_frames": self.n_frames,
        }
