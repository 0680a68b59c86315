"""HTTP/WebSocket front end for live practice sessions.

Endpoints:

* ``POST /sessions`` with ``{"manifest_path": ...}`` creates a session
  from a recorded manifest; its signals are what the session replays.
* ``GET /references`` lists the reference library.
* ``GET /sessions/{id}/summary`` returns the Review-phase aggregate.
* ``WS /session/{id}/stream`` streams newline-delimited JSON frames and
  accepts control commands (``start_calibration``, ``start_practice``,
  ``end``) as JSON messages on the same connection.

One session is one sequential pipeline; the replay task feeds chunks in
tick-sized slices and publishes the resulting frames through a bounded
fan-out, so a slow client is disconnected rather than stalling anyone.
"""
from __future__ import annotations

import asyncio
import json
import math
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..dataset import DatasetError, Session, load_session
from ..emg import CalibrationError
from ..signals import SampledSignal
from .broadcast import Broadcaster
from .engine import (
    EngineError,
    FeedbackFrame,
    FeedbackSession,
    PHASE_CALIBRATING,
    PHASE_PRACTICING,
    PHASE_REVIEW,
)
from .reference import ReferenceError, ReferenceTrace


class ReferenceLibrary:
    """Directory of reference-trace JSON documents, cached by mtime."""

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        self._cache: dict[str, tuple[float, ReferenceTrace]] = {}

    def ids(self) -> list[str]:
        if not self.directory.is_dir():
            return []
        return sorted(p.stem for p in self.directory.glob("*.json"))

    def get(self, reference_id: str) -> ReferenceTrace:
        path = self.directory / f"{reference_id}.json"
        if not path.exists():
            raise ReferenceError(f"unknown reference {reference_id!r}")
        mtime = path.stat().st_mtime
        cached = self._cache.get(reference_id)
        if cached is not None and cached[0] == mtime:
            return cached[1]
        trace = ReferenceTrace.load(path)
        self._cache[reference_id] = (mtime, trace)
        return trace

    def describe(self, reference_id: str) -> dict:
        trace = self.get(reference_id)
        return {
            "id": reference_id,
            "participant_id": trace.participant_id,
            "session_id": trace.session_id,
            "gender": trace.gender,
            "grid_ms": trace.grid_ms,
            "n_bins": trace.n_bins,
            "duration_s": trace.duration_s,
            "pitches": [ev.label.spn for ev in trace.schedule],
        }


@dataclass
class LiveSession:
    session_id: str
    session: Session
    engine: FeedbackSession
    broadcaster: Broadcaster
    warnings: list[str] = field(default_factory=list)
    replay_task: asyncio.Task | None = None

    def stop_replay(self) -> None:
        if self.replay_task is not None and not self.replay_task.done():
            self.replay_task.cancel()
        self.replay_task = None


class FeedbackService:
    def __init__(
        self,
        reference_dir: Path | str,
        tick_hz: float = 30.0,
        grid_ms: float = 200.0,
        replay_speed: float = 1.0,
    ):
        self.library = ReferenceLibrary(reference_dir)
        self.tick_hz = tick_hz
        self.grid_ms = grid_ms
        self.replay_speed = replay_speed
        self.sessions: dict[str, LiveSession] = {}

    def create_session(self, manifest_path: str) -> LiveSession:
        session = load_session(manifest_path)
        required = {"emg", "audio"}
        missing = sorted(required - session.manifest.modalities)
        if missing:
            raise DatasetError(f"live sessions need modalities {missing} in the manifest")
        emg_rate = session.manifest.emg_rate_hz or session.emg().rate_hz
        audio_rate = session.manifest.audio_rate_hz or session.audio().rate_hz
        engine = FeedbackSession(
            emg_rate_hz=emg_rate,
            audio_rate_hz=audio_rate,
            tick_hz=self.tick_hz,
            grid_ms=self.grid_ms,
        )
        live = LiveSession(
            session_id=uuid.uuid4().hex[:12],
            session=session,
            engine=engine,
            broadcaster=Broadcaster(),
        )
        live.warnings.extend(session.warnings)
        self.sessions[live.session_id] = live
        return live

    # -- replay feeding ------------------------------------------------------

    def _tick_slice(self, signal, tick: int) -> SampledSignal | None:
        rate = signal.rate_hz
        a = int(math.floor(tick * rate / self.tick_hz + 1e-9))
        b = int(math.floor((tick + 1) * rate / self.tick_hz + 1e-9))
        if a >= signal.n_samples:
            return None
        return signal.slice_samples(a, min(b, signal.n_samples))

    async def _pace(self):
        if self.replay_speed > 0:
            await asyncio.sleep(1.0 / (self.tick_hz * self.replay_speed))
        else:
            await asyncio.sleep(0)

    async def replay_calibration(self, live: LiveSession) -> None:
        """Feed the MVC recording (or the session EMG) through Calibrating."""
        engine = live.engine
        source = live.session.mvc_recording()
        if source is None:
            source = live.session.emg()
            live.warnings.append("calibration replayed from the session signal itself")
        limit_s = min(engine.calibration_window_s, source.duration_s)
        n_ticks = int(math.ceil(limit_s * self.tick_hz))
        for tick in range(n_ticks):
            chunk = self._tick_slice(source, tick)
            if chunk is None:
                break
            engine.process_chunk(emg=chunk)
            await self._pace()
        if engine.calibration is None:
            engine.finish_calibration()
        live.broadcaster.publish([{"event": "calibration_ready"}])

    async def replay_practice(self, live: LiveSession) -> None:
        """Feed the session's EMG and audio tick by tick and publish frames."""
        engine = live.engine
        emg = live.session.emg()
        audio = live.session.audio()
        duration = min(emg.duration_s, audio.duration_s)
        n_ticks = int(math.ceil(duration * self.tick_hz))
        for tick in range(n_ticks):
            emg_chunk = self._tick_slice(emg, tick)
            audio_chunk = self._tick_slice(audio, tick)
            if emg_chunk is None and audio_chunk is None:
                break
            frames = engine.process_chunk(emg=emg_chunk, audio=audio_chunk)
            live.broadcaster.publish(frames)
            await self._pace()
        if engine.phase == PHASE_PRACTICING:
            engine.end_session()
            live.broadcaster.publish([{"event": "phase", "phase": engine.phase}])


def create_app(
    reference_dir: Path | str = "references",
    tick_hz: float = 30.0,
    grid_ms: float = 200.0,
    replay_speed: float = 1.0,
) -> FastAPI:
    app = FastAPI(title="vocalis feedback service")
    # Browser clients are normally served from a different origin than the
    # service (a static dev server, a file build); the API is local and
    # unauthenticated, so keep it callable from anywhere.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    service = FeedbackService(
        reference_dir=reference_dir,
        tick_hz=tick_hz,
        grid_ms=grid_ms,
        replay_speed=replay_speed,
    )
    app.state.service = service

    @app.post("/sessions")
    async def create_session(payload: dict = Body(...)):
        manifest_path = payload.get("manifest_path")
        if not manifest_path:
            return JSONResponse(
                {"error": "body must carry manifest_path"}, status_code=400
            )
        try:
            live = service.create_session(manifest_path)
        except DatasetError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        return {
            "session_id": live.session_id,
            "phase": live.engine.phase,
            "participant_id": live.session.manifest.participant_id,
            "modalities": sorted(live.session.manifest.modalities),
            "warnings": live.warnings,
        }

    @app.get("/references")
    async def list_references():
        entries = []
        for ref_id in service.library.ids():
            try:
                entries.append(service.library.describe(ref_id))
            except ReferenceError as exc:
                entries.append({"id": ref_id, "error": str(exc)})
        return {"references": entries}

    @app.get("/sessions/{session_id}/summary")
    async def session_summary(session_id: str):
        live = service.sessions.get(session_id)
        if live is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        if live.engine.phase != PHASE_REVIEW:
            return JSONResponse(
                {"error": f"summary requires the Review phase, session is {live.engine.phase}"},
                status_code=409,
            )
        return {
            "session_id": session_id,
            "phase": live.engine.phase,
            "summary": live.engine.summary().to_obj(),
            "warnings": live.warnings,
        }

    @app.websocket("/session/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        await websocket.accept()
        live = service.sessions.get(session_id)
        if live is None:
            await websocket.send_text(json.dumps({"error": "unknown session"}))
            await websocket.close(code=4404)
            return

        subscription = live.broadcaster.subscribe()

        async def pump():
            try:
                while True:
                    if subscription.dropped:
                        await websocket.close(code=1013)
                        return
                    for item in subscription.drain():
                        if isinstance(item, FeedbackFrame):
                            item = item.to_json_obj()
                        await websocket.send_text(json.dumps(item))
                    await asyncio.sleep(0.01)
            except Exception:
                return

        sender = asyncio.create_task(pump())
        try:
            while True:
                message = await websocket.receive_text()
                try:
                    command = json.loads(message)
                    if not isinstance(command, dict):
                        raise ValueError("expected a JSON object")
                except ValueError as exc:
                    await websocket.send_text(
                        json.dumps({"error": f"bad command: {exc}"})
                    )
                    continue
                try:
                    await _handle_command(service, live, command, websocket)
                except (EngineError, ReferenceError, CalibrationError, ValueError) as exc:
                    await websocket.send_text(json.dumps({"error": str(exc)}))
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            subscription.close()

    return app


async def _handle_command(
    service: FeedbackService, live: LiveSession, command: dict, websocket: WebSocket
) -> None:
    cmd = command.get("cmd")
    engine = live.engine
    if cmd == "start_calibration":
        engine.start_calibration()
        live.replay_task = asyncio.create_task(service.replay_calibration(live))
        await websocket.send_text(
            json.dumps(
                {
                    "event": "phase",
                    "phase": engine.phase,
                    "calibration_window_s": engine.calibration_window_s,
                }
            )
        )
    elif cmd == "start_practice":
        reference_id = command.get("reference")
        if not reference_id:
            raise EngineError("start_practice requires a reference id")
        trace = service.library.get(reference_id)
        schedule = None
        schedule_id = command.get("schedule")
        if schedule_id and schedule_id != reference_id:
            schedule = service.library.get(schedule_id).schedule
        live.stop_replay()
        if engine.calibration is None and engine.phase == PHASE_CALIBRATING:
            engine.finish_calibration()
        engine.start_practice(trace, schedule)
        learner_gender = live.session.manifest.gender
        if trace.gender and learner_gender and trace.gender != learner_gender:
            warning = (
                f"reference voice is {trace.gender}, learner manifest says "
                f"{learner_gender}; expect register differences"
            )
            live.warnings.append(warning)
            await websocket.send_text(json.dumps({"warning": warning}))
        live.replay_task = asyncio.create_task(service.replay_practice(live))
        await websocket.send_text(json.dumps({"event": "phase", "phase": engine.phase}))
    elif cmd == "end":
        live.stop_replay()
        if engine.phase == PHASE_PRACTICING:
            engine.end_session()
        await websocket.send_text(json.dumps({"event": "phase", "phase": engine.phase}))
    else:
        raise EngineError(f"unknown command {cmd!r}")
