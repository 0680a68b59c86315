"""HTTP and WebSocket surface of the feedback service.

All replays run at speed 0 (no pacing sleeps), so the full session flow
completes in well under a second of wall time.
"""
import json

import pytest
from fastapi.testclient import TestClient
from starlette.testclient import WebSocketDisconnect

from vocalis.dataset import load_session
from vocalis.feedback.reference import ReferenceError, build_reference
from vocalis.feedback.service import ReferenceLibrary, create_app

from conftest import write_session


@pytest.fixture(scope="module")
def env(tmp_path_factory):
    """Reference library with one trace, plus a learner session manifest."""
    root = tmp_path_factory.mktemp("svc")
    refs = root / "refs"
    refs.mkdir()

    expert_manifest = write_session(root / "expert", name="e01", gender="female")
    trace = build_reference(load_session(expert_manifest), session_id="e01")
    trace.save(refs / "scale_a.json")

    learner_manifest = write_session(root / "learner", name="l01", gender="male")
    return {"refs": refs, "learner": learner_manifest, "trace": trace}


@pytest.fixture(scope="module")
def client(env):
    app = create_app(reference_dir=env["refs"], replay_speed=0.0)
    with TestClient(app) as tc:
        yield tc


def make_session(client, env) -> str:
    resp = client.post("/sessions", json={"manifest_path": str(env["learner"])})
    assert resp.status_code == 200
    return resp.json()["session_id"]


def collect_until(ws, predicate, cap: int = 2000) -> list[dict]:
    """Receive messages until one satisfies predicate; returns all of them."""
    out = []
    for _ in range(cap):
        msg = json.loads(ws.receive_text())
        out.append(msg)
        if predicate(msg):
            return out
    raise AssertionError(f"no matching message in {cap} received; last: {out[-3:]}")


# ---------------------------------------------------------------------------
# REST endpoints
# ---------------------------------------------------------------------------


class TestRest:
    def test_reference_listing(self, client, env):
        resp = client.get("/references")
        assert resp.status_code == 200
        entries = resp.json()["references"]
        assert [e["id"] for e in entries] == ["scale_a"]
        entry = entries[0]
        assert entry["n_bins"] == 20
        assert entry["duration_s"] == pytest.approx(4.0)
        assert entry["pitches"] == ["A3", "C4"]
        assert entry["gender"] == "female"
        assert entry["participant_id"] == "p01"

    def test_empty_reference_dir(self, tmp_path):
        app = create_app(reference_dir=tmp_path / "nothing")
        with TestClient(app) as tc:
            assert tc.get("/references").json() == {"references": []}

    def test_cross_origin_requests_allowed(self, client, env):
        resp = client.get("/references", headers={"Origin": "http://localhost:5173"})
        assert resp.headers["access-control-allow-origin"] == "*"
        preflight = client.options(
            "/sessions",
            headers={
                "Origin": "http://localhost:5173",
                "Access-Control-Request-Method": "POST",
            },
        )
        assert preflight.status_code == 200

    def test_corrupt_reference_reported_per_entry(self, tmp_path, env):
        refs = tmp_path / "refs"
        refs.mkdir()
        env["trace"].save(refs / "good.json")
        (refs / "broken.json").write_text("{oops")
        app = create_app(reference_dir=refs)
        with TestClient(app) as tc:
            entries = tc.get("/references").json()["references"]
        by_id = {e["id"]: e for e in entries}
        assert "error" in by_id["broken"]
        assert by_id["good"]["n_bins"] == 20

    def test_create_session(self, client, env):
        resp = client.post("/sessions", json={"manifest_path": str(env["learner"])})
        assert resp.status_code == 200
        body = resp.json()
        assert body["phase"] == "Idle"
        assert body["participant_id"] == "p01"
        assert body["modalities"] == ["audio", "emg"]
        assert len(body["session_id"]) == 12

    def test_create_session_needs_path(self, client):
        resp = client.post("/sessions", json={})
        assert resp.status_code == 400
        assert "manifest_path" in resp.json()["error"]

    def test_create_session_bad_manifest(self, client, tmp_path):
        resp = client.post(
            "/sessions", json={"manifest_path": str(tmp_path / "absent.json")}
        )
        assert resp.status_code == 400

    def test_create_session_missing_modality(self, client, tmp_path):
        manifest = write_session(tmp_path / "nomic", name="n01")
        obj = json.loads(manifest.read_text())
        obj["modalities"] = ["emg"]
        manifest.write_text(json.dumps(obj))
        resp = client.post("/sessions", json={"manifest_path": str(manifest)})
        assert resp.status_code == 400
        assert "audio" in resp.json()["error"]

    def test_summary_unknown_session(self, client):
        resp = client.get("/sessions/doesnotexist/summary")
        assert resp.status_code == 404

    def test_summary_wrong_phase(self, client, env):
        sid = make_session(client, env)
        resp = client.get(f"/sessions/{sid}/summary")
        assert resp.status_code == 409
        assert "Review" in resp.json()["error"]


# ---------------------------------------------------------------------------
# WebSocket control flow
# ---------------------------------------------------------------------------


class TestWebSocket:
    def test_unknown_session_closed(self, client):
        with client.websocket_connect("/session/nope/stream") as ws:
            msg = json.loads(ws.receive_text())
            assert msg == {"error": "unknown session"}
            with pytest.raises(WebSocketDisconnect) as exc_info:
                ws.receive_text()
            assert exc_info.value.code == 4404

    def test_unknown_command(self, client, env):
        sid = make_session(client, env)
        with client.websocket_connect(f"/session/{sid}/stream") as ws:
            ws.send_text(json.dumps({"cmd": "bogus"}))
            msg = json.loads(ws.receive_text())
            assert "unknown command" in msg["error"]

    def test_practice_requires_reference_id(self, client, env):
        sid = make_session(client, env)
        with client.websocket_connect(f"/session/{sid}/stream") as ws:
            ws.send_text(json.dumps({"cmd": "start_practice"}))
            msg = json.loads(ws.receive_text())
            assert "reference id" in msg["error"]

    def test_unknown_reference(self, client, env):
        sid = make_session(client, env)
        with client.websocket_connect(f"/session/{sid}/stream") as ws:
            ws.send_text(json.dumps({"cmd": "start_practice", "reference": "nope"}))
            msg = json.loads(ws.receive_text())
            assert "unknown reference" in msg["error"]

    def test_practice_before_calibration(self, client, env):
        sid = make_session(client, env)
        with client.websocket_connect(f"/session/{sid}/stream") as ws:
            ws.send_text(json.dumps({"cmd": "start_practice", "reference": "scale_a"}))
            msg = json.loads(ws.receive_text())
            assert "Idle" in msg["error"]

    def test_end_during_calibration_reports_phase(self, client, env):
        sid = make_session(client, env)
        with client.websocket_connect(f"/session/{sid}/stream") as ws:
            ws.send_text(json.dumps({"cmd": "start_calibration"}))
            collect_until(
                ws, lambda m: m.get("event") == "phase" and m["phase"] == "Calibrating"
            )
            ws.send_text(json.dumps({"cmd": "end"}))
            msgs = collect_until(ws, lambda m: m.get("event") == "phase")
            assert msgs[-1]["phase"] in ("Calibrating",)

    def test_full_replay_flow(self, client, env):
        sid = make_session(client, env)
        with client.websocket_connect(f"/session/{sid}/stream") as ws:
            ws.send_text(json.dumps({"cmd": "start_calibration"}))
            msgs = collect_until(ws, lambda m: m.get("event") == "calibration_ready")
            phase_events = [m for m in msgs if m.get("event") == "phase"]
            assert phase_events[0]["phase"] == "Calibrating"
            assert phase_events[0]["calibration_window_s"] == 35.0

            ws.send_text(json.dumps({"cmd": "start_practice", "reference": "scale_a"}))
            msgs = collect_until(
                ws, lambda m: m.get("event") == "phase" and m["phase"] == "Review"
            )

        # the reference voice is female, the learner manifest says male
        warnings = [m["warning"] for m in msgs if "warning" in m]
        assert any("register differences" in w for w in warnings)
        assert any(
            m.get("event") == "phase" and m["phase"] == "Practicing" for m in msgs
        )

        frames = [m for m in msgs if "t_s" in m]
        assert len(frames) == 121  # 4 s at 30 ticks/s, inclusive final tick
        assert frames[0]["t_s"] == 0.0
        assert frames[0]["phase"] == "Practicing"
        times = [f["t_s"] for f in frames]
        assert times == sorted(times)

        with_deviation = [f for f in frames if "deviation" in f]
        assert len(with_deviation) == 115  # first 6 ticks precede a full bin
        # learner audio and EMG are the same synthetic take the reference
        # was built from, so the deviation should vanish
        for f in with_deviation:
            assert abs(f["deviation"]["rms_delta"]) < 1e-9
            assert abs(f["deviation"]["spr_delta"]) < 1e-9
        assert with_deviation[0]["target_pitch"] == "A3"
        assert "learner" in with_deviation[0] and "expert" in with_deviation[0]

        resp = client.get(f"/sessions/{sid}/summary")
        assert resp.status_code == 200
        body = resp.json()
        assert body["phase"] == "Review"
        assert body["summary"]["n_bins"] == 20
        assert [p["pitch"] for p in body["summary"]["per_pitch"]] == ["A3", "C4"]
        assert any("register differences" in w for w in body["warnings"])


# ---------------------------------------------------------------------------
# Reference library unit behavior
# ---------------------------------------------------------------------------


class TestReferenceLibrary:
    def test_ids_sorted(self, tmp_path, env):
        lib_dir = tmp_path / "lib"
        lib_dir.mkdir()
        env["trace"].save(lib_dir / "zeta.json")
        env["trace"].save(lib_dir / "alpha.json")
        lib = ReferenceLibrary(lib_dir)
        assert lib.ids() == ["alpha", "zeta"]

    def test_unknown_reference_raises(self, tmp_path):
        lib = ReferenceLibrary(tmp_path)
        with pytest.raises(ReferenceError, match="unknown reference"):
            lib.get("ghost")

    def test_cache_invalidated_on_rewrite(self, tmp_path, env):
        import os

        lib_dir = tmp_path / "lib"
        lib_dir.mkdir()
        path = lib_dir / "r.json"
        env["trace"].save(path)
        lib = ReferenceLibrary(lib_dir)
        first = lib.get("r")
        assert lib.get("r") is first  # cached by mtime
        env["trace"].save(path)
        os.utime(path, (path.stat().st_atime, path.stat().st_mtime + 5))
        assert lib.get("r") is not first

    def test_missing_dir_lists_nothing(self, tmp_path):
        assert ReferenceLibrary(tmp_path / "void").ids() == []
