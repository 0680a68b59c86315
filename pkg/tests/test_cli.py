"""End-to-end CLI behavior, run in-process through main().

Exit codes: 0 success, 1 input error, 2 computation error. Diagnostics
are JSON lines on stderr.
"""
import csv
import json
import shutil
import subprocess

import numpy as np
import pytest

from vocalis.cli import build_parser, cmd_serve, main
from vocalis.feedback.reference import ReferenceTrace
from vocalis.signals import SampledSignal

from conftest import AUDIO_RATE, EMG_RATE, make_emg, write_session


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    diags = [json.loads(line) for line in captured.err.splitlines() if line.strip()]
    return code, captured.out, diags


@pytest.fixture(scope="module")
def analyzed(tmp_path_factory):
    """One analyzed session: manifest plus the analyze output directory."""
    root = tmp_path_factory.mktemp("cli")
    manifest = write_session(root / "sess", with_landmarks=True)
    out_dir = root / "out"
    code = main(["analyze", str(manifest), "--out-dir", str(out_dir)])
    assert code == 0
    return manifest, out_dir


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


class TestAnalyze:
    def test_writes_three_files(self, analyzed):
        _, out_dir = analyzed
        assert (out_dir / "s01.features.csv").exists()
        assert (out_dir / "s01.series.csv").exists()
        assert (out_dir / "s01.summary.json").exists()

    def test_feature_rows_cover_all_metrics(self, analyzed):
        _, out_dir = analyzed
        rows = read_rows(out_dir / "s01.features.csv")
        got = {(r["pitch"], r["metric"]) for r in rows}
        assert got == {
            (pitch, metric)
            for pitch in ("A3", "C4")
            for metric in ("stability", "length", "rms", "spr")
        }
        assert all(r["participant"] == "p01" for r in rows)
        for r in rows:
            float(r["value"])  # parses

    def test_length_values_match_fixture_geometry(self, analyzed):
        _, out_dir = analyzed
        rows = read_rows(out_dir / "s01.features.csv")
        lengths = [float(r["value"]) for r in rows if r["metric"] == "length"]
        assert lengths == pytest.approx([5.0, 5.0])

    def test_series_kinds(self, analyzed):
        _, out_dir = analyzed
        rows = read_rows(out_dir / "s01.series.csv")
        kinds = {r["series"] for r in rows}
        assert kinds == {"rms_norm", "spr_frame"}
        rms_rows = [r for r in rows if r["series"] == "rms_norm"]
        assert len(rms_rows) == 20  # 4 s of 200 ms windows

    def test_summary_content(self, analyzed):
        _, out_dir = analyzed
        summary = json.loads((out_dir / "s01.summary.json").read_text())
        assert summary["participant_id"] == "p01"
        assert summary["skill_level"] == "novice"
        assert summary["modalities"] == ["audio", "emg", "ultrasound"]
        assert [p["pitch"] for p in summary["pitches"]] == ["A3", "C4"]
        for p in summary["pitches"]:
            assert "stability_db" in p and "spr_db" in p and "rms_norm_mean" in p
            assert p["length_mean"] == pytest.approx(5.0)
        assert summary["calibration"]["mvc_amplitude"] > 0

    def test_metric_subset(self, tmp_path, capsys):
        manifest = write_session(tmp_path / "s", name="sub")
        out_dir = tmp_path / "out"
        code, _, _ = run_cli(
            ["analyze", str(manifest), "--out-dir", str(out_dir), "--metrics", "spr"],
            capsys,
        )
        assert code == 0
        rows = read_rows(out_dir / "sub.features.csv")
        assert {r["metric"] for r in rows} == {"spr"}

    def test_unknown_metric_rejected(self, tmp_path, capsys):
        manifest = write_session(tmp_path / "s", name="s02")
        code, _, diags = run_cli(
            ["analyze", str(manifest), "--out-dir", str(tmp_path / "o"),
             "--metrics", "sparkle"],
            capsys,
        )
        assert code == 1
        assert any("sparkle" in d["message"] for d in diags)

    def test_bad_manifest_does_not_stop_good_one(self, tmp_path, capsys):
        good = write_session(tmp_path / "s", name="good")
        code, out, diags = run_cli(
            ["analyze", str(tmp_path / "missing.json"), str(good),
             "--out-dir", str(tmp_path / "o")],
            capsys,
        )
        assert code == 1  # at least one failure
        assert (tmp_path / "o" / "good.features.csv").exists()
        assert any(d["level"] == "error" for d in diags)

    def test_missing_out_dir_flag(self, tmp_path, capsys):
        code, _, diags = run_cli(["analyze", str(tmp_path / "x.json")], capsys)
        assert code == 1
        assert any(d["kind"] == "usage" for d in diags)

    def test_equal_manifest_names_do_not_clobber(self, tmp_path, capsys):
        first = write_session(tmp_path / "a", name="manifest", participant_id="pa")
        second = write_session(tmp_path / "b", name="manifest", participant_id="pb")
        out_dir = tmp_path / "o"
        code, _, _ = run_cli(
            ["analyze", str(first), str(second), "--out-dir", str(out_dir),
             "--metrics", "spr"],
            capsys,
        )
        assert code == 0
        participants = set()
        for path in out_dir.glob("*.features.csv"):
            participants |= {r["participant"] for r in read_rows(path)}
        assert participants == {"pa", "pb"}


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def write_phase_dir(directory, phase_shift_c4: bool):
    """Feature CSVs for 8 participants, pitches A3 and C4."""
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(8):
        pid = f"p{i:02d}"
        base_a3 = 10.0 + 0.3 * i
        base_c4 = 12.0 + 0.25 * i
        a3 = base_a3
        c4 = base_c4
        if phase_shift_c4:
            # distinct magnitudes, all positive: tie-free improvement
            c4 = base_c4 + 0.4 + 0.001 * i
            a3 = base_a3 + (0.01 + 0.001 * i) * (1 if i % 2 else -1)
        rows = [(pid, "A3", "stability", a3), (pid, "C4", "stability", c4)]
        path = directory / f"{pid}.features.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["participant", "pitch", "metric", "value"])
            for row in rows:
                writer.writerow([row[0], row[1], row[2], repr(row[3])])


class TestCompare:
    @pytest.fixture()
    def phase_dirs(self, tmp_path):
        pre = tmp_path / "pre"
        post = tmp_path / "post"
        write_phase_dir(pre, phase_shift_c4=False)
        write_phase_dir(post, phase_shift_c4=True)
        return pre, post

    def test_detects_shifted_pitch(self, phase_dirs, tmp_path, capsys):
        pre, post = phase_dirs
        out = tmp_path / "compare.json"
        code, stdout, _ = run_cli(
            ["compare", str(pre), str(post), "--metric", "stability",
             "--out", str(out)],
            capsys,
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["test"] == "wilcoxon_signed_rank"
        by_pitch = {r["pitch"]: r for r in report["pitches"]}
        c4 = by_pitch["C4"]
        assert c4["n_pairs"] == 8
        assert c4["method"] == "exact"
        assert c4["p_raw"] == pytest.approx(2.0 / 256.0)
        assert c4["p_fdr"] <= 0.05
        assert c4["r_rb"] == 1.0
        a3 = by_pitch["A3"]
        assert a3["p_raw"] > 0.5
        assert str(out) in stdout
        # CSV twin
        csv_rows = read_rows(out.with_suffix(".csv"))
        assert {r["pitch"] for r in csv_rows} == {"A3", "C4"}

    def test_unmatched_participant_excluded(self, phase_dirs, tmp_path, capsys):
        pre, post = phase_dirs
        extra = pre / "p99.features.csv"
        with extra.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["participant", "pitch", "metric", "value"])
            writer.writerow(["p99", "C4", "stability", "11.0"])
        out = tmp_path / "c.json"
        code, _, diags = run_cli(
            ["compare", str(pre), str(post), "--out", str(out)], capsys
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["unmatched_participants"] == ["p99"]
        assert any(d["kind"] == "unmatched_participant" for d in diags)
        by_pitch = {r["pitch"]: r for r in report["pitches"]}
        # the stray participant has no post value: excluded pairwise
        assert by_pitch["C4"]["n_pairs"] == 8
        assert by_pitch["C4"]["n_excluded"] == 1

    def test_explicit_pitch_family(self, phase_dirs, tmp_path, capsys):
        pre, post = phase_dirs
        out = tmp_path / "c4only.json"
        code, _, _ = run_cli(
            ["compare", str(pre), str(post), "--pitches", "C4", "--out", str(out)],
            capsys,
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert [r["pitch"] for r in report["pitches"]] == ["C4"]
        only = report["pitches"][0]
        assert only["p_fdr"] == only["p_raw"]  # family of one

    def test_empty_dir_is_input_error(self, tmp_path, capsys):
        (tmp_path / "pre").mkdir()
        (tmp_path / "post").mkdir()
        code, _, diags = run_cli(
            ["compare", str(tmp_path / "pre"), str(tmp_path / "post"),
             "--out", str(tmp_path / "c.json")],
            capsys,
        )
        assert code == 1
        assert any("features.csv" in d["message"] for d in diags)


# ---------------------------------------------------------------------------
# correlate
# ---------------------------------------------------------------------------


class TestCorrelate:
    def test_opposed_ramps_anticorrelate(self, tmp_path, capsys):
        rate = AUDIO_RATE
        n = int(4.0 * rate)
        t = np.arange(n) / rate
        low = (0.1 + 0.5 * t / 4.0) * np.sin(2 * np.pi * 700.0 * t)
        high = (0.6 - 0.5 * t / 4.0) * np.sin(2 * np.pi * 3000.0 * t)
        audio = SampledSignal(low + high, rate)

        rng = np.random.default_rng(21)
        m = int(4.0 * EMG_RATE)
        ramp = 0.2 + 0.8 * np.arange(m) / m
        emg = SampledSignal(
            np.stack([ramp * rng.standard_normal(m) for _ in range(2)]), EMG_RATE
        )

        manifest = write_session(tmp_path / "s", name="ramp", emg=emg, audio=audio)
        out = tmp_path / "corr.json"
        code, stdout, _ = run_cli(
            ["correlate", str(manifest), "--out", str(out)], capsys
        )
        assert code == 0
        report = json.loads(out.read_text())["sessions"][0]
        assert report["participant_id"] == "p01"
        assert report["n_bins"] >= 15
        assert report["overall"]["r"] < -0.8
        assert 0.0 <= report["overall"]["p"] <= 1.0
        pitches = {e["pitch"]: e for e in report["per_note"]}
        assert set(pitches) == {"A3", "C4"}
        for entry in pitches.values():
            assert entry["n"] >= 3
            assert "r" in entry

    def test_missing_manifest_is_input_error(self, tmp_path, capsys):
        code, _, diags = run_cli(
            ["correlate", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o.json")],
            capsys,
        )
        assert code == 1
        assert diags and diags[-1]["level"] == "error"


# ---------------------------------------------------------------------------
# pca
# ---------------------------------------------------------------------------


def write_feature_matrix(path, rows, header=("participant", "a", "b")):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


class TestPca:
    def test_rank_one_structure(self, tmp_path, capsys):
        path = tmp_path / "feat.csv"
        values = [0.5, 1.5, 2.5, 3.0, 4.5, 5.25]
        write_feature_matrix(
            path, [[f"p{i}", repr(v), repr(2.0 * v)] for i, v in enumerate(values)]
        )
        out = tmp_path / "pca.json"
        code, stdout, _ = run_cli(["pca", str(path), "--out", str(out)], capsys)
        assert code == 0
        report = json.loads(out.read_text())
        assert report["columns"] == ["a", "b"]  # participant is not numeric
        assert report["n_observations"] == 6
        assert report["standardized"] is True
        assert report["explained_variance_ratio"][0] > 0.999999
        assert report["top2_ratio_sum"] == pytest.approx(1.0)
        assert len(report["scores"]) == 6
        assert len(report["components"]) == 2

    def test_explicit_columns_checked(self, tmp_path, capsys):
        path = tmp_path / "feat.csv"
        write_feature_matrix(path, [["p0", "1.0", "2.0"], ["p1", "2.0", "3.0"]])
        code, _, diags = run_cli(
            ["pca", str(path), "--columns", "a,zzz", "--out", str(tmp_path / "o.json")],
            capsys,
        )
        assert code == 1
        assert any("zzz" in d["message"] for d in diags)

    def test_header_only_file_rejected(self, tmp_path, capsys):
        path = tmp_path / "feat.csv"
        write_feature_matrix(path, [])
        code, _, diags = run_cli(
            ["pca", str(path), "--out", str(tmp_path / "o.json")], capsys
        )
        assert code == 1
        assert any("no rows" in d["message"] for d in diags)

    def test_constant_column_is_compute_error(self, tmp_path, capsys):
        path = tmp_path / "feat.csv"
        write_feature_matrix(
            path, [[f"p{i}", repr(float(i)), "7.0"] for i in range(5)]
        )
        code, _, diags = run_cli(
            ["pca", str(path), "--out", str(tmp_path / "o.json")], capsys
        )
        assert code == 2
        assert diags and diags[-1]["level"] == "error"

    def test_no_standardize_flag(self, tmp_path, capsys):
        path = tmp_path / "feat.csv"
        write_feature_matrix(
            path, [[f"p{i}", repr(float(i)), repr(10.0 - i)] for i in range(5)]
        )
        out = tmp_path / "o.json"
        code, _, _ = run_cli(
            ["pca", str(path), "--no-standardize", "--out", str(out)], capsys
        )
        assert code == 0
        assert json.loads(out.read_text())["standardized"] is False


# ---------------------------------------------------------------------------
# build-reference and config resolution
# ---------------------------------------------------------------------------


class TestBuildReference:
    def test_builds_loadable_trace(self, tmp_path, capsys):
        manifest = write_session(tmp_path / "s")
        out = tmp_path / "ref.json"
        code, stdout, _ = run_cli(
            ["build-reference", str(manifest), "--out", str(out)], capsys
        )
        assert code == 0
        assert str(out) in stdout
        trace = ReferenceTrace.load(out)
        assert trace.n_bins == 20
        assert trace.session_id == "s01"  # manifest stem by default
        assert trace.grid_ms == 200.0

    def test_session_id_flag(self, tmp_path, capsys):
        manifest = write_session(tmp_path / "s")
        out = tmp_path / "ref.json"
        code, _, _ = run_cli(
            ["build-reference", str(manifest), "--out", str(out),
             "--session-id", "golden"],
            capsys,
        )
        assert code == 0
        assert ReferenceTrace.load(out).session_id == "golden"

    def test_grid_from_config_file(self, tmp_path, capsys):
        manifest = write_session(tmp_path / "s")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"grid_ms": 100.0}))
        out = tmp_path / "ref.json"
        code, _, _ = run_cli(
            ["build-reference", str(manifest), "--out", str(out),
             "--config", str(cfg)],
            capsys,
        )
        assert code == 0
        trace = ReferenceTrace.load(out)
        assert trace.grid_ms == 100.0
        assert trace.n_bins == 40

    def test_flag_beats_config_file(self, tmp_path, capsys):
        manifest = write_session(tmp_path / "s")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"grid_ms": 100.0}))
        out = tmp_path / "ref.json"
        code, _, _ = run_cli(
            ["build-reference", str(manifest), "--out", str(out),
             "--config", str(cfg), "--grid-ms", "400"],
            capsys,
        )
        assert code == 0
        assert ReferenceTrace.load(out).grid_ms == 400.0

    def test_config_from_environment(self, tmp_path, capsys, monkeypatch):
        manifest = write_session(tmp_path / "s")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"grid_ms": 100.0}))
        monkeypatch.setenv("VOCALIS_CONFIG", str(cfg))
        out = tmp_path / "ref.json"
        code, _, _ = run_cli(
            ["build-reference", str(manifest), "--out", str(out)], capsys
        )
        assert code == 0
        assert ReferenceTrace.load(out).grid_ms == 100.0

    def test_unknown_config_key(self, tmp_path, capsys):
        manifest = write_session(tmp_path / "s")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"grid_milliseconds": 100.0}))
        code, _, diags = run_cli(
            ["build-reference", str(manifest), "--out", str(tmp_path / "r.json"),
             "--config", str(cfg)],
            capsys,
        )
        assert code == 1
        assert any("grid_milliseconds" in d["message"] for d in diags)

    def test_config_file_not_found(self, tmp_path, capsys):
        manifest = write_session(tmp_path / "s")
        code, _, diags = run_cli(
            ["build-reference", str(manifest), "--out", str(tmp_path / "r.json"),
             "--config", str(tmp_path / "ghost.json")],
            capsys,
        )
        assert code == 1

    def test_bad_config_value(self, tmp_path, capsys):
        manifest = write_session(tmp_path / "s")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"grid_ms": "wide"}))
        code, _, diags = run_cli(
            ["build-reference", str(manifest), "--out", str(tmp_path / "r.json"),
             "--config", str(cfg)],
            capsys,
        )
        assert code == 1
        assert any("grid_ms" in d["message"] for d in diags)


# ---------------------------------------------------------------------------
# parser plumbing
# ---------------------------------------------------------------------------


class TestParser:
    def test_unknown_command_is_input_error(self, capsys):
        code, _, diags = run_cli(["transmogrify"], capsys)
        assert code == 1
        assert any(d["kind"] == "usage" for d in diags)

    def test_serve_flags_parse(self):
        args = build_parser().parse_args(
            ["serve", "--port", "9001", "--reference-dir", "refs", "--replay-speed", "0"]
        )
        assert args.func is cmd_serve
        assert args.port == 9001
        assert args.replay_speed == 0.0

    def test_console_script_installed(self):
        script = shutil.which("vocalis")
        if script is None:
            pytest.skip("package not installed with console scripts")
        proc = subprocess.run(
            [script, "pca", "--help"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "--no-standardize" in proc.stdout
