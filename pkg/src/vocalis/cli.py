"""Command-line interface.

Verbs: analyze, compare, correlate, pca, build-reference, serve.
Exit codes: 0 success, 1 input error, 2 computation error. Diagnostics
go to stderr as JSON lines; result files land where --out/--out-dir
points. Every flag has a twin key in the JSON config file (--config or
$VOCALIS_CONFIG); flags win over the file.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset, emg, envelope, geometry, signals, spectral, stats
from .config import ConfigError, ToolConfig, apply_overrides, load_config
from .dataset import DatasetError, FeatureRow, FeatureTable, Session, load_session
from .feedback.reference import ReferenceError, build_reference, derive_calibration
from .grid import overlap, resample_to_grid
from .notes import PitchError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_COMPUTE = 2

_INPUT_ERRORS = (DatasetError, ConfigError, PitchError, FileNotFoundError, OSError)
_COMPUTE_ERRORS = (
    stats.StatsError,
    signals.SignalError,
    emg.CalibrationError,
    geometry.LandmarkError,
    ReferenceError,
    ValueError,
)

ANALYZE_METRICS = ("stability", "length", "rms", "spr")


class CliInputError(Exception):
    pass


def diag(level: str, kind: str, message: str, **extra) -> None:
    record = {"level": level, "kind": kind, "message": message}
    record.update(extra)
    print(json.dumps(record), file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as input errors (exit 1)."""

    def error(self, message):  # noqa: A003 - argparse API
        raise CliInputError(message)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _pitch_stability(session: Session) -> list[tuple[str, float]]:
    """Whole-segment envelope stability per scheduled pitch."""
    sig = session.emg()
    segmented = dataset.segment_by_pitch(sig, session.events)
    for ev, why in segmented.skipped:
        diag("warning", "segmentation", why)
    rows = []
    for seg in segmented.segments:
        smoothed = signals.moving_average(seg.signal, 10.0)
        channel_envs = [
            envelope.hilbert_envelope(
                signals.SampledSignal(smoothed.data[ch], smoothed.rate_hz)
            ).values
            for ch in range(smoothed.channel_count)
        ]
        env = envelope.Envelope(
            np.mean(channel_envs, axis=0), smoothed.rate_hz, envelope.DEFAULT_TRIM_FRACTION
        )
        rows.append((seg.label.spn, envelope.stability(env).s))
    return rows


def _pitch_lengths(session: Session) -> list[geometry.PitchLengthStats]:
    by_pitch: dict[str, list[geometry.LengthMeasurement]] = {}
    for record in session.landmarks():
        if record.pitch is None:
            continue
        measurement = geometry.vocal_cord_length(record.landmarks)
        by_pitch.setdefault(record.pitch, []).append(measurement)
    return geometry.per_pitch_lengths(by_pitch)


def _pitch_spr(session: Session) -> tuple[list[tuple[str, float]], list[tuple[str, float, float]]]:
    """Per-pitch segment SPR plus the per-frame series (pitch, t, value)."""
    audio = session.audio()
    segmented = dataset.segment_by_pitch(audio, session.events)
    per_pitch = []
    series = []
    for seg in segmented.segments:
        filtered = signals.band_pass(seg.signal)
        spec = spectral.stft_magnitude(filtered)
        result = spectral.spr(spec)
        per_pitch.append((seg.label.spn, result.segment_db))
        t0 = seg.signal.origin_s
        for f, value in enumerate(result.values):
            series.append((seg.label.spn, t0 + spec.frame_time_s(f), float(value)))
    return per_pitch, series


def _rms_series(session: Session, window_ms: float) -> tuple[emg.RmsSeries, emg.MvcCalibration]:
    cal, warnings = derive_calibration(session)
    for w in warnings:
        diag("warning", "calibration", w)
    series = emg.rms_windows(session.emg(), window_ms=window_ms)
    return emg.normalize_mvc(series, cal), cal


def analyze_session(session: Session, config: ToolConfig, metrics: tuple[str, ...]):
    """Returns (feature_rows, series_rows, summary_obj) for one session."""
    manifest = session.manifest
    participant = manifest.participant_id
    available = manifest.modalities
    feature_rows: list[tuple[str, str, str, float]] = []
    series_rows: list[tuple[str, str, str, float, float]] = []
    pitch_info: dict[str, dict] = {}

    def info(pitch: str) -> dict:
        return pitch_info.setdefault(pitch, {"pitch": pitch})

    cal = None
    if "stability" in metrics and "emg" in available:
        for pitch, value in _pitch_stability(session):
            feature_rows.append((participant, pitch, "stability", value))
            info(pitch)["stability_db"] = value
    if "length" in metrics and "ultrasound" in available:
        for st in _pitch_lengths(session):
            feature_rows.append((participant, st.pitch_label, "length", st.mean))
            entry = info(st.pitch_label)
            entry["length_mean"] = st.mean
            entry["length_sd"] = st.sd
            entry["length_count"] = st.count
            entry["length_underannotated"] = st.underannotated
    if "spr" in metrics and "audio" in available:
        per_pitch, frames = _pitch_spr(session)
        for pitch, value in per_pitch:
            feature_rows.append((participant, pitch, "spr", value))
            info(pitch)["spr_db"] = value
        for pitch, t_s, value in frames:
            series_rows.append((participant, "spr_frame", pitch, t_s, value))
    if "rms" in metrics and "emg" in available:
        series, cal = _rms_series(session, config.window_ms)
        hop_s = series.hop_ms / 1000.0
        win_s = series.window_ms / 1000.0
        times = [i * hop_s for i in range(len(series.values))]
        for t_s, value in zip(times, series.values):
            series_rows.append((participant, "rms_norm", "", t_s, float(value)))
        slack = 1e-9
        for ev in session.events:
            inside = [
                v
                for t, v in zip(times, series.values)
                if ev.start_s - slack <= t and t + win_s <= ev.end_s + slack
            ]
            if inside:
                value = float(np.mean(inside))
                feature_rows.append((participant, ev.label.spn, "rms", value))
                info(ev.label.spn)["rms_norm_mean"] = value

    summary = {
        "participant_id": participant,
        "skill_level": manifest.skill_level,
        "modalities": sorted(available),
        "metrics": sorted(metrics),
        "pitches": [pitch_info[k] for k in sorted(pitch_info)],
        "warnings": list(session.warnings),
    }
    if cal is not None:
        summary["calibration"] = {
            "mvc_amplitude": cal.mvc_amplitude,
            "baseline_noise": cal.baseline_noise,
        }
    return feature_rows, series_rows, summary


def _output_stem(path: Path, used: set[str]) -> str:
    """Pick an output stem unique within this invocation.

    Sessions routinely live in per-participant directories with identical
    manifest filenames, so a bare ``path.stem`` would let a later session
    overwrite an earlier one. Prefix parent directory names (innermost
    first) until the stem is distinct.
    """
    parts = path.resolve().parts
    stem = path.stem
    depth = 2
    while stem in used and depth < len(parts):
        stem = ".".join(parts[-depth:-1] + (path.stem,))
        depth += 1
    base, n = stem, 2
    while stem in used:
        stem = f"{base}-{n}"
        n += 1
    used.add(stem)
    return stem


def cmd_analyze(args, config: ToolConfig) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = tuple(args.metrics.split(",")) if args.metrics else ANALYZE_METRICS
    unknown = sorted(set(metrics) - set(ANALYZE_METRICS))
    if unknown:
        raise CliInputError(f"unknown metrics {unknown}; allowed: {list(ANALYZE_METRICS)}")

    failures = 0
    used_stems: set[str] = set()
    for manifest_path in args.manifests:
        stem = _output_stem(Path(manifest_path), used_stems)
        try:
            session = load_session(manifest_path)
            feature_rows, series_rows, summary = analyze_session(session, config, metrics)
        except _INPUT_ERRORS as exc:
            diag("error", type(exc).__name__, str(exc), file=str(manifest_path))
            failures += 1
            continue
        features_path = out_dir / f"{stem}.features.csv"
        with features_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["participant", "pitch", "metric", "value"])
            for row in sorted(feature_rows):
                writer.writerow([row[0], row[1], row[2], repr(row[3])])
        series_path = out_dir / f"{stem}.series.csv"
        with series_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["participant", "series", "pitch", "t_s", "value"])
            for row in sorted(series_rows):
                writer.writerow([row[0], row[1], row[2], repr(row[3]), repr(row[4])])
        summary_path = out_dir / f"{stem}.summary.json"
        summary_path.write_text(json.dumps(summary, indent=2, allow_nan=False) + "\n")
        print(f"{features_path}\n{series_path}\n{summary_path}")
    return EXIT_INPUT if failures else EXIT_OK


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def _load_phase_dir(table: FeatureTable, directory: Path, phase: str, metric: str) -> set[str]:
    participants = set()
    files = sorted(directory.glob("*.features.csv"))
    if not files:
        raise CliInputError(f"no *.features.csv files in {directory}")
    for path in files:
        with path.open() as fh:
            for record in csv.DictReader(fh):
                if record["metric"] != metric:
                    continue
                participants.add(record["participant"])
                table.add(
                    FeatureRow(
                        participant=record["participant"],
                        pitch=record["pitch"],
                        phase=phase,
                        metric=record["metric"],
                        value=float(record["value"]),
                    )
                )
    return participants


def cmd_compare(args, config: ToolConfig) -> int:
    table = FeatureTable()
    pre_participants = _load_phase_dir(table, Path(args.pre_dir), "pre", args.metric)
    post_participants = _load_phase_dir(table, Path(args.post_dir), "post", args.metric)
    unmatched = sorted(pre_participants ^ post_participants)
    for participant in unmatched:
        diag(
            "warning",
            "unmatched_participant",
            f"{participant} present in only one phase; excluded pairwise",
        )
    pitches = args.pitches.split(",") if args.pitches else None
    comparisons = stats.pre_post_per_pitch(table, args.metric, pitches, seed=config.seed)

    rows = []
    for comp in comparisons:
        row = {
            "pitch": comp.pitch,
            "n_pairs": comp.n_pairs,
            "n_excluded": comp.n_excluded,
            "flag": comp.flag,
        }
        if comp.result is not None:
            row.update(
                {
                    "w": comp.result.statistic_w,
                    "p_raw": comp.result.p_raw,
                    "p_fdr": comp.result.p_fdr,
                    "r_rb": comp.result.effect_r_rb,
                    "ci_low": comp.result.ci_low,
                    "ci_high": comp.result.ci_high,
                    "effect_d": comp.result.effect_d,
                    "n_effective": comp.result.n_effective,
                    "method": comp.result.method,
                }
            )
        rows.append(row)
    report = {
        "metric": args.metric,
        "test": "wilcoxon_signed_rank",
        "sidedness": "two-sided",
        "zero_policy": "drop",
        "ci_method": "percentile bootstrap",
        "bootstrap_seed": config.seed,
        "unmatched_participants": unmatched,
        "pitches": rows,
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, allow_nan=False) + "\n")
    csv_path = out.with_suffix(".csv")
    fieldnames = [
        "pitch", "n_pairs", "n_excluded", "n_effective", "w", "p_raw", "p_fdr",
        "r_rb", "ci_low", "ci_high", "effect_d", "method", "flag",
    ]
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fieldnames})
    print(f"{out}\n{csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# correlate
# ---------------------------------------------------------------------------

def _correlate_session(session: Session, config: ToolConfig) -> dict:
    rms_series, _ = _rms_series(session, config.window_ms)
    hop_s = rms_series.hop_ms / 1000.0
    rms_times = np.arange(len(rms_series.values)) * hop_s

    audio = session.audio()
    filtered = signals.band_pass(audio)
    spec = spectral.stft_magnitude(filtered)
    spr_series = spectral.spr(spec)
    spr_times = np.array([spec.frame_time_s(f) for f in range(len(spr_series.values))])

    grid_rms = resample_to_grid(rms_times, rms_series.values, config.grid_ms)
    grid_spr = resample_to_grid(spr_times, spr_series.values, config.grid_ms)
    x, y = overlap(grid_rms, grid_spr)
    step = config.grid_ms / 1000.0
    lo = max(grid_rms.start_bin, grid_spr.start_bin)
    times = (lo + np.arange(len(x))) * step

    overall = stats.pearson(x, y)
    notes = []
    for ev in session.events:
        mask = (times >= ev.start_s) & (times < ev.end_s)
        entry = {"pitch": ev.label.spn, "n": int(mask.sum())}
        if mask.sum() >= 3:
            try:
                r = stats.pearson(x[mask], y[mask])
                entry.update({"r": r.r, "p": r.p})
            except stats.StatsError as exc:
                entry["flag"] = str(exc)
        else:
            entry["flag"] = "insufficient data"
        notes.append(entry)
    return {
        "participant_id": session.manifest.participant_id,
        "grid_ms": config.grid_ms,
        "n_bins": int(len(x)),
        "overall": {"r": overall.r, "p": overall.p, "n": overall.n},
        "per_note": notes,
    }


def cmd_correlate(args, config: ToolConfig) -> int:
    reports = []
    for manifest_path in args.manifests:
        session = load_session(manifest_path)
        reports.append(_correlate_session(session, config))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps({"sessions": reports}, indent=2, allow_nan=False) + "\n"
    )
    print(out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# pca
# ---------------------------------------------------------------------------

def cmd_pca(args, config: ToolConfig) -> int:
    path = Path(args.features)
    if not path.exists():
        raise CliInputError(f"feature file not found: {path}")
    with path.open() as fh:
        records = list(csv.DictReader(fh))
    if not records:
        raise CliInputError(f"{path}: no rows")
    if args.columns:
        columns = args.columns.split(",")
        missing = [c for c in columns if c not in records[0]]
        if missing:
            raise CliInputError(f"columns not in {path.name}: {missing}")
    else:
        columns = [
            name
            for name in records[0]
            if all(_is_number(r[name]) for r in records)
        ]
        if len(columns) < 2:
            raise CliInputError(f"{path.name}: fewer than 2 numeric columns detected")
    try:
        matrix = np.array([[float(r[c]) for c in columns] for r in records])
    except ValueError as exc:
        raise CliInputError(f"{path.name}: non-numeric cell in selected columns ({exc})")

    try:
        result = stats.pca(matrix, standardize=not args.no_standardize)
    except stats.StatsError as exc:
        raise stats.StatsError(f"{exc}; columns are {columns}") from exc
    ratios = result.explained_variance_ratio
    report = {
        "columns": columns,
        "n_observations": int(matrix.shape[0]),
        "standardized": not args.no_standardize,
        "explained_variance_ratio": [float(v) for v in ratios],
        "top2_ratio_sum": float(ratios[:2].sum()),
        "components": [[float(v) for v in comp] for comp in result.components],
        "scores": [[float(v) for v in row] for row in result.scores],
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, allow_nan=False) + "\n")
    print(out)
    return EXIT_OK


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except (TypeError, ValueError):
        return False


# ---------------------------------------------------------------------------
# build-reference / serve
# ---------------------------------------------------------------------------

def cmd_build_reference(args, config: ToolConfig) -> int:
    session = load_session(args.manifest)
    trace = build_reference(
        session,
        grid_ms=config.grid_ms,
        session_id=args.session_id or Path(args.manifest).stem,
    )
    for w in trace.warnings:
        diag("warning", "reference", w)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    trace.save(args.out)
    print(args.out)
    return EXIT_OK


def cmd_serve(args, config: ToolConfig) -> int:
    import uvicorn

    from .feedback.service import create_app

    app = create_app(
        reference_dir=config.reference_dir,
        tick_hz=config.tick_hz,
        grid_ms=config.grid_ms,
        replay_speed=config.replay_speed,
    )
    diag(
        "info",
        "serve",
        f"listening on {config.host}:{config.port}",
        reference_dir=config.reference_dir,
    )
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="vocalis", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (or $VOCALIS_CONFIG)")
        p.add_argument("--grid-ms", type=float, default=None)
        p.add_argument("--window-ms", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("analyze", help="per-session metrics to CSV/JSON reports")
    p.add_argument("manifests", nargs="+", metavar="MANIFEST")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--metrics", help=f"comma list from {','.join(ANALYZE_METRICS)}")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="paired pre/post tests per pitch")
    p.add_argument("pre_dir")
    p.add_argument("post_dir")
    p.add_argument("--metric", default="stability", choices=dataset.METRICS)
    p.add_argument("--pitches", help="comma list of SPN pitch labels")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("correlate", help="EMG RMS vs SPR on a shared grid")
    p.add_argument("manifests", nargs="+", metavar="MANIFEST")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("pca", help="standardized PCA over feature columns")
    p.add_argument("features", metavar="FEATURES_CSV")
    p.add_argument("--columns", help="comma list of columns (default: numeric ones)")
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("build-reference", help="expert reference trace from a session")
    p.add_argument("manifest", metavar="MANIFEST")
    p.add_argument("--out", required=True)
    p.add_argument("--session-id")
    common(p)
    p.set_defaults(func=cmd_build_reference)

    p = sub.add_parser("serve", help="run the feedback service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--reference-dir", default=None)
    p.add_argument("--tick-hz", type=float, default=None)
    p.add_argument("--replay-speed", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config)
        config = apply_overrides(
            config,
            grid_ms=getattr(args, "grid_ms", None),
            window_ms=getattr(args, "window_ms", None),
            seed=getattr(args, "seed", None),
            host=getattr(args, "host", None),
            port=getattr(args, "port", None),
            reference_dir=getattr(args, "reference_dir", None),
            tick_hz=getattr(args, "tick_hz", None),
            replay_speed=getattr(args, "replay_speed", None),
        )
        return args.func(args, config)
    except CliInputError as exc:
        diag("error", "usage", str(exc))
        return EXIT_INPUT
    except _INPUT_ERRORS as exc:
        diag("error", type(exc).__name__, str(exc))
        return EXIT_INPUT
    except _COMPUTE_ERRORS as exc:
        diag("error", type(exc).__name__, str(exc))
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
