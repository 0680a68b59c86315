// Chart geometry and drawing.
//
// Layout functions are pure pixel math over frame history so they can be
// exercised headless; the draw* functions at the bottom only move a canvas
// context along the precomputed shapes.

import { centsOff, midiToSpn, parseSpn, spnToHz } from "./cents.js";
import type { FrameHistory } from "./history.js";

export interface ChartOptions {
  width: number;
  height: number;
  windowS: number;
  axisStepS: 0.1 | 0.2;
  yMax: number;
  /** Minimum half-width of the expert band in rms_norm units. */
  bandFloor: number;
}

export const DEFAULT_CHART: ChartOptions = {
  width: 800,
  height: 260,
  windowS: 10,
  axisStepS: 0.2,
  yMax: 1.2,
  bandFloor: 0.02,
};

export interface TracePoint {
  x: number;
  y: number;
  t: number;
}

export interface AxisTick {
  x: number;
  t: number;
  major: boolean;
}

export interface RmsChartLayout {
  learner: TracePoint[];
  expert: TracePoint[];
  /** Band edges aligned index-for-index with the expert trace. */
  bandUpper: TracePoint[];
  bandLower: TracePoint[];
  ticks: AxisTick[];
  tStart: number;
  tEnd: number;
}

function yFor(value: number, opts: ChartOptions): number {
  const clamped = Math.min(Math.max(value, 0), opts.yMax);
  return opts.height * (1 - clamped / opts.yMax);
}

export function layoutRmsChart(
  history: FrameHistory,
  opts: ChartOptions = DEFAULT_CHART,
): RmsChartLayout {
  const latest = history.latest();
  const tEnd = latest ? latest.t_s : 0;
  const tStart = tEnd - opts.windowS;
  const xFor = (t: number) => ((t - tStart) / opts.windowS) * opts.width;

  const learner: TracePoint[] = [];
  const expert: TracePoint[] = [];
  const bandUpper: TracePoint[] = [];
  const bandLower: TracePoint[] = [];
  const halfWidthByPitch = new Map<string | null, number>();

  for (const frame of history.window(opts.windowS)) {
    const x = xFor(frame.t_s);
    if (frame.learner) {
      learner.push({ x, y: yFor(frame.learner.rms_norm, opts), t: frame.t_s });
    }
    if (frame.expert) {
      let half = halfWidthByPitch.get(frame.target_pitch);
      if (half === undefined) {
        const sd = frame.target_pitch
          ? history.expertStats(frame.target_pitch).sd
          : 0;
        half = Math.max(sd, opts.bandFloor);
        halfWidthByPitch.set(frame.target_pitch, half);
      }
      const value = frame.expert.rms_norm;
      expert.push({ x, y: yFor(value, opts), t: frame.t_s });
      bandUpper.push({ x, y: yFor(value + half, opts), t: frame.t_s });
      bandLower.push({ x, y: yFor(value - half, opts), t: frame.t_s });
    }
  }

  const ticks: AxisTick[] = [];
  const step = opts.axisStepS;
  const first = Math.ceil(tStart / step) * step;
  for (let t = first; t <= tEnd + 1e-9; t += step) {
    const rounded = Math.round(t / step) * step;
    ticks.push({
      x: xFor(rounded),
      t: rounded,
      major: Math.abs(rounded - Math.round(rounded)) < step / 4,
    });
  }
  return { learner, expert, bandUpper, bandLower, ticks, tStart, tEnd };
}

// ---------------------------------------------------------------------------
// deviation color coding

export type Level = "good" | "warn" | "bad";

export interface Thresholds {
  good: number;
  warn: number;
}

/** Display bands for the three deviation fields, in their native units. */
export const DEVIATION_THRESHOLDS: Record<string, Thresholds> = {
  rms_delta: { good: 0.05, warn: 0.15 },
  stability_delta: { good: 1.0, warn: 3.0 },
  spr_delta: { good: 2.0, warn: 5.0 },
};

export function deviationLevel(value: number, thresholds: Thresholds): Level {
  const mag = Math.abs(value);
  if (mag <= thresholds.good) return "good";
  if (mag <= thresholds.warn) return "warn";
  return "bad";
}

// ---------------------------------------------------------------------------
// stability gauge (lower is better)

export interface GaugeLayout {
  fraction: number;
  level: Level;
  label: string;
}

export function layoutGauge(
  stabilityDb: number | undefined,
  scaleMaxDb = 8,
  goodMax = 2,
  warnMax = 5,
): GaugeLayout {
  if (stabilityDb === undefined) {
    return { fraction: 0, level: "good", label: "--" };
  }
  const fraction = Math.min(Math.max(stabilityDb / scaleMaxDb, 0), 1);
  const level: Level =
    stabilityDb <= goodMax ? "good" : stabilityDb <= warnMax ? "warn" : "bad";
  return { fraction, level, label: `${stabilityDb.toFixed(2)} dB` };
}

// ---------------------------------------------------------------------------
// SPR meter

export interface MeterLayout {
  fraction: number;
  expertFraction: number | null;
  label: string;
}

export function layoutSprMeter(
  sprDb: number | undefined,
  expertSprDb: number | undefined,
  minDb = -20,
  maxDb = 20,
): MeterLayout {
  const place = (v: number) =>
    Math.min(Math.max((v - minDb) / (maxDb - minDb), 0), 1);
  if (sprDb === undefined) {
    return { fraction: 0.5, expertFraction: null, label: "--" };
  }
  return {
    fraction: place(sprDb),
    expertFraction: expertSprDb === undefined ? null : place(expertSprDb),
    label: `${sprDb.toFixed(1)} dB`,
  };
}

// ---------------------------------------------------------------------------
// pitch ladder

export interface LadderRung {
  semitoneOffset: number;
  label: string;
  isTarget: boolean;
}

export interface LadderLayout {
  rungs: LadderRung[];
  /** Learner marker in semitones from the target, null without f0. */
  marker: { semitoneOffset: number; cents: number } | null;
  targetLabel: string | null;
}

export function layoutLadder(
  targetPitch: string | null,
  learnerF0Hz: number | undefined,
  span = 4,
): LadderLayout {
  if (!targetPitch) return { rungs: [], marker: null, targetLabel: null };
  const targetMidi = parseSpn(targetPitch);
  if (targetMidi === null) return { rungs: [], marker: null, targetLabel: null };

  const rungs: LadderRung[] = [];
  for (let off = span; off >= -span; off -= 1) {
    const midi = targetMidi + off;
    if (midi < 0 || midi > 127) continue;
    rungs.push({ semitoneOffset: off, label: midiToSpn(midi), isTarget: off === 0 });
  }

  let marker: LadderLayout["marker"] = null;
  const targetHz = spnToHz(targetPitch);
  if (learnerF0Hz !== undefined && learnerF0Hz > 0 && targetHz !== null) {
    const cents = centsOff(learnerF0Hz, targetHz);
    const clamped = Math.min(Math.max(cents / 100, -span), span);
    marker = { semitoneOffset: clamped, cents };
  }
  return { rungs, marker, targetLabel: targetPitch };
}

// ---------------------------------------------------------------------------
// canvas drawing

export const COLORS = {
  learner: "#0b6e99",
  expert: "#b8860b",
  band: "rgba(184, 134, 11, 0.18)",
  grid: "#e3e7ec",
  gridMajor: "#c2cad4",
  text: "#3b4754",
  good: "#1d8348",
  warn: "#b7950b",
  bad: "#b03a2e",
};

function strokePath(ctx: CanvasRenderingContext2D, pts: TracePoint[], color: string) {
  if (pts.length < 2) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(pts[0].x, pts[0].y);
  for (let i = 1; i < pts.length; i++) ctx.lineTo(pts[i].x, pts[i].y);
  ctx.stroke();
}

export function drawRmsChart(
  ctx: CanvasRenderingContext2D,
  layout: RmsChartLayout,
  opts: ChartOptions = DEFAULT_CHART,
): void {
  ctx.clearRect(0, 0, opts.width, opts.height);
  for (const tick of layout.ticks) {
    ctx.strokeStyle = tick.major ? COLORS.gridMajor : COLORS.grid;
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(tick.x, 0);
    ctx.lineTo(tick.x, opts.height);
    ctx.stroke();
    if (tick.major) {
      ctx.fillStyle = COLORS.text;
      ctx.font = "11px system-ui, sans-serif";
      ctx.fillText(`${tick.t.toFixed(0)}s`, tick.x + 3, opts.height - 4);
    }
  }
  if (layout.bandUpper.length >= 2) {
    ctx.fillStyle = COLORS.band;
    ctx.beginPath();
    ctx.moveTo(layout.bandUpper[0].x, layout.bandUpper[0].y);
    for (const p of layout.bandUpper) ctx.lineTo(p.x, p.y);
    for (let i = layout.bandLower.length - 1; i >= 0; i--) {
      ctx.lineTo(layout.bandLower[i].x, layout.bandLower[i].y);
    }
    ctx.closePath();
    ctx.fill();
  }
  strokePath(ctx, layout.expert, COLORS.expert);
  strokePath(ctx, layout.learner, COLORS.learner);
}

export function drawGauge(
  ctx: CanvasRenderingContext2D,
  gauge: GaugeLayout,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = COLORS.grid;
  ctx.fillRect(0, height / 3, width, height / 3);
  ctx.fillStyle = COLORS[gauge.level];
  ctx.fillRect(0, height / 3, width * gauge.fraction, height / 3);
  ctx.fillStyle = COLORS.text;
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillText(gauge.label, 4, height / 3 - 4);
}

export function drawMeter(
  ctx: CanvasRenderingContext2D,
  meter: MeterLayout,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = COLORS.grid;
  ctx.fillRect(0, height / 3, width, height / 3);
  const x = width * meter.fraction;
  ctx.fillStyle = COLORS.learner;
  ctx.fillRect(x - 2, height / 4, 4, height / 2);
  if (meter.expertFraction !== null) {
    const ex = width * meter.expertFraction;
    ctx.fillStyle = COLORS.expert;
    ctx.fillRect(ex - 1, height / 4, 2, height / 2);
  }
  ctx.fillStyle = COLORS.text;
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillText(meter.label, 4, height / 3 - 4);
}

export function drawLadder(
  ctx: CanvasRenderingContext2D,
  ladder: LadderLayout,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  if (ladder.rungs.length === 0) return;
  const span = Math.max(...ladder.rungs.map((r) => Math.abs(r.semitoneOffset)), 1);
  const yFor = (off: number) => (height / 2) * (1 - off / (span + 0.5));
  for (const rung of ladder.rungs) {
    const y = yFor(rung.semitoneOffset);
    ctx.strokeStyle = rung.isTarget ? COLORS.good : COLORS.gridMajor;
    ctx.lineWidth = rung.isTarget ? 2 : 1;
    ctx.beginPath();
    ctx.moveTo(30, y);
    ctx.lineTo(width - 8, y);
    ctx.stroke();
    ctx.fillStyle = rung.isTarget ? COLORS.good : COLORS.text;
    ctx.font = "11px system-ui, sans-serif";
    ctx.fillText(rung.label, 2, y + 4);
  }
  if (ladder.marker) {
    const y = yFor(ladder.marker.semitoneOffset);
    ctx.fillStyle = COLORS.learner;
    ctx.beginPath();
    ctx.arc(width / 2, y, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.font = "11px system-ui, sans-serif";
    ctx.fillText(`${ladder.marker.cents >= 0 ? "+" : ""}${ladder.marker.cents.toFixed(0)}c`, width / 2 + 8, y + 4);
  }
}
