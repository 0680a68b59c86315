// Types and parsing for the feedback service's wire protocol.
//
// The stream multiplexes four message shapes, told apart by their keys:
// frames carry "t_s", events carry "event", warnings carry "warning" and
// errors carry "error". Everything here is defensive: a malformed message
// is classified as such with a reason instead of throwing, so one bad
// payload never takes the view down.

export type Phase = "Idle" | "Calibrating" | "Practicing" | "Review";

const PHASES: readonly string[] = ["Idle", "Calibrating", "Practicing", "Review"];

/** One side's metrics inside a frame. f0_hz is optional in the schema. */
export interface MetricSet {
  envelope_mean: number;
  stability_window_db: number;
  rms_norm: number;
  spr_db: number;
  f0_hz?: number;
}

export interface Deviation {
  rms_delta: number;
  stability_delta: number;
  spr_delta: number;
}

/**
 * A feedback frame. The first few frames of a practice run arrive bare
 * (no learner/expert/deviation) while the metric windows warm up.
 */
export interface FeedbackFrame {
  t_s: number;
  phase: Phase;
  target_pitch: string | null;
  learner?: MetricSet;
  expert?: MetricSet;
  deviation?: Deviation;
}

export interface PhaseEvent {
  event: string;
  phase?: Phase;
  calibration_window_s?: number;
}

export type ServerMessage =
  | { kind: "frame"; frame: FeedbackFrame }
  | { kind: "event"; event: PhaseEvent }
  | { kind: "warning"; text: string }
  | { kind: "error"; text: string }
  | { kind: "malformed"; reason: string };

const METRIC_FIELDS = [
  "envelope_mean",
  "stability_window_db",
  "rms_norm",
  "spr_db",
] as const;

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function checkMetricSet(value: unknown, label: string): string | null {
  if (typeof value !== "object" || value === null) {
    return `${label} is not an object`;
  }
  const obj = value as Record<string, unknown>;
  for (const field of METRIC_FIELDS) {
    if (!isFiniteNumber(obj[field])) {
      return `${label}.${field} is not a finite number`;
    }
  }
  if (obj.f0_hz !== undefined && obj.f0_hz !== null && !isFiniteNumber(obj.f0_hz)) {
    return `${label}.f0_hz is not a finite number`;
  }
  return null;
}

function checkFrame(obj: Record<string, unknown>): string | null {
  if (!isFiniteNumber(obj.t_s)) return "t_s is not a finite number";
  if (typeof obj.phase !== "string" || !PHASES.includes(obj.phase)) {
    return `unknown phase ${JSON.stringify(obj.phase)}`;
  }
  if (obj.target_pitch !== null && obj.target_pitch !== undefined
      && typeof obj.target_pitch !== "string") {
    return "target_pitch is neither a string nor null";
  }
  const sides: Array<["learner" | "expert" | "deviation", string[]]> = [
    ["learner", [...METRIC_FIELDS]],
    ["expert", [...METRIC_FIELDS]],
    ["deviation", ["rms_delta", "stability_delta", "spr_delta"]],
  ];
  for (const [side, fields] of sides) {
    const value = obj[side];
    if (value === undefined) continue;
    if (side === "deviation") {
      if (typeof value !== "object" || value === null) {
        return "deviation is not an object";
      }
      for (const field of fields) {
        if (!isFiniteNumber((value as Record<string, unknown>)[field])) {
          return `deviation.${field} is not a finite number`;
        }
      }
    } else {
      const err = checkMetricSet(value, side);
      if (err) return err;
    }
  }
  return null;
}

/** Parse one raw websocket payload into a typed message. Never throws. */
export function classify(raw: string): ServerMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch (exc) {
    return { kind: "malformed", reason: `not JSON (${(exc as Error).message})` };
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    return { kind: "malformed", reason: "not a JSON object" };
  }
  const rec = obj as Record<string, unknown>;
  if (typeof rec.error === "string") {
    return { kind: "error", text: rec.error };
  }
  if (typeof rec.warning === "string") {
    return { kind: "warning", text: rec.warning };
  }
  if (typeof rec.event === "string") {
    return { kind: "event", event: rec as unknown as PhaseEvent };
  }
  if ("t_s" in rec) {
    const reason = checkFrame(rec);
    if (reason) return { kind: "malformed", reason };
    const frame: FeedbackFrame = {
      t_s: rec.t_s as number,
      phase: rec.phase as Phase,
      target_pitch: (rec.target_pitch ?? null) as string | null,
    };
    if (rec.learner !== undefined) frame.learner = rec.learner as MetricSet;
    if (rec.expert !== undefined) frame.expert = rec.expert as MetricSet;
    if (rec.deviation !== undefined) frame.deviation = rec.deviation as Deviation;
    return { kind: "frame", frame };
  }
  return { kind: "malformed", reason: "no recognizable message keys" };
}

/** REST shapes, straight from the service's JSON. */
export interface ReferenceEntry {
  id: string;
  participant_id?: string;
  session_id?: string;
  gender?: string | null;
  grid_ms?: number;
  n_bins?: number;
  duration_s?: number;
  pitches?: string[];
  error?: string;
}

export interface SessionInfo {
  session_id: string;
  phase: Phase;
  participant_id: string;
  modalities: string[];
  warnings: string[];
}

export interface PitchSummary {
  pitch: string;
  n_bins: number;
  mean_stability_db: number | null;
  mean_rms_norm: number | null;
}

export interface ReviewSummary {
  per_pitch: PitchSummary[];
  mean_spr_delta: number | null;
  mean_rms_delta: number | null;
  n_bins: number;
  n_frames: number;
}

/** Envelope of GET /sessions/{id}/summary. */
export interface SummaryResponse {
  session_id: string;
  phase: Phase;
  summary: ReviewSummary;
  warnings: string[];
}
