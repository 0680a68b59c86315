// Rolling frame buffer behind the charts.
//
// Two invariants from the frame contract are enforced here rather than in
// the render path: timestamps must be strictly increasing (stale or
// replayed frames are refused), and the buffer never holds more than the
// trailing HISTORY_SECONDS of frames.

import type { FeedbackFrame } from "./protocol.js";

export const HISTORY_SECONDS = 30;

export interface PitchStats {
  n: number;
  mean: number;
  sd: number;
}

export class FrameHistory {
  private buffer: FeedbackFrame[] = [];
  private rejected = 0;

  constructor(private readonly spanS: number = HISTORY_SECONDS) {}

  /** Append a frame. Returns false (and keeps nothing) when t_s does not advance. */
  push(frame: FeedbackFrame): boolean {
    const last = this.buffer[this.buffer.length - 1];
    if (last !== undefined && frame.t_s <= last.t_s) {
      this.rejected += 1;
      return false;
    }
    this.buffer.push(frame);
    const cutoff = frame.t_s - this.spanS;
    // Frames arrive in order, so the evictable prefix is contiguous.
    let drop = 0;
    while (drop < this.buffer.length && this.buffer[drop].t_s < cutoff) {
      drop += 1;
    }
    if (drop > 0) this.buffer = this.buffer.slice(drop);
    return true;
  }

  frames(): readonly FeedbackFrame[] {
    return this.buffer;
  }

  latest(): FeedbackFrame | undefined {
    return this.buffer[this.buffer.length - 1];
  }

  size(): number {
    return this.buffer.length;
  }

  rejectedCount(): number {
    return this.rejected;
  }

  /** Frames from the last `seconds` seconds, newest last. */
  window(seconds: number): FeedbackFrame[] {
    const last = this.latest();
    if (!last) return [];
    const cutoff = last.t_s - seconds;
    return this.buffer.filter((f) => f.t_s >= cutoff);
  }

  /**
   * Mean and standard deviation of the expert rms_norm over buffered
   * frames targeting `pitch`. The chart draws the expert trace as a band
   * of this width; sd is 0 until two samples exist.
   */
  expertStats(pitch: string): PitchStats {
    const values: number[] = [];
    for (const frame of this.buffer) {
      if (frame.target_pitch === pitch && frame.expert) {
        values.push(frame.expert.rms_norm);
      }
    }
    const n = values.length;
    if (n === 0) return { n: 0, mean: 0, sd: 0 };
    const mean = values.reduce((a, b) => a + b, 0) / n;
    if (n === 1) return { n, mean, sd: 0 };
    const ss = values.reduce((a, b) => a + (b - mean) * (b - mean), 0);
    return { n, mean, sd: Math.sqrt(ss / (n - 1)) };
  }

  clear(): void {
    this.buffer = [];
    this.rejected = 0;
  }
}
