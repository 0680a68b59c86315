// Session state machine: REST setup, stream subscription, phase commands.
//
// The client never recomputes metrics; it holds what the service streamed and
// exposes it for rendering. Sockets, the clock, and timers are injected so the
// whole thing runs under test without a browser or a server.

import { FrameHistory } from "./history.js";
import {
  classify,
  type FeedbackFrame,
  type PhaseEvent,
  type Phase,
  type ReferenceEntry,
  type SummaryResponse,
  type SessionInfo,
} from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "reconnecting" | "closed";

/** The subset of WebSocket the client touches; ws and the DOM both fit. */
export interface SocketLike {
  send(data: string): void;
  close(code?: number): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: ((event: { code: number }) => void) | null;
  onerror: (() => void) | null;
}

export interface SessionDeps {
  socketFactory: (url: string) => SocketLike;
  /** Monotonic time in milliseconds. */
  now: () => number;
  schedule: (fn: () => void, delayMs: number) => unknown;
  cancel: (handle: unknown) => void;
  reconnectDelaysMs?: number[];
  log?: (message: string) => void;
}

const DEFAULT_DELAYS = [500, 1000, 2000, 4000, 8000];

export interface SessionState {
  connection: ConnectionState;
  phase: Phase;
  latest: FeedbackFrame | null;
  referenceId: string | null;
  targetPitch: string | null;
  /** Seconds left in the calibration window, null outside calibration. */
  countdownS: number | null;
  calibrationReady: boolean;
  warning: string | null;
  error: string | null;
  droppedFrames: number;
}

export class SessionClient {
  readonly history = new FrameHistory();

  private socket: SocketLike | null = null;
  private url = "";
  private pending: string[] = [];
  private retryIndex = 0;
  private retryHandle: unknown = null;
  private closing = false;
  private calibrationStartedAtMs: number | null = null;
  private calibrationWindowS = 0;

  private state: SessionState = {
    connection: "closed",
    phase: "Idle",
    latest: null,
    referenceId: null,
    targetPitch: null,
    countdownS: null,
    calibrationReady: false,
    warning: null,
    error: null,
    droppedFrames: 0,
  };

  constructor(
    private readonly deps: SessionDeps,
    private readonly onChange: (state: SessionState) => void = () => {},
  ) {}

  snapshot(): SessionState {
    const countdownS =
      this.calibrationStartedAtMs === null
        ? null
        : Math.max(
            this.calibrationWindowS -
              (this.deps.now() - this.calibrationStartedAtMs) / 1000,
            0,
          );
    return { ...this.state, countdownS };
  }

  connect(url: string): void {
    this.url = url;
    this.closing = false;
    this.openSocket();
  }

  close(): void {
    this.closing = true;
    if (this.retryHandle !== null) {
      this.deps.cancel(this.retryHandle);
      this.retryHandle = null;
    }
    this.socket?.close(1000);
    this.socket = null;
    this.update({ connection: "closed" });
  }

  startCalibration(): void {
    this.sendCommand({ cmd: "start_calibration" });
  }

  /**
   * Start practicing against `reference`. `scheduleFrom` names another
   * reference whose pitch schedule should drive the run instead.
   */
  startPractice(reference: string, scheduleFrom?: string): void {
    const cmd: Record<string, unknown> = { cmd: "start_practice", reference };
    if (scheduleFrom) cmd.schedule = scheduleFrom;
    this.state.referenceId = reference;
    this.sendCommand(cmd);
  }

  endSession(): void {
    this.sendCommand({ cmd: "end" });
  }

  /** Queue a command; it is flushed as soon as the socket is open. */
  private sendCommand(cmd: Record<string, unknown>): void {
    this.pending.push(JSON.stringify(cmd));
    this.flush();
  }

  private flush(): void {
    if (this.state.connection !== "open" || !this.socket) return;
    while (this.pending.length > 0) {
      this.socket.send(this.pending.shift()!);
    }
  }

  private openSocket(): void {
    this.update({
      connection: this.retryIndex === 0 ? "connecting" : "reconnecting",
    });
    const socket = this.deps.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      if (socket !== this.socket) return;
      this.retryIndex = 0;
      this.update({ connection: "open" });
      this.flush();
    };
    socket.onmessage = (event) => {
      if (socket !== this.socket) return;
      this.receive(String(event.data));
    };
    socket.onclose = (event) => {
      if (socket !== this.socket) return;
      this.socket = null;
      if (this.closing) {
        this.update({ connection: "closed" });
        return;
      }
      // 4404 is the service saying the session id does not exist; retrying
      // the same URL would loop forever.
      if (event.code === 4404) {
        this.update({ connection: "closed", error: "session not found" });
        return;
      }
      this.scheduleReconnect();
    };
    socket.onerror = () => {};
  }

  private scheduleReconnect(): void {
    const delays = this.deps.reconnectDelaysMs ?? DEFAULT_DELAYS;
    const delay = delays[Math.min(this.retryIndex, delays.length - 1)];
    this.retryIndex += 1;
    this.update({ connection: "reconnecting" });
    this.retryHandle = this.deps.schedule(() => {
      this.retryHandle = null;
      if (!this.closing) this.openSocket();
    }, delay);
  }

  private receive(raw: string): void {
    const msg = classify(raw);
    switch (msg.kind) {
      case "frame":
        this.onFrame(msg.frame);
        break;
      case "event":
        this.onEvent(msg.event);
        break;
      case "warning":
        this.update({ warning: msg.text });
        break;
      case "error":
        this.update({ error: msg.text });
        break;
      case "malformed":
        this.state.droppedFrames += 1;
        (this.deps.log ?? console.warn)(
          `dropped message (${msg.reason}): ${raw.slice(0, 120)}`,
        );
        break;
    }
  }

  private onFrame(frame: FeedbackFrame): void {
    if (!this.history.push(frame)) {
      this.state.droppedFrames += 1;
      (this.deps.log ?? console.warn)(
        `dropped out-of-order frame at t_s=${frame.t_s}`,
      );
      return;
    }
    this.update({
      latest: frame,
      phase: frame.phase,
      targetPitch: frame.target_pitch,
    });
  }

  private onEvent(event: PhaseEvent): void {
    if (event.phase === "Calibrating") {
      this.calibrationStartedAtMs = this.deps.now();
      this.calibrationWindowS = event.calibration_window_s ?? 0;
      this.state.calibrationReady = false;
    } else {
      this.calibrationStartedAtMs = null;
    }
    if (event.event === "calibration_ready") {
      this.state.calibrationReady = true;
      this.calibrationStartedAtMs = null;
    }
    this.update({ phase: event.phase ?? this.state.phase });
  }

  private update(patch: Partial<SessionState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.snapshot());
  }
}

// ---------------------------------------------------------------------------
// REST helpers

type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

async function getJson(fetchFn: FetchLike, url: string): Promise<unknown> {
  const res = await fetchFn(url);
  if (!res.ok) throw new Error(`GET ${url} failed with ${res.status}`);
  return res.json();
}

export async function listReferences(
  base: string,
  fetchFn: FetchLike = fetch,
): Promise<ReferenceEntry[]> {
  const body = (await getJson(fetchFn, `${base}/references`)) as {
    references: ReferenceEntry[];
  };
  return body.references;
}

export async function createSession(
  base: string,
  manifestPath: string,
  fetchFn: FetchLike = fetch,
): Promise<SessionInfo> {
  const res = await fetchFn(`${base}/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ manifest_path: manifestPath }),
  });
  if (!res.ok) throw new Error(`POST ${base}/sessions failed with ${res.status}`);
  return (await res.json()) as SessionInfo;
}

export async function fetchSummary(
  base: string,
  sessionId: string,
  fetchFn: FetchLike = fetch,
): Promise<SummaryResponse> {
  return (await getJson(
    fetchFn,
    `${base}/sessions/${sessionId}/summary`,
  )) as SummaryResponse;
}

export function streamUrl(base: string, sessionId: string): string {
  return `${base.replace(/^http/, "ws")}/session/${sessionId}/stream`;
}
