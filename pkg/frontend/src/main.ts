// Browser entry point: wires the session client to the controls and canvases.

import {
  DEFAULT_CHART,
  DEVIATION_THRESHOLDS,
  deviationLevel,
  drawGauge,
  drawLadder,
  drawMeter,
  drawRmsChart,
  layoutGauge,
  layoutLadder,
  layoutRmsChart,
  layoutSprMeter,
  type ChartOptions,
} from "./chart.js";
import type { ReviewSummary } from "./protocol.js";
import {
  SessionClient,
  createSession,
  fetchSummary,
  listReferences,
  streamUrl,
  type SessionState,
  type SocketLike,
} from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const baseInput = el<HTMLInputElement>("base-url");
const manifestInput = el<HTMLInputElement>("manifest-path");
const referenceSelect = el<HTMLSelectElement>("reference");
const connectBtn = el<HTMLButtonElement>("connect");
const createBtn = el<HTMLButtonElement>("create");
const calibrateBtn = el<HTMLButtonElement>("calibrate");
const practiceBtn = el<HTMLButtonElement>("practice");
const endBtn = el<HTMLButtonElement>("end");
const phaseBadge = el<HTMLSpanElement>("phase");
const connBadge = el<HTMLSpanElement>("connection");
const countdown = el<HTMLSpanElement>("countdown");
const banner = el<HTMLDivElement>("banner");
const errorLine = el<HTMLDivElement>("error");
const reviewPanel = el<HTMLDivElement>("review");
const deviationRow = el<HTMLDivElement>("deviation");

const chartCanvas = el<HTMLCanvasElement>("rms-chart");
const gaugeCanvas = el<HTMLCanvasElement>("gauge");
const meterCanvas = el<HTMLCanvasElement>("meter");
const ladderCanvas = el<HTMLCanvasElement>("ladder");

const chartOpts: ChartOptions = {
  ...DEFAULT_CHART,
  width: chartCanvas.width,
  height: chartCanvas.height,
};

for (const name of ["axis-01", "axis-02"]) {
  el<HTMLInputElement>(name).addEventListener("change", (ev) => {
    const input = ev.target as HTMLInputElement;
    if (input.checked) chartOpts.axisStepS = input.value === "0.1" ? 0.1 : 0.2;
  });
}

let sessionId: string | null = null;
let summaryShownFor: string | null = null;

const client = new SessionClient(
  {
    // The DOM socket fits SocketLike at runtime; its handlers just receive
    // richer event objects than the client's signatures declare.
    socketFactory: (url) => new WebSocket(url) as unknown as SocketLike,
    now: () => performance.now(),
    schedule: (fn, ms) => window.setTimeout(fn, ms),
    cancel: (h) => window.clearTimeout(h as number),
  },
  onState,
);

function onState(state: SessionState): void {
  phaseBadge.textContent = state.phase;
  phaseBadge.dataset.phase = state.phase;
  connBadge.textContent = state.connection;
  connBadge.dataset.state = state.connection;
  banner.textContent = state.warning ?? "";
  banner.hidden = !state.warning;
  errorLine.textContent = state.error ?? "";
  errorLine.hidden = !state.error;
  calibrateBtn.disabled = state.phase !== "Idle";
  practiceBtn.disabled = !(
    state.phase === "Idle" ||
    state.phase === "Calibrating" ||
    state.calibrationReady
  );
  endBtn.disabled = state.phase !== "Practicing";
  if (state.phase === "Review" && sessionId && summaryShownFor !== sessionId) {
    summaryShownFor = sessionId;
    void showSummary(sessionId);
  }
}

async function showSummary(id: string): Promise<void> {
  try {
    const res = await fetchSummary(baseInput.value, id);
    renderSummary(res.summary);
  } catch (exc) {
    reviewPanel.textContent = `summary unavailable: ${(exc as Error).message}`;
    reviewPanel.hidden = false;
  }
}

function renderSummary(summary: ReviewSummary): void {
  const fmt = (v: number | null, digits: number) =>
    v === null ? "--" : v.toFixed(digits);
  const rows = summary.per_pitch
    .map(
      (p) =>
        `<tr><td>${p.pitch}</td><td>${p.n_bins}</td>` +
        `<td>${fmt(p.mean_stability_db, 2)}</td>` +
        `<td>${fmt(p.mean_rms_norm, 3)}</td></tr>`,
    )
    .join("");
  reviewPanel.innerHTML =
    `<h2>Session review</h2>` +
    `<p>${summary.n_frames} frames, ${summary.n_bins} bins. ` +
    `Mean SPR delta ${fmt(summary.mean_spr_delta, 2)} dB, ` +
    `mean RMS delta ${fmt(summary.mean_rms_delta, 3)}.</p>` +
    `<table><thead><tr><th>pitch</th><th>bins</th>` +
    `<th>stability (dB)</th><th>rms</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`;
  reviewPanel.hidden = false;
}

connectBtn.addEventListener("click", async () => {
  referenceSelect.innerHTML = "";
  try {
    const refs = await listReferences(baseInput.value);
    for (const ref of refs) {
      const opt = document.createElement("option");
      opt.value = ref.id;
      opt.textContent = ref.pitches ? `${ref.id} (${ref.pitches.join(" ")})` : ref.id;
      referenceSelect.append(opt);
    }
    errorLine.hidden = true;
  } catch (exc) {
    errorLine.textContent = `cannot reach service: ${(exc as Error).message}`;
    errorLine.hidden = false;
  }
});

createBtn.addEventListener("click", async () => {
  try {
    const info = await createSession(baseInput.value, manifestInput.value);
    sessionId = info.session_id;
    summaryShownFor = null;
    reviewPanel.hidden = true;
    sessionStorage.setItem("vocalis-base", baseInput.value);
    sessionStorage.setItem("vocalis-session", sessionId);
    if (info.warnings.length > 0) {
      banner.textContent = info.warnings.join("; ");
      banner.hidden = false;
    }
    client.connect(streamUrl(baseInput.value, sessionId));
  } catch (exc) {
    errorLine.textContent = (exc as Error).message;
    errorLine.hidden = false;
  }
});

calibrateBtn.addEventListener("click", () => client.startCalibration());
practiceBtn.addEventListener("click", () => {
  if (referenceSelect.value) client.startPractice(referenceSelect.value);
});
endBtn.addEventListener("click", () => client.endSession());

// A reload mid-session reattaches to the same stream; if the run already
// finished, the summary endpoint has everything the review pane needs.
const savedBase = sessionStorage.getItem("vocalis-base");
const savedSession = sessionStorage.getItem("vocalis-session");
if (savedBase && savedSession) {
  baseInput.value = savedBase;
  sessionId = savedSession;
  client.connect(streamUrl(savedBase, savedSession));
  void fetchSummary(savedBase, savedSession)
    .then((res) => {
      summaryShownFor = savedSession;
      renderSummary(res.summary);
      if (res.warnings.length > 0) {
        banner.textContent = res.warnings.join("; ");
        banner.hidden = false;
      }
    })
    .catch(() => {});
}

function render(): void {
  const state = client.snapshot();
  countdown.textContent =
    state.countdownS === null ? "" : `calibrating: ${state.countdownS.toFixed(1)} s`;

  const ctx = chartCanvas.getContext("2d");
  if (ctx) drawRmsChart(ctx, layoutRmsChart(client.history, chartOpts), chartOpts);

  const latest = state.latest;
  const gctx = gaugeCanvas.getContext("2d");
  if (gctx) {
    drawGauge(
      gctx,
      layoutGauge(latest?.learner?.stability_window_db),
      gaugeCanvas.width,
      gaugeCanvas.height,
    );
  }
  const mctx = meterCanvas.getContext("2d");
  if (mctx) {
    drawMeter(
      mctx,
      layoutSprMeter(latest?.learner?.spr_db, latest?.expert?.spr_db),
      meterCanvas.width,
      meterCanvas.height,
    );
  }
  const lctx = ladderCanvas.getContext("2d");
  if (lctx) {
    drawLadder(
      lctx,
      layoutLadder(state.targetPitch, latest?.learner?.f0_hz),
      ladderCanvas.width,
      ladderCanvas.height,
    );
  }

  if (latest?.deviation) {
    const parts: string[] = [];
    for (const [field, label] of [
      ["rms_delta", "rms"],
      ["stability_delta", "stability"],
      ["spr_delta", "spr"],
    ] as const) {
      const value = latest.deviation[field];
      const level = deviationLevel(value, DEVIATION_THRESHOLDS[field]);
      parts.push(
        `<span class="pill ${level}">${label} ${value >= 0 ? "+" : ""}${value.toFixed(2)}</span>`,
      );
    }
    deviationRow.innerHTML = parts.join(" ");
  } else {
    deviationRow.innerHTML = "";
  }
  requestAnimationFrame(render);
}

requestAnimationFrame(render);
