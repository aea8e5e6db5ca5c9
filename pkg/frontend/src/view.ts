// DOM painting for the dashboard. Thin by design: all decisions about
// what to show live in session.ts / barmodel.ts.

import { ViewState } from "./session.js";

export interface ViewElements {
  stateIndicator: HTMLElement;
  labelBadge: HTMLElement;
  fpsGauge: HTMLElement;
  counters: HTMLElement;
  bars: HTMLElement;
  overlay: HTMLCanvasElement;
  thumbnail: HTMLImageElement;
  connection: HTMLElement;
}

const GESTURE_ICONS: Record<string, string> = {
  fist: "✊",
  palm: "✋",
  point_left: "☜",
  point_right: "☞",
  unknown: "?",
};

export function render(view: ViewState, els: ViewElements): void {
  els.connection.textContent = view.connection;
  els.connection.className = `connection ${view.connection}`;

  els.stateIndicator.textContent = view.mode === "on" ? "ON" : view.mode === "off" ? "OFF" : "--";
  els.stateIndicator.className = `state ${view.mode ?? "none"}`;

  const icon = view.label ? GESTURE_ICONS[view.label] ?? "?" : "";
  els.labelBadge.textContent = view.label ? `${icon} ${view.label}` : "no hand";
  els.labelBadge.className = `label ${view.accepted === false ? "rejected" : view.label ?? "none"}`;

  els.fpsGauge.textContent = view.fps !== null ? `${view.fps.toFixed(1)} fps` : "-- fps";
  els.counters.textContent =
    `seq ${view.lastSeq} | rendered ${view.eventsRendered} | ` +
    `dropped ${view.eventsDropped} | stale ${view.staleDropped}`;

  renderBars(view, els.bars);
  renderOverlay(view, els);
}

function renderBars(view: ViewState, container: HTMLElement): void {
  container.replaceChildren();
  for (const bar of view.bars) {
    const row = document.createElement("div");
    row.className = "bar-row";
    const name = document.createElement("span");
    name.className = "bar-name";
    name.textContent = bar.className;
    const track = document.createElement("div");
    track.className = "bar-track";
    const fill = document.createElement("div");
    fill.className = `bar-fill ${bar.accepted ? "accepted" : "rejected"}${bar.nearest ? " nearest" : ""}`;
    fill.style.width = `${Math.min(bar.fill * 50, 100)}%`;
    const marker = document.createElement("div");
    marker.className = "bar-threshold";
    marker.style.left = "50%"; // threshold is the midpoint of a 2x-range track
    const value = document.createElement("span");
    value.className = "bar-value";
    value.textContent = `${bar.distance.toFixed(2)} / ${bar.threshold.toFixed(2)}`;
    track.append(fill, marker);
    row.append(name, track, value);
    container.append(row);
  }
}

function renderOverlay(view: ViewState, els: ViewElements): void {
  if (view.thumbnail !== null) {
    els.thumbnail.src = `data:image/jpeg;base64,${view.thumbnail}`;
  }
  const ctx = els.overlay.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, els.overlay.width, els.overlay.height);
  if (!view.bbox) return;
  // bbox/center are in 300x300 detector space; scale onto the canvas.
  const sx = els.overlay.width / 300;
  const sy = els.overlay.height / 300;
  const [x, y, w, h] = view.bbox;
  ctx.lineWidth = 2;
  ctx.strokeStyle = view.accepted === false ? "#e05555" : "#35d07f";
  ctx.strokeRect(x * sx, y * sy, w * sx, h * sy);
  if (view.center) {
    ctx.fillStyle = "#ffd04d";
    ctx.beginPath();
    ctx.arc(view.center[0] * sx, view.center[1] * sy, 4, 0, Math.PI * 2);
    ctx.fill();
  }
}
