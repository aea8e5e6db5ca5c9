// Dashboard entry point: one WebSocket to the pipeline, session state,
// control widgets, reconnect with backoff at the live edge.

import { ControlMessage, CLASS_NAMES, ClassName } from "./protocol.js";
import { DashboardSession, reconnectDelayMs } from "./session.js";
import { ViewElements, render } from "./view.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function main(): void {
  const els: ViewElements = {
    stateIndicator: byId("state"),
    labelBadge: byId("label"),
    fpsGauge: byId("fps"),
    counters: byId("counters"),
    bars: byId("bars"),
    overlay: byId("overlay"),
    thumbnail: byId("thumbnail"),
    connection: byId("connection"),
  };
  const session = new DashboardSession();
  let socket: WebSocket | null = null;
  let attempt = 0;

  const endpoint = `ws://${location.host}`;

  function repaint(): void {
    render(session.view, els);
    syncControls();
  }

  function connect(): void {
    session.markConnection("connecting");
    repaint();
    socket = new WebSocket(endpoint);
    socket.onopen = () => {
      attempt = 0;
      session.markConnection("open");
      repaint();
    };
    socket.onmessage = (message) => {
      session.consumeEvent(String(message.data));
      repaint();
    };
    socket.onclose = () => {
      session.markConnection("closed");
      repaint();
      attempt += 1;
      setTimeout(connect, reconnectDelayMs(attempt));
    };
    socket.onerror = () => socket?.close();
  }

  function sendControl(message: ControlMessage): void {
    if (!socket || socket.readyState !== WebSocket.OPEN) return;
    session.sendControl(socket, message);
    syncControls();
  }

  const scale = byId<HTMLInputElement>("scale");
  const scaleValue = byId("scale-value");
  scale.addEventListener("input", () => {
    scaleValue.textContent = Number(scale.value).toFixed(2);
  });
  scale.addEventListener("change", () => {
    sendControl({ type: "set_threshold_scale", v: 1, value: Number(scale.value) });
  });

  const dryRun = byId<HTMLInputElement>("dry-run");
  dryRun.addEventListener("change", () => {
    sendControl({ type: "set_dry_run", v: 1, value: dryRun.checked });
  });

  const debounce = byId<HTMLInputElement>("debounce");
  const cooldown = byId<HTMLInputElement>("cooldown");
  byId("apply-debounce").addEventListener("click", () => {
    sendControl({
      type: "set_debounce",
      v: 1,
      n: Number(debounce.value),
      cooldown_ms: Number(cooldown.value),
    });
  });

  for (const name of CLASS_NAMES) {
    byId(`snapshot-${name}`).addEventListener("click", () => {
      sendControl({ type: "snapshot", v: 1, class: name as ClassName });
    });
  }
  byId("rebuild").addEventListener("click", () => {
    sendControl({ type: "rebuild_references", v: 1 });
  });

  function syncControls(): void {
    const widgets: Array<[string, HTMLElement]> = [
      ["set_threshold_scale", scale],
      ["set_dry_run", dryRun],
      ["set_debounce", byId("apply-debounce")],
      ["rebuild_references", byId("rebuild")],
      ...CLASS_NAMES.map(
        (name): [string, HTMLElement] => ["snapshot", byId(`snapshot-${name}`)],
      ),
    ];
    for (const [type, el] of widgets) {
      (el as HTMLInputElement | HTMLButtonElement).disabled = session.controlDisabled(type);
      el.classList.toggle("warning", session.hasWarning(type));
    }
  }

  connect();
}

main();
