// Dashboard session state: event ordering, error counting, pending
// control acknowledgments. Pure state transitions; the DOM layer just
// paints whatever `view` holds.

import { DistanceBar, distanceBars } from "./barmodel.js";
import {
  ControlMessage,
  FrameCommand,
  FrameEvent,
  Reply,
  parseFrameEvent,
  parseReply,
} from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed";

export interface ViewState {
  connection: ConnectionState;
  lastSeq: number;
  mode: "on" | "off" | null;
  label: string | null;
  accepted: boolean | null;
  bars: DistanceBar[];
  bbox: number[] | null;
  center: number[] | null;
  command: FrameCommand | null;
  fps: number | null;
  thumbnail: string | null;
  eventsRendered: number;
  eventsDropped: number;
  staleDropped: number;
}

export interface PendingControl {
  sentAtMs: number;
}

export interface SendTransport {
  send(data: string): void;
}

const ACK_TIMEOUT_MS = 2000;

export function initialView(): ViewState {
  return {
    connection: "connecting",
    lastSeq: -1,
    mode: null,
    label: null,
    accepted: null,
    bars: [],
    bbox: null,
    center: null,
    command: null,
    fps: null,
    thumbnail: null,
    eventsRendered: 0,
    eventsDropped: 0,
    staleDropped: 0,
  };
}

export class DashboardSession {
  view: ViewState = initialView();
  /** Control types awaiting an ack; the UI disables these. */
  pending = new Map<string, PendingControl>();
  /** Control types whose last round trip timed out (warning badge). */
  warnings = new Set<string>();

  constructor(
    private now: () => number = () => Date.now(),
    private ackTimeoutMs: number = ACK_TIMEOUT_MS,
  ) {}

  /** Feed one raw channel message; returns the updated view state.
   *
   * Malformed or stale messages are dropped (counted) and never throw,
   * so one bad message cannot stall the stream. */
  consumeEvent(raw: string): ViewState {
    const reply = parseReply(raw);
    if (reply !== null) {
      this.handleReply(reply);
      return this.view;
    }
    const event = parseFrameEvent(raw);
    if (event === null) {
      this.view.eventsDropped += 1;
      return this.view;
    }
    if (event.seq <= this.view.lastSeq) {
      this.view.staleDropped += 1;
      return this.view;
    }
    this.applyFrame(event);
    return this.view;
  }

  private applyFrame(event: FrameEvent): void {
    const view = this.view;
    view.lastSeq = event.seq;
    view.mode = event.state;
    view.bbox = event.bbox;
    view.center = event.center;
    view.command = event.command;
    view.fps = event.fps;
    if (event.thumbnail !== null) {
      view.thumbnail = event.thumbnail; // keep the last one between updates
    }
    if (event.decision !== null) {
      view.label = event.decision.label;
      view.accepted = event.decision.accepted;
      view.bars = distanceBars(event.decision);
    } else {
      view.label = null;
      view.accepted = null;
      view.bars = [];
    }
    view.eventsRendered += 1;
  }

  /** Send a v1 control message; the control stays disabled until its ack
   * arrives or the timeout passes. */
  sendControl(transport: SendTransport, message: ControlMessage): void {
    transport.send(JSON.stringify(message));
    this.pending.set(message.type, { sentAtMs: this.now() });
    this.warnings.delete(message.type);
  }

  controlDisabled(type: string): boolean {
    this.expireTimeouts();
    return this.pending.has(type);
  }

  hasWarning(type: string): boolean {
    this.expireTimeouts();
    return this.warnings.has(type);
  }

  /** Duplicate acks are idempotent: the first ack clears the pending
   * entry, later ones find nothing to clear. */
  handleReply(reply: Reply): void {
    this.expireTimeouts();
    if (this.pending.delete(reply.of) && reply.type === "error") {
      this.warnings.add(reply.of);
    }
    if (reply.type === "error" && !this.pending.has(reply.of)) {
      this.warnings.add(reply.of);
    }
  }

  private expireTimeouts(): void {
    const now = this.now();
    for (const [type, entry] of this.pending) {
      if (now - entry.sentAtMs >= this.ackTimeoutMs) {
        this.pending.delete(type);
        this.warnings.add(type);
      }
    }
  }

  markConnection(state: ConnectionState): void {
    this.view.connection = state;
  }
}

/** Exponential reconnect backoff with a ceiling; resumes at the live edge
 * (no history replay), so the session object is simply reused. */
export function reconnectDelayMs(attempt: number): number {
  const base = 500;
  return Math.min(base * 2 ** Math.max(0, attempt), 15000);
}
