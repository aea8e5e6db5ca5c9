// Scripted fake pipeline: deterministic frame events shaped exactly like
// the telemetry channel's v1 protocol.

import { CLASS_NAMES, FrameEvent } from "../src/protocol";

export interface FakeFrameOptions {
  seq: number;
  accepted?: boolean;
  label?: string;
  detected?: boolean;
  state?: "on" | "off";
  thumbnail?: string | null;
}

export function fakeFrame(options: FakeFrameOptions): FrameEvent {
  const { seq } = options;
  const detected = options.detected ?? true;
  const accepted = options.accepted ?? true;
  const label = options.label ?? "palm";
  const thresholds: Record<string, number> = {};
  const distances: Record<string, number> = {};
  for (const [i, name] of CLASS_NAMES.entries()) {
    thresholds[name] = 2.0 + i;
    // Nearest class sits inside its threshold when accepted, outside
    // otherwise; the rest are far away. The wobble keeps values distinct
    // frame to frame without ever crossing a threshold.
    distances[name] =
      name === label ? (accepted ? 1.0 + 0.0001 * (seq % 1000) : 5.0) : 8.0 + i;
  }
  const nearest = CLASS_NAMES.includes(label as never) ? label : "fist";
  return {
    type: "frame",
    v: 1,
    seq,
    timestamp_ms: 1000 + seq * 50,
    frame_timestamp_ms: 1000 + seq * 50,
    state: options.state ?? "on",
    bbox: detected ? [100, 100, 70, 70] : null,
    center: detected ? [135, 135] : null,
    decision: detected
      ? {
          label: accepted ? label : "unknown",
          classifier_label: label,
          nearest_class: nearest,
          nearest_distance: distances[nearest],
          accepted,
          distances,
          effective_thresholds: thresholds,
        }
      : null,
    command: detected && accepted ? { kind: "move", x: 10, y: 20 } : null,
    fps: 20,
    thumbnail: options.thumbnail ?? (seq % 3 === 0 ? "dGh1bWI=" : null),
  };
}

export class FakeSocket {
  sent: string[] = [];
  sentAt: number[] = [];

  constructor(private clock: () => number = () => Date.now()) {}

  send(data: string): void {
    this.sent.push(data);
    this.sentAt.push(this.clock());
  }
}
