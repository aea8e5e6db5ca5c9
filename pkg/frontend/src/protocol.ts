// Telemetry wire protocol, version 1. Every message is one JSON object
// with a `type` field and `v: 1`. Unknown extra fields are ignored for
// forward compatibility; anything structurally wrong is rejected as null.

export const PROTOCOL_VERSION = 1;

export const CLASS_NAMES = ["fist", "palm", "point_left", "point_right"] as const;
export type ClassName = (typeof CLASS_NAMES)[number];

export interface FrameDecision {
  label: string;
  classifier_label: string;
  nearest_class: string;
  nearest_distance: number;
  accepted: boolean;
  distances: Record<string, number>;
  effective_thresholds: Record<string, number>;
}

export interface FrameCommand {
  kind: string;
  x?: number;
  y?: number;
}

export interface FrameEvent {
  type: "frame";
  v: 1;
  seq: number;
  timestamp_ms: number;
  frame_timestamp_ms: number;
  state: "on" | "off";
  bbox: number[] | null;
  center: number[] | null;
  decision: FrameDecision | null;
  command: FrameCommand | null;
  fps: number | null;
  thumbnail: string | null;
}

export interface Reply {
  type: "ack" | "error";
  of: string;
  message?: string;
  [extra: string]: unknown;
}

export type ControlMessage =
  | { type: "set_threshold_scale"; v: 1; value: number }
  | { type: "set_dry_run"; v: 1; value: boolean }
  | { type: "set_debounce"; v: 1; n?: number; cooldown_ms?: number }
  | { type: "snapshot"; v: 1; class: ClassName }
  | { type: "rebuild_references"; v: 1 };

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function isFiniteNumber(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

function isClassMap(value: unknown): value is Record<string, number> {
  if (!isRecord(value)) return false;
  return CLASS_NAMES.every((name) => isFiniteNumber(value[name]));
}

function validDecision(value: unknown): value is FrameDecision {
  if (!isRecord(value)) return false;
  return (
    typeof value.label === "string" &&
    typeof value.classifier_label === "string" &&
    typeof value.nearest_class === "string" &&
    isFiniteNumber(value.nearest_distance) &&
    typeof value.accepted === "boolean" &&
    isClassMap(value.distances) &&
    isClassMap(value.effective_thresholds)
  );
}

/** Parse a raw channel message as a version-1 frame event, or null. */
export function parseFrameEvent(raw: string): FrameEvent | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!isRecord(doc)) return null;
  if (doc.type !== "frame" || doc.v !== PROTOCOL_VERSION) return null;
  if (!isFiniteNumber(doc.seq)) return null;
  if (doc.state !== "on" && doc.state !== "off") return null;
  if (doc.decision !== null && doc.decision !== undefined && !validDecision(doc.decision)) {
    return null;
  }
  if (doc.bbox != null && !(Array.isArray(doc.bbox) && doc.bbox.length === 4)) return null;
  if (doc.center != null && !(Array.isArray(doc.center) && doc.center.length === 2)) return null;
  return {
    type: "frame",
    v: 1,
    seq: doc.seq,
    timestamp_ms: isFiniteNumber(doc.timestamp_ms) ? doc.timestamp_ms : 0,
    frame_timestamp_ms: isFiniteNumber(doc.frame_timestamp_ms) ? doc.frame_timestamp_ms : 0,
    state: doc.state,
    bbox: (doc.bbox as number[] | null | undefined) ?? null,
    center: (doc.center as number[] | null | undefined) ?? null,
    decision: (doc.decision as FrameDecision | null | undefined) ?? null,
    command: isRecord(doc.command) && typeof doc.command.kind === "string"
      ? (doc.command as unknown as FrameCommand)
      : null,
    fps: isFiniteNumber(doc.fps) ? doc.fps : null,
    thumbnail: typeof doc.thumbnail === "string" ? doc.thumbnail : null,
  };
}

/** Parse an ack/error reply to a control message, or null. */
export function parseReply(raw: string): Reply | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!isRecord(doc)) return null;
  if (doc.type !== "ack" && doc.type !== "error") return null;
  if (typeof doc.of !== "string") return null;
  return doc as unknown as Reply;
}
