import { describe, expect, it } from "vitest";

import { parseFrameEvent, parseReply } from "../src/protocol";
import { fakeFrame } from "./helpers";

describe("parseFrameEvent", () => {
  it("accepts a well-formed v1 frame event", () => {
    const event = fakeFrame({ seq: 7 });
    const parsed = parseFrameEvent(JSON.stringify(event));
    expect(parsed).not.toBeNull();
    expect(parsed!.seq).toBe(7);
    expect(parsed!.decision!.accepted).toBe(true);
  });

  it("ignores unknown extra fields for forward compatibility", () => {
    const event = { ...fakeFrame({ seq: 1 }), future_field: { nested: true } };
    const parsed = parseFrameEvent(JSON.stringify(event));
    expect(parsed).not.toBeNull();
    expect(parsed!.seq).toBe(1);
  });

  it("rejects malformed JSON", () => {
    expect(parseFrameEvent("{oops")).toBeNull();
  });

  it("rejects non-frame types and wrong versions", () => {
    expect(parseFrameEvent(JSON.stringify({ type: "ack", v: 1, of: "x" }))).toBeNull();
    expect(
      parseFrameEvent(JSON.stringify({ ...fakeFrame({ seq: 1 }), v: 2 })),
    ).toBeNull();
  });

  it("rejects structurally broken events", () => {
    const base = fakeFrame({ seq: 1 });
    expect(parseFrameEvent(JSON.stringify({ ...base, seq: "one" }))).toBeNull();
    expect(parseFrameEvent(JSON.stringify({ ...base, state: "half-on" }))).toBeNull();
    const badDecision = { ...base, decision: { label: "palm" } };
    expect(parseFrameEvent(JSON.stringify(badDecision))).toBeNull();
    expect(parseFrameEvent(JSON.stringify({ ...base, bbox: [1, 2] }))).toBeNull();
  });

  it("accepts no-detection frames", () => {
    const parsed = parseFrameEvent(JSON.stringify(fakeFrame({ seq: 2, detected: false })));
    expect(parsed).not.toBeNull();
    expect(parsed!.decision).toBeNull();
    expect(parsed!.bbox).toBeNull();
  });
});

describe("parseReply", () => {
  it("accepts acks and errors", () => {
    expect(parseReply(JSON.stringify({ type: "ack", v: 1, of: "snapshot" }))!.of).toBe(
      "snapshot",
    );
    const error = parseReply(
      JSON.stringify({ type: "error", v: 1, of: "rebuild_references", message: "missing class" }),
    );
    expect(error!.type).toBe("error");
  });

  it("rejects other messages", () => {
    expect(parseReply(JSON.stringify(fakeFrame({ seq: 0 })))).toBeNull();
    expect(parseReply("not json")).toBeNull();
  });
});
