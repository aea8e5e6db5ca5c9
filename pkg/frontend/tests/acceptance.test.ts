// Dashboard acceptance: a scripted fake pipeline emits 20 events/s for
// 60 s (fake timers). The session must drop zero well-formed events,
// render distance bars consistent with the accept rule on every frame,
// and put a threshold-scale change on the wire as a v1 control message
// within 100 ms.
//
// The companion invariant, killing the dashboard mid-replay leaves the
// pipeline's command log identical to a no-dashboard run, is exercised
// against the real pipeline in the backend suite
// (tests/test_telemetry.py::test_client_kill_leaves_command_log_identical).

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { CLASS_NAMES } from "../src/protocol";
import { DashboardSession } from "../src/session";
import { FakeSocket, fakeFrame } from "./helpers";

const EVENTS_PER_SECOND = 20;
const DURATION_S = 60;
const INTERVAL_MS = 1000 / EVENTS_PER_SECOND;

describe("dashboard acceptance", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("keeps up with 20 events/s for 60 s without dropping or desyncing", () => {
    const session = new DashboardSession(() => Date.now(), 2000);
    const labels = ["palm", "point_left", "point_right", "fist"];
    let emitted = 0;
    let barChecks = 0;

    const timer = setInterval(() => {
      const seq = emitted;
      const accepted = seq % 7 !== 3; // mix in rejected frames
      const detected = seq % 11 !== 5; // and detection gaps
      const event = fakeFrame({
        seq,
        accepted,
        detected,
        label: labels[seq % labels.length],
        state: accepted && detected ? "on" : "off",
      });
      const view = session.consumeEvent(JSON.stringify(event));
      emitted += 1;

      // Distance bars must mirror the gate rule on every frame.
      if (event.decision !== null) {
        expect(view.bars).toHaveLength(4);
        for (const bar of view.bars) {
          const expected =
            bar.className === event.decision.nearest_class &&
            event.decision.distances[bar.className] <
              event.decision.effective_thresholds[bar.className];
          expect(bar.accepted).toBe(expected);
          barChecks += 1;
        }
        const anyAccepted = view.bars.some((b) => b.accepted);
        expect(anyAccepted).toBe(event.decision.accepted);
      } else {
        expect(view.bars).toHaveLength(0);
      }
    }, INTERVAL_MS);

    vi.advanceTimersByTime(DURATION_S * 1000);
    clearInterval(timer);

    expect(emitted).toBe(EVENTS_PER_SECOND * DURATION_S);
    expect(session.view.eventsRendered).toBe(emitted); // zero drops
    expect(session.view.eventsDropped).toBe(0);
    expect(session.view.staleDropped).toBe(0);
    expect(session.view.lastSeq).toBe(emitted - 1);
    expect(barChecks).toBeGreaterThan(4000);
  });

  it("puts a slider change on the wire as a v1 message within 100 ms", () => {
    vi.setSystemTime(50_000);
    const session = new DashboardSession(() => Date.now(), 2000);
    const socket = new FakeSocket(() => Date.now());

    const changedAt = Date.now();
    session.sendControl(socket, { type: "set_threshold_scale", v: 1, value: 1.5 });

    expect(socket.sent).toHaveLength(1);
    expect(JSON.parse(socket.sent[0])).toEqual({
      type: "set_threshold_scale",
      v: 1,
      value: 1.5,
    });
    expect(socket.sentAt[0] - changedAt).toBeLessThan(100);
    expect(session.controlDisabled("set_threshold_scale")).toBe(true);
  });

  it("keeps rendering while controls are in flight and recovers on ack", () => {
    let now = 0;
    const session = new DashboardSession(() => now, 2000);
    const socket = new FakeSocket(() => now);
    for (const name of CLASS_NAMES) {
      session.sendControl(socket, { type: "snapshot", v: 1, class: name });
    }
    for (let seq = 0; seq < 40; seq += 1) {
      now += INTERVAL_MS;
      session.consumeEvent(JSON.stringify(fakeFrame({ seq })));
    }
    expect(session.view.eventsRendered).toBe(40);
    session.consumeEvent(JSON.stringify({ type: "ack", v: 1, of: "snapshot" }));
    expect(session.controlDisabled("snapshot")).toBe(false);
  });
});
