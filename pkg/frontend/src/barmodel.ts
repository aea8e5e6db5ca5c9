// Per-class distance-vs-threshold bars for one frame decision.

import { CLASS_NAMES, FrameDecision } from "./protocol.js";

export interface DistanceBar {
  className: string;
  distance: number;
  threshold: number;
  /** This class is the nearest reference. */
  nearest: boolean;
  /** Accept rule, mirrored from the gate: nearest and strictly inside. */
  accepted: boolean;
  /** Bar length relative to its threshold, capped for rendering. */
  fill: number;
}

export function distanceBars(decision: FrameDecision): DistanceBar[] {
  return CLASS_NAMES.map((name) => {
    const distance = decision.distances[name];
    const threshold = decision.effective_thresholds[name];
    const nearest = decision.nearest_class === name;
    return {
      className: name,
      distance,
      threshold,
      nearest,
      accepted: nearest && distance < threshold,
      fill: threshold > 0 ? Math.min(distance / threshold, 2.0) : 2.0,
    };
  });
}
