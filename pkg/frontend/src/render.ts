/**
 * Pure view-model layer: turns a telemetry frame into drawing primitives.
 * The canvas code in main.ts just replays these, so every geometric claim
 * is testable without a DOM.
 */

import { FrameMessage } from "./codec.js";

export interface Segment {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  kind: "upper_arm" | "forearm" | "wrist_cone" | "hand";
}

export interface Gauge {
  joint: string;
  value: number | null;
  fraction: number | null; // position inside the advertised range, 0..1
}

export interface SceneView {
  segments: Segment[];
  stiffnessGauges: Gauge[];
  emg: { e1: number; e2: number };
  contactForce: number;
  knocked: string[];
  handClosure: number; // 0 open .. 1 closed
  activeJoint: string;
  mode: string;
  paused: boolean;
}

const UPPER_ARM = 0.25; // m, shoulder to elbow (drawn vertically)
const FOREARM = 0.3; // m, matches the simulated link length

/**
 * Side-view skeleton. The elbow sits at the origin with the upper arm
 * hanging above it; q_elbow = 0 is the horizontal forearm, positive
 * flexion lifts the hand (screen y grows upward here; the canvas layer
 * flips it).
 */
export function armSegments(frame: FrameMessage): Segment[] {
  const q = frame.joints["elbow"]?.q ?? 0;
  const handX = FOREARM * Math.cos(q);
  const handY = FOREARM * Math.sin(q);
  const segments: Segment[] = [
    { x0: 0, y0: UPPER_ARM, x1: 0, y1: 0, kind: "upper_arm" },
    { x0: 0, y0: 0, x1: handX, y1: handY, kind: "forearm" },
  ];
  const wfe = frame.joints["wrist_fe"]?.q;
  if (wfe !== undefined) {
    const len = 0.06;
    segments.push({
      x0: handX,
      y0: handY,
      x1: handX + len * Math.cos(q + wfe),
      y1: handY + len * Math.sin(q + wfe),
      kind: "wrist_cone",
    });
  }
  return segments;
}

export function handClosure(frame: FrameMessage): number {
  return frame.joints["hand_s1"]?.q ?? 0;
}

export function stiffnessGauges(
  frame: FrameMessage,
  ranges: Record<string, { k_range: [number, number] | null }>,
): Gauge[] {
  const gauges: Gauge[] = [];
  for (const [joint, state] of Object.entries(frame.joints)) {
    const range = ranges[joint]?.k_range ?? null;
    if (state.k_realized === null || range === null) {
      gauges.push({ joint, value: state.k_realized, fraction: null });
      continue;
    }
    const [lo, hi] = range;
    const fraction = Math.min(Math.max((state.k_realized - lo) / (hi - lo), 0), 1);
    gauges.push({ joint, value: state.k_realized, fraction });
  }
  return gauges;
}

export function renderState(
  frame: FrameMessage,
  ranges: Record<string, { k_range: [number, number] | null }>,
): SceneView {
  return {
    segments: armSegments(frame),
    stiffnessGauges: stiffnessGauges(frame, ranges),
    emg: frame.emg,
    contactForce: frame.contact_force,
    knocked: frame.knocked,
    handClosure: handClosure(frame),
    activeJoint: frame.active_joint,
    mode: frame.mode,
    paused: frame.paused,
  };
}
