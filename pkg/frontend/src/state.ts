// Client-side state: connection, the latest detection, marker snapshot, and
// the demo object pose. Every label shown comes from a server detection;
// the client never classifies anything itself.

import { Detection } from "./protocol.js";

export interface DemoPose {
  x: number; // normalized gel units
  y: number;
  angle: number; // radians, counter-clockwise on screen
  scale: number;
}

export interface UiState {
  connected: boolean;
  lastDetection: Detection | null;
  markers: [number, number][];
  fingers: Map<number, [number, number]>;
  pose: DemoPose;
  detectionsSeen: number;
  eventRate: { pos: number; neg: number };
}

export function initialState(): UiState {
  return {
    connected: false,
    lastDetection: null,
    markers: [],
    fingers: new Map(),
    pose: { x: 0, y: 0, angle: 0, scale: 1 },
    detectionsSeen: 0,
    eventRate: { pos: 0, neg: 0 },
  };
}

const RATE_SMOOTH = 0.85;

export function applyDetection(state: UiState, det: Detection): void {
  state.lastDetection = det;
  state.detectionsSeen += 1;
  if (det.markers) state.markers = det.markers;
  state.eventRate.pos = RATE_SMOOTH * state.eventRate.pos + (1 - RATE_SMOOTH) * det.eventsPos;
  state.eventRate.neg = RATE_SMOOTH * state.eventRate.neg + (1 - RATE_SMOOTH) * det.eventsNeg;
  updatePose(state.pose, det);
}

// The detection's transform describes the current total deformation, so it
// drives the demo object as a rate: hold a twist and the object keeps
// turning, press harder and it turns faster.
const POSE_GAIN = 0.08;

export function updatePose(pose: DemoPose, det: Detection): void {
  if (det.type === "NoGesture" || det.s === undefined) return;
  pose.angle += POSE_GAIN * (det.theta ?? 0);
  const ds = (det.s ?? 1) - 1;
  pose.scale *= 1 + POSE_GAIN * ds;
  pose.scale = Math.min(Math.max(pose.scale, 0.3), 3.0);
  pose.x += POSE_GAIN * (det.tx ?? 0);
  pose.y += POSE_GAIN * (det.ty ?? 0);
  pose.x = Math.min(Math.max(pose.x, -1), 1);
  pose.y = Math.min(Math.max(pose.y, -1), 1);
}
