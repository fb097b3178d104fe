import { describe, expect, it } from "vitest";
import { Detection } from "../src/protocol.js";
import { applyDetection, initialState } from "../src/state.js";

function det(over: Partial<Detection>): Detection {
  return {
    tUs: 10000, type: "NoGesture", points: [], intensityMm: 0,
    outliers: 0, resting: true, eventsPos: 0, eventsNeg: 0, ...over,
  };
}

describe("ui state", () => {
  it("keeps the latest detection and counts them", () => {
    const s = initialState();
    applyDetection(s, det({ type: "Push", intensityMm: 2 }));
    applyDetection(s, det({ tUs: 20000, type: "Zoom", intensityMm: 3 }));
    expect(s.lastDetection!.type).toBe("Zoom");
    expect(s.detectionsSeen).toBe(2);
  });

  it("marker snapshots persist between decimated pushes", () => {
    const s = initialState();
    applyDetection(s, det({ markers: [[0, 0], [0.1, 0.1]] }));
    applyDetection(s, det({ tUs: 20000 }));
    expect(s.markers).toHaveLength(2);
  });

  it("twist detections rotate the demo object", () => {
    const s = initialState();
    applyDetection(s, det({ type: "TwistCCW", s: 1.0, theta: 0.5, tx: 0, ty: 0 }));
    expect(s.pose.angle).toBeGreaterThan(0);
    const before = s.pose.angle;
    applyDetection(s, det({ tUs: 20000, type: "TwistCW", s: 1.0, theta: -0.5, tx: 0, ty: 0 }));
    expect(s.pose.angle).toBeLessThan(before);
  });

  it("push detections translate the demo object", () => {
    const s = initialState();
    applyDetection(s, det({ type: "Push", s: 1.0, theta: 0, tx: 0.4, ty: 0.1 }));
    expect(s.pose.x).toBeGreaterThan(0);
    expect(s.pose.y).toBeGreaterThan(0);
  });

  it("zoom scales up, pinch scales down", () => {
    const s = initialState();
    applyDetection(s, det({ type: "Zoom", s: 1.4, theta: 0, tx: 0, ty: 0 }));
    expect(s.pose.scale).toBeGreaterThan(1);
    const sc = s.pose.scale;
    applyDetection(s, det({ tUs: 20000, type: "Pinch", s: 0.6, theta: 0, tx: 0, ty: 0 }));
    expect(s.pose.scale).toBeLessThan(sc);
  });

  it("no-gesture detections leave the pose untouched", () => {
    const s = initialState();
    applyDetection(s, det({}));
    expect(s.pose).toEqual({ x: 0, y: 0, angle: 0, scale: 1 });
  });
});
