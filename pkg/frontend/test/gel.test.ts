import { describe, expect, it } from "vitest";
import { canvasToGel, gelToCanvas, insideDisk, mirrorPoint } from "../src/gel.js";

const view = { cx: 260, cy: 260, radius: 220 };

describe("gel coordinates", () => {
  it("round trips canvas <-> gel", () => {
    const [gx, gy] = canvasToGel(view, 300, 200);
    const [px, py] = gelToCanvas(view, gx, gy);
    expect(px).toBeCloseTo(300);
    expect(py).toBeCloseTo(200);
  });

  it("is y-up: moving up the canvas increases gy", () => {
    const [, gyHigh] = canvasToGel(view, 260, 100);
    const [, gyLow] = canvasToGel(view, 260, 400);
    expect(gyHigh).toBeGreaterThan(0);
    expect(gyLow).toBeLessThan(0);
  });

  it("center maps to the origin", () => {
    expect(canvasToGel(view, 260, 260)).toEqual([0, 0]);
  });

  it("disk check", () => {
    expect(insideDisk(0, 0)).toBe(true);
    expect(insideDisk(0.9, 0.3)).toBe(true);
    expect(insideDisk(1.2, 0)).toBe(false);
  });

  it("mirror flips through the center", () => {
    expect(mirrorPoint(0.3, -0.4)).toEqual([-0.3, 0.4]);
  });
});
