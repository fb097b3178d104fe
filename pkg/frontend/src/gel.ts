// Canvas <-> gel coordinate mapping. Gel coordinates are x right / y up
// with the origin at the gel center and the gel radius as the unit, so the
// y axis flips relative to canvas pixels.

export interface GelView {
  cx: number; // canvas x of the gel center
  cy: number;
  radius: number; // gel radius in canvas px
}

export function canvasToGel(view: GelView, px: number, py: number): [number, number] {
  return [(px - view.cx) / view.radius, (view.cy - py) / view.radius];
}

export function gelToCanvas(view: GelView, gx: number, gy: number): [number, number] {
  return [view.cx + gx * view.radius, view.cy - gy * view.radius];
}

export function insideDisk(gx: number, gy: number, slack = 0.0): boolean {
  return gx * gx + gy * gy <= (1 + slack) * (1 + slack);
}

export function mirrorPoint(gx: number, gy: number): [number, number] {
  return [-gx, -gy];
}
