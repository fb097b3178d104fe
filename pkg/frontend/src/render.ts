// Canvas rendering: the gel with live markers and contact points on the
// left, the transform-driven demo object on the right.

import { GelView, gelToCanvas } from "./gel.js";
import { UiState } from "./state.js";

export function drawFrame(ctx: CanvasRenderingContext2D, view: GelView,
                          state: UiState, width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);

  // gel disk
  ctx.fillStyle = "#101014";
  ctx.beginPath();
  ctx.arc(view.cx, view.cy, view.radius, 0, 2 * Math.PI);
  ctx.fill();
  ctx.strokeStyle = "#3a3a46";
  ctx.lineWidth = 2;
  ctx.stroke();

  // markers
  ctx.fillStyle = "#e8e8e0";
  for (const [gx, gy] of state.markers) {
    const [px, py] = gelToCanvas(view, gx, gy);
    ctx.beginPath();
    ctx.arc(px, py, 2.2, 0, 2 * Math.PI);
    ctx.fill();
  }

  // local finger echoes
  ctx.strokeStyle = "rgba(140, 180, 255, 0.8)";
  ctx.lineWidth = 1.5;
  for (const [, [gx, gy]] of state.fingers) {
    const [px, py] = gelToCanvas(view, gx, gy);
    ctx.beginPath();
    ctx.arc(px, py, 14, 0, 2 * Math.PI);
    ctx.stroke();
  }

  const det = state.lastDetection;
  if (det) {
    // contact points from the server
    ctx.strokeStyle = "#ff5f87";
    ctx.lineWidth = 2.5;
    for (const [gx, gy] of det.points) {
      const [px, py] = gelToCanvas(view, gx, gy);
      ctx.beginPath();
      ctx.moveTo(px - 8, py);
      ctx.lineTo(px + 8, py);
      ctx.moveTo(px, py - 8);
      ctx.lineTo(px, py + 8);
      ctx.stroke();
    }
  }

  drawDemoObject(ctx, state, width);
}

function drawDemoObject(ctx: CanvasRenderingContext2D, state: UiState,
                        width: number): void {
  const cx = width - 130;
  const cy = 130;
  const pose = state.pose;
  ctx.save();
  ctx.strokeStyle = "#2e2e38";
  ctx.strokeRect(width - 240, 20, 220, 220);
  ctx.translate(cx + pose.x * 90, cy - pose.y * 90);
  ctx.rotate(-pose.angle); // canvas angles are clockwise-positive
  ctx.scale(pose.scale, pose.scale);
  ctx.fillStyle = "#7ee787";
  ctx.beginPath();
  ctx.moveTo(0, -22);
  ctx.lineTo(14, 16);
  ctx.lineTo(0, 8);
  ctx.lineTo(-14, 16);
  ctx.closePath();
  ctx.fill();
  ctx.restore();
}

export function statusText(state: UiState): string {
  const det = state.lastDetection;
  if (!det) return "waiting for detections";
  return det.type;
}

export function intensityFraction(state: UiState, maxMm = 18.0): number {
  const det = state.lastDetection;
  if (!det) return 0;
  return Math.min(det.intensityMm / maxMm, 1);
}
