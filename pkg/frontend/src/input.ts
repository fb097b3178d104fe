// Pointer handling: maps pointer events to finger messages. Multi-touch
// pointers take finger ids 0..2; with the mirror modifier (Shift) a mouse
// drag controls finger 0 plus a second finger mirrored through the gel
// center, enabling Pinch/Zoom/Twist without a touchscreen.

import { fingerLine } from "./protocol.js";
import { insideDisk, mirrorPoint } from "./gel.js";

export interface PointerSample {
  pointerId: number;
  gx: number; // normalized gel coordinates (y up)
  gy: number;
  pressed: boolean;
  mirror: boolean; // modifier held
  tMs: number;
}

const MIRROR_ID = 1;

export class InputMapper {
  private ids = new Map<number, number>();
  private mirrorActive = false;

  /** Translate one pointer sample into zero or more wire messages. */
  handle(sample: PointerSample): string[] {
    const out: string[] = [];
    const known = this.ids.has(sample.pointerId);
    if (sample.pressed && !known) {
      if (!insideDisk(sample.gx, sample.gy)) return out; // press outside: ignore
      const id = this.allocate(sample.mirror);
      if (id === null) return out;
      this.ids.set(sample.pointerId, id);
    }
    const fid = this.ids.get(sample.pointerId);
    if (fid === undefined) return out;

    if (!sample.pressed) {
      this.ids.delete(sample.pointerId);
      out.push(fingerLine(sample.tMs, fid, sample.gx, sample.gy, false));
      if (this.mirrorActive && fid === 0) {
        const [mx, my] = mirrorPoint(sample.gx, sample.gy);
        out.push(fingerLine(sample.tMs, MIRROR_ID, mx, my, false));
        this.mirrorActive = false;
      }
      return out;
    }

    // Clamp moves to the disk edge so a drag can leave the circle without
    // tearing the gesture.
    let { gx, gy } = sample;
    const r = Math.hypot(gx, gy);
    if (r > 1) {
      gx /= r;
      gy /= r;
    }
    out.push(fingerLine(sample.tMs, fid, gx, gy, true));
    if (fid === 0) {
      if (sample.mirror && !this.ids_has_value(MIRROR_ID)) {
        const [mx, my] = mirrorPoint(gx, gy);
        out.push(fingerLine(sample.tMs, MIRROR_ID, mx, my, true));
        this.mirrorActive = true;
      } else if (this.mirrorActive) {
        if (sample.mirror) {
          const [mx, my] = mirrorPoint(gx, gy);
          out.push(fingerLine(sample.tMs, MIRROR_ID, mx, my, true));
        } else {
          const [mx, my] = mirrorPoint(gx, gy);
          out.push(fingerLine(sample.tMs, MIRROR_ID, mx, my, false));
          this.mirrorActive = false;
        }
      }
    }
    return out;
  }

  /** Release everything (e.g. pointer capture lost). */
  releaseAll(tMs: number, lastPositions: Map<number, [number, number]>): string[] {
    const out: string[] = [];
    for (const [, fid] of this.ids) {
      const pos = lastPositions.get(fid) ?? [0, 0];
      out.push(fingerLine(tMs, fid, pos[0], pos[1], false));
    }
    if (this.mirrorActive) {
      const pos = lastPositions.get(MIRROR_ID) ?? [0, 0];
      out.push(fingerLine(tMs, MIRROR_ID, pos[0], pos[1], false));
      this.mirrorActive = false;
    }
    this.ids.clear();
    return out;
  }

  private ids_has_value(fid: number): boolean {
    for (const v of this.ids.values()) if (v === fid) return true;
    return false;
  }

  private allocate(mirror: boolean): number | null {
    const used = new Set(this.ids.values());
    if (this.mirrorActive || mirror) used.add(MIRROR_ID);
    for (let id = 0; id < 3; id += 1) {
      if (!used.has(id)) return id;
    }
    return null;
  }
}
