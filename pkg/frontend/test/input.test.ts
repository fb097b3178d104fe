import { describe, expect, it } from "vitest";
import { InputMapper } from "../src/input.js";

function sample(over: Partial<Parameters<InputMapper["handle"]>[0]>) {
  return { pointerId: 1, gx: 0, gy: 0, pressed: true, mirror: false, tMs: 10, ...over };
}

describe("input mapper", () => {
  it("press at the center claims finger 0", () => {
    const m = new InputMapper();
    const msgs = m.handle(sample({}));
    expect(msgs).toEqual(["finger t_ms=10.000 id=0 x=0.0000 y=0.0000 pressed=1"]);
  });

  it("out-of-disk presses are ignored", () => {
    const m = new InputMapper();
    expect(m.handle(sample({ gx: 1.4 }))).toEqual([]);
  });

  it("moves clamp to the disk edge instead of dropping", () => {
    const m = new InputMapper();
    m.handle(sample({}));
    const msgs = m.handle(sample({ gx: 1.5, gy: 0, tMs: 20 }));
    expect(msgs).toHaveLength(1);
    expect(msgs[0]).toContain("x=1.0000");
  });

  it("mirror modifier drives a symmetric second finger", () => {
    const m = new InputMapper();
    m.handle(sample({ mirror: true, gx: 0.2, gy: 0.1 }));
    const msgs = m.handle(sample({ mirror: true, gx: 0.3, gy: 0.15, tMs: 20 }));
    expect(msgs).toHaveLength(2);
    expect(msgs[0]).toContain("id=0 x=0.3000 y=0.1500 pressed=1");
    expect(msgs[1]).toContain("id=1 x=-0.3000 y=-0.1500 pressed=1");
  });

  it("mirrored drag apart makes two separating fingers", () => {
    const m = new InputMapper();
    m.handle(sample({ mirror: true, gx: 0.1, gy: 0 }));
    const a = m.handle(sample({ mirror: true, gx: 0.2, gy: 0, tMs: 20 }));
    const b = m.handle(sample({ mirror: true, gx: 0.4, gy: 0, tMs: 30 }));
    expect(a[1]).toContain("x=-0.2000");
    expect(b[1]).toContain("x=-0.4000");
  });

  it("release emits pressed=0 for every active finger", () => {
    const m = new InputMapper();
    m.handle(sample({ mirror: true, gx: 0.2, gy: 0.0 }));
    m.handle(sample({ mirror: true, gx: 0.3, gy: 0.0, tMs: 15 }));
    const msgs = m.handle(sample({ mirror: true, gx: 0.3, gy: 0.0, tMs: 20, pressed: false }));
    expect(msgs).toHaveLength(2);
    expect(msgs[0]).toContain("id=0");
    expect(msgs[0]).toContain("pressed=0");
    expect(msgs[1]).toContain("id=1");
    expect(msgs[1]).toContain("pressed=0");
  });

  it("two real pointers get distinct finger ids", () => {
    const m = new InputMapper();
    const a = m.handle(sample({ pointerId: 7, gx: -0.2 }));
    const b = m.handle(sample({ pointerId: 9, gx: 0.2, tMs: 12 }));
    expect(a[0]).toContain("id=0");
    expect(b[0]).toContain("id=1");
  });

  it("a fourth concurrent finger is not mapped", () => {
    const m = new InputMapper();
    m.handle(sample({ pointerId: 1, gx: -0.2 }));
    m.handle(sample({ pointerId: 2, gx: 0.0, tMs: 11 }));
    m.handle(sample({ pointerId: 3, gx: 0.2, tMs: 12 }));
    expect(m.handle(sample({ pointerId: 4, gx: 0.4, tMs: 13 }))).toEqual([]);
  });
});
