import { describe, expect, it } from "vitest";

import { armGeometry, chainLength, SEGMENT_LENGTHS } from "../src/armview.js";

const TOTAL =
  SEGMENT_LENGTHS.shoulder + SEGMENT_LENGTHS.elbow + SEGMENT_LENGTHS.wrist;

describe("armGeometry", () => {
  it("neutral pose stands straight up", () => {
    const geo = armGeometry([90, 90, 90, 90, 90, 40]);
    for (const p of geo.chain) {
      expect(p.x).toBeCloseTo(0, 10);
    }
    const tip = geo.chain[geo.chain.length - 1];
    expect(tip.y).toBeCloseTo(TOTAL, 10);
  });

  it("rigid segments preserve total chain length for any pose", () => {
    const poses = [
      [0, 15, 0, 0, 0, 10],
      [180, 165, 180, 180, 180, 73],
      [90, 120, 60, 100, 90, 40],
      [45, 100, 140, 30, 10, 22],
    ];
    for (const pose of poses) {
      expect(chainLength(armGeometry(pose))).toBeCloseTo(TOTAL, 10);
    }
  });

  it("shoulder above 90 leans the arm forward", () => {
    const geo = armGeometry([90, 120, 90, 90, 90, 40]);
    expect(geo.chain[1].x).toBeGreaterThan(0);
  });

  it("gripper fraction spans its travel", () => {
    expect(armGeometry([90, 90, 90, 90, 90, 10]).gripperOpen).toBe(0);
    expect(armGeometry([90, 90, 90, 90, 90, 73]).gripperOpen).toBe(1);
    const mid = armGeometry([90, 90, 90, 90, 90, 41.5]).gripperOpen;
    expect(mid).toBeCloseTo(0.5, 10);
  });

  it("rejects wrong arity", () => {
    expect(() => armGeometry([90, 90, 90])).toThrow(/6 joint angles/);
  });

  it("angles pass through exactly (no interpolation)", () => {
    const geo = armGeometry([123, 90, 90, 90, 77, 40]);
    expect(geo.baseAngleDeg).toBe(123);
    expect(geo.wristRotationDeg).toBe(77);
  });
});
