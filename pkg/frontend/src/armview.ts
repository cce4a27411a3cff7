// 2-D side-view geometry of the six-joint arm.
//
// The shoulder, elbow, and wrist form a planar chain viewed from the
// side; base rotation, wrist rotation, and gripper opening are shown as
// auxiliary indicators. Angles come straight from the latest joint
// snapshot; 90 degrees is the upright neutral for the chain joints.

export interface Point {
  x: number;
  y: number;
}

export interface ArmGeometry {
  /** Chain anchor, shoulder, elbow, wrist, tip - in drawing coordinates. */
  chain: Point[];
  baseAngleDeg: number;
  wristRotationDeg: number;
  /** Gripper opening fraction in [0, 1]. */
  gripperOpen: number;
}

export const SEGMENT_LENGTHS = { shoulder: 1.0, elbow: 0.9, wrist: 0.6 };
const GRIPPER_MIN = 10;
const GRIPPER_MAX = 73;

const DEG = Math.PI / 180;

/**
 * Joint angles (wire order) to side-view chain coordinates.
 *
 * y grows upward; the anchor sits at the origin. Each chain joint bends
 * relative to the previous segment; at the neutral pose (all 90) the arm
 * stands straight up.
 */
export function armGeometry(angles: number[]): ArmGeometry {
  if (angles.length !== 6) {
    throw new Error(`expected 6 joint angles, got ${angles.length}`);
  }
  const [base, shoulder, elbow, wrist, wristRotation, gripper] = angles;

  const anchor: Point = { x: 0, y: 0 };
  let direction = (shoulder - 90) * DEG; // 0 = straight up
  const points: Point[] = [anchor];
  let current = anchor;

  const segments: [number, number][] = [
    [SEGMENT_LENGTHS.shoulder, elbow],
    [SEGMENT_LENGTHS.elbow, wrist],
    [SEGMENT_LENGTHS.wrist, Number.NaN],
  ];

  for (const [length, nextJoint] of segments) {
    current = {
      x: current.x + length * Math.sin(direction),
      y: current.y + length * Math.cos(direction),
    };
    points.push(current);
    if (!Number.isNaN(nextJoint)) {
      direction += (nextJoint - 90) * DEG;
    }
  }

  return {
    chain: points,
    baseAngleDeg: base,
    wristRotationDeg: wristRotation,
    gripperOpen: clamp01((gripper - GRIPPER_MIN) / (GRIPPER_MAX - GRIPPER_MIN)),
  };
}

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

export function chainLength(geometry: ArmGeometry): number {
  let total = 0;
  for (let i = 1; i < geometry.chain.length; i++) {
    const a = geometry.chain[i - 1];
    const b = geometry.chain[i];
    total += Math.hypot(b.x - a.x, b.y - a.y);
  }
  return total;
}
