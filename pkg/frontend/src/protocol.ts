// Message types for the host's experimenter API (WebSocket, JSON).

export type ConditionMode = "off" | "synced" | "non_synced";

export type Phase =
  | "idle"
  | "intro"
  | "acclimatization"
  | "task_block"
  | "questionnaire_pause"
  | "complete";

/** Snapshot returned by get_state and attached to command responses. */
export interface HostState {
  session_id: string;
  t: number;
  phase: Phase;
  phase_remaining_s: number | null;
  condition: ConditionMode;
  conditions_completed: number;
  manual_enabled: boolean;
  joints: number[];
  bounds: { min: number; max: number } | null;
  counters: Record<string, number>;
}

export interface CommandResponse {
  id: number;
  ok: boolean;
  state?: HostState;
  error?: string;
}

/** Pushed after subscribe; mirrors the host's event log, decimated. */
export interface SamplesEvent {
  event: "samples";
  t0: number;
  dt: number;
  source: string;
  values: number[];
}

export interface JointSnapshotEvent {
  event: "joint_snapshot";
  t: number;
  angles: number[];
}

export interface BreathFrameEvent {
  event: "breath_frame";
  t: number;
  source: string;
  window_index: number;
  delta_norm: number;
  shoulder_deg: number;
  elbow_deg: number;
  clamped: boolean;
}

export interface PhaseChangeEvent {
  event: "phase_change";
  t: number;
  from: Phase;
  to: Phase;
  duration_s?: number;
  tasks?: string[];
}

export interface ConditionChangeEvent {
  event: "condition_change";
  t: number;
  from: ConditionMode;
  to: ConditionMode;
}

export interface GenericEvent {
  event: string;
  t?: number;
  [key: string]: unknown;
}

export type HostEvent =
  | SamplesEvent
  | JointSnapshotEvent
  | BreathFrameEvent
  | PhaseChangeEvent
  | ConditionChangeEvent
  | GenericEvent;

export function isEventMessage(msg: unknown): msg is HostEvent {
  return typeof msg === "object" && msg !== null && "event" in msg;
}

export function isResponseMessage(msg: unknown): msg is CommandResponse {
  return typeof msg === "object" && msg !== null && "id" in msg && "ok" in msg;
}

export const JOINT_NAMES = [
  "base",
  "shoulder",
  "elbow",
  "wrist",
  "wrist_rotation",
  "gripper",
] as const;
