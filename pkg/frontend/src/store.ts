// Console state: connection badge, latest host state, rolling buffers.
//
// Everything rendered derives from host messages; there is no client-side
// simulation of joint motion. Buffers retain at most the last 60 seconds
// of stream time.

import { ConnectionStatus } from "./client.js";
import {
  ConditionMode,
  HostEvent,
  HostState,
  Phase,
  SamplesEvent,
} from "./protocol.js";

export const BUFFER_RETENTION_S = 60;

export interface TimePoint {
  t: number;
  v: number;
}

export interface Toast {
  message: string;
  at: number;
}

export class ConsoleStore {
  connection: ConnectionStatus = "connecting";
  phase: Phase | null = null;
  condition: ConditionMode | null = null;
  manualEnabled = true;
  conditionsCompleted = 0;
  joints: number[] | null = null;
  jointsAt = 0;
  counters: Record<string, number> = {};
  bounds: { min: number; max: number } | null = null;
  sessionId: string | null = null;

  waveform: TimePoint[] = [];
  deltaNorm: TimePoint[] = [];
  toasts: Toast[] = [];
  taskMarkers: { t: number; label: string }[] = [];

  private listeners = new Set<() => void>();

  subscribe(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  setConnection(status: ConnectionStatus): void {
    this.connection = status;
    this.notify();
  }

  /** Full state from get_state or a confirmed command response. */
  applyState(state: HostState): void {
    this.phase = state.phase;
    this.condition = state.condition;
    this.manualEnabled = state.manual_enabled;
    this.conditionsCompleted = state.conditions_completed;
    this.joints = state.joints;
    this.counters = state.counters;
    this.bounds = state.bounds;
    this.sessionId = state.session_id;
    this.notify();
  }

  addToast(message: string): void {
    this.toasts.push({ message, at: Date.now() });
    if (this.toasts.length > 8) this.toasts.shift();
    this.notify();
  }

  applyEvent(event: HostEvent): void {
    switch (event.event) {
      case "samples": {
        const batch = event as SamplesEvent;
        batch.values.forEach((v, i) => {
          this.waveform.push({ t: batch.t0 + i * batch.dt, v });
        });
        this.trim(this.waveform);
        break;
      }
      case "breath_frame": {
        const t = event.t as number;
        if ((event as { source?: string }).source === "live") {
          this.deltaNorm.push({ t, v: (event as { delta_norm: number }).delta_norm });
          this.trim(this.deltaNorm);
        }
        break;
      }
      case "joint_snapshot": {
        this.joints = (event as { angles: number[] }).angles;
        this.jointsAt = event.t as number;
        break;
      }
      case "phase_change": {
        this.phase = (event as { to: Phase }).to;
        this.manualEnabled = this.phase !== "acclimatization";
        break;
      }
      case "condition_change": {
        this.condition = (event as { to: ConditionMode }).to;
        break;
      }
      case "task_marker": {
        this.taskMarkers.push({
          t: event.t as number,
          label: String((event as Record<string, unknown>).label),
        });
        break;
      }
      default:
        break;
    }
    this.notify();
  }

  private trim(buffer: TimePoint[]): void {
    if (buffer.length === 0) return;
    const cutoff = buffer[buffer.length - 1].t - BUFFER_RETENTION_S;
    let drop = 0;
    while (drop < buffer.length && buffer[drop].t < cutoff) drop += 1;
    if (drop > 0) buffer.splice(0, drop);
  }

  /** True when the waveform shows recent, non-constant signal. */
  waveformIsMoving(windowS = 3): boolean {
    if (this.waveform.length < 10) return false;
    const tail = this.waveform.slice(-Math.ceil(windowS / 0.02));
    const values = tail.map((p) => p.v);
    return Math.max(...values) - Math.min(...values) > 1e-9;
  }
}
