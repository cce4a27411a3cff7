// WebSocket client for the host API: request/response matching, event
// dispatch, stale detection, and reconnect with capped backoff.
//
// The host is the source of truth: the client never mutates UI state on
// its own; it only relays confirmed states and pushed events.

import { Backoff } from "./backoff.js";
import {
  CommandResponse,
  ConditionMode,
  HostEvent,
  HostState,
  isEventMessage,
  isResponseMessage,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "live" | "stale" | "closed";

/** Minimal surface shared by the browser WebSocket and the `ws` package.
 * Handler params are typed loosely; both implementations disagree on the
 * exact event shapes and the client never relies on them. */
export interface WebSocketLike {
  onopen: ((ev?: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev?: any) => void) | null;
  onerror: ((ev?: any) => void) | null;
  send(data: string): void;
  close(): void;
  readyState: number;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface ClientHandlers {
  onStatus?: (status: ConnectionStatus) => void;
  onState?: (state: HostState) => void;
  onEvent?: (event: HostEvent) => void;
  onRejected?: (error: string) => void;
}

const STALE_AFTER_MS = 2000;
const REQUEST_TIMEOUT_MS = 5000;

interface PendingRequest {
  resolve: (response: CommandResponse) => void;
  reject: (err: Error) => void;
  timer: ReturnType<typeof setTimeout>;
}

export class HostClient {
  readonly url: string;
  status: ConnectionStatus = "connecting";
  lastError: string | null = null;

  private readonly factory: WebSocketFactory;
  private readonly handlers: ClientHandlers;
  private readonly backoff = new Backoff();
  private socket: WebSocketLike | null = null;
  private nextId = 1;
  private pending = new Map<number, PendingRequest>();
  private lastMessageAt = 0;
  private staleTimer: ReturnType<typeof setInterval> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(url: string, factory: WebSocketFactory, handlers: ClientHandlers = {}) {
    this.url = url;
    this.factory = factory;
    this.handlers = handlers;
  }

  connect(): void {
    this.closed = false;
    this.open();
    if (this.staleTimer === null) {
      this.staleTimer = setInterval(() => this.checkStale(), 250);
    }
  }

  /** Intentional shutdown; no reconnect afterwards. */
  close(): void {
    this.closed = true;
    if (this.staleTimer !== null) {
      clearInterval(this.staleTimer);
      this.staleTimer = null;
    }
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.failAllPending("client closed");
    this.socket?.close();
    this.socket = null;
    this.setStatus("closed");
  }

  private open(): void {
    let socket: WebSocketLike;
    try {
      socket = this.factory(this.url);
    } catch (err) {
      this.lastError = String(err);
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;

    socket.onopen = () => {
      this.backoff.reset();
      this.lastMessageAt = Date.now();
      // Rebuild full state from the host, then follow the stream.
      void this.request("get_state").catch(() => undefined);
      void this.request("subscribe").catch(() => undefined);
    };
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onerror = (ev: unknown) => {
      const message = (ev as { message?: string })?.message;
      this.lastError = message ?? "socket error";
    };
    socket.onclose = () => {
      this.failAllPending("connection closed");
      if (!this.closed) {
        this.setStatus("stale");
        this.scheduleReconnect();
      }
    };
  }

  private scheduleReconnect(): void {
    if (this.closed || this.reconnectTimer !== null) return;
    const delay = this.backoff.next();
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      if (!this.closed) this.open();
    }, delay);
  }

  private checkStale(): void {
    if (this.status === "live" && Date.now() - this.lastMessageAt > STALE_AFTER_MS) {
      this.setStatus("stale");
    }
  }

  private setStatus(status: ConnectionStatus): void {
    if (status === this.status) return;
    this.status = status;
    this.handlers.onStatus?.(status);
  }

  private handleMessage(raw: string): void {
    this.lastMessageAt = Date.now();
    if (this.status !== "live") this.setStatus("live");
    let message: unknown;
    try {
      message = JSON.parse(raw);
    } catch {
      return; // non-JSON frames are ignored
    }
    if (isResponseMessage(message)) {
      const pending = this.pending.get(message.id);
      if (pending) {
        this.pending.delete(message.id);
        clearTimeout(pending.timer);
        pending.resolve(message);
      }
      if (message.ok && message.state) this.handlers.onState?.(message.state);
      if (!message.ok && message.error) this.handlers.onRejected?.(message.error);
      return;
    }
    if (isEventMessage(message)) {
      this.handlers.onEvent?.(message);
    }
  }

  private failAllPending(reason: string): void {
    for (const [, pending] of this.pending) {
      clearTimeout(pending.timer);
      pending.reject(new Error(reason));
    }
    this.pending.clear();
  }

  request(cmd: string, extra: Record<string, unknown> = {}): Promise<CommandResponse> {
    const socket = this.socket;
    if (!socket || socket.readyState !== 1) {
      return Promise.reject(new Error("not connected"));
    }
    const id = this.nextId++;
    return new Promise<CommandResponse>((resolve, reject) => {
      const timer = setTimeout(() => {
        this.pending.delete(id);
        reject(new Error(`request ${cmd} timed out`));
      }, REQUEST_TIMEOUT_MS);
      this.pending.set(id, { resolve, reject, timer });
      try {
        socket.send(JSON.stringify({ id, cmd, ...extra }));
      } catch (err) {
        this.pending.delete(id);
        clearTimeout(timer);
        reject(err instanceof Error ? err : new Error(String(err)));
      }
    });
  }

  setCondition(mode: ConditionMode): Promise<CommandResponse> {
    return this.request("set_condition", { mode });
  }

  advancePhase(): Promise<CommandResponse> {
    return this.request("advance_phase");
  }

  getState(): Promise<CommandResponse> {
    return this.request("get_state");
  }
}
