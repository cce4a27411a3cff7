import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { HostClient, WebSocketLike } from "../src/client.js";

class FakeSocket implements WebSocketLike {
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  readyState = 0;
  sent: string[] = [];

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.readyState = 3;
    this.onclose?.();
  }

  // test helpers
  serverOpen(): void {
    this.readyState = 1;
    this.onopen?.();
  }

  serverSend(message: unknown): void {
    this.onmessage?.({ data: JSON.stringify(message) });
  }

  lastRequest(): { id: number; cmd: string } {
    return JSON.parse(this.sent[this.sent.length - 1]);
  }
}

describe("HostClient", () => {
  let sockets: FakeSocket[];
  const factory = () => {
    const socket = new FakeSocket();
    sockets.push(socket);
    return socket;
  };

  beforeEach(() => {
    sockets = [];
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("sends get_state and subscribe on open", () => {
    const client = new HostClient("ws://x", factory);
    client.connect();
    sockets[0].serverOpen();
    const cmds = sockets[0].sent.map((s) => JSON.parse(s).cmd);
    expect(cmds).toEqual(["get_state", "subscribe"]);
    client.close();
  });

  it("matches responses to requests by id", async () => {
    const states: unknown[] = [];
    const client = new HostClient("ws://x", factory, {
      onState: (s) => states.push(s),
    });
    client.connect();
    const socket = sockets[0];
    socket.serverOpen();
    const promise = client.request("get_state");
    const { id } = socket.lastRequest();
    socket.serverSend({ id, ok: true, state: { phase: "idle" } });
    const reply = await promise;
    expect(reply.ok).toBe(true);
    expect(states.length).toBeGreaterThan(0);
    client.close();
  });

  it("reports rejections through onRejected", async () => {
    const rejections: string[] = [];
    const client = new HostClient("ws://x", factory, {
      onRejected: (e) => rejections.push(e),
    });
    client.connect();
    const socket = sockets[0];
    socket.serverOpen();
    const promise = client.advancePhase();
    const { id } = socket.lastRequest();
    socket.serverSend({ id, ok: false, error: "no transition from 'complete'" });
    const reply = await promise;
    expect(reply.ok).toBe(false);
    expect(rejections).toEqual(["no transition from 'complete'"]);
    client.close();
  });

  it("goes live on traffic, stale after 2 s of silence", () => {
    const statuses: string[] = [];
    const client = new HostClient("ws://x", factory, {
      onStatus: (s) => statuses.push(s),
    });
    client.connect();
    const socket = sockets[0];
    socket.serverOpen();
    socket.serverSend({ event: "joint_snapshot", t: 0, angles: [90, 90, 90, 90, 90, 40] });
    expect(client.status).toBe("live");
    vi.advanceTimersByTime(2600);
    expect(client.status).toBe("stale");
    socket.serverSend({ event: "joint_snapshot", t: 1, angles: [90, 90, 90, 90, 90, 40] });
    expect(client.status).toBe("live");
    client.close();
    expect(statuses).toContain("stale");
  });

  it("reconnects with backoff after close", () => {
    const client = new HostClient("ws://x", factory);
    client.connect();
    sockets[0].serverOpen();
    sockets[0].close();
    expect(client.status).toBe("stale");
    expect(sockets.length).toBe(1);
    vi.advanceTimersByTime(1100);
    expect(sockets.length).toBe(2);
    sockets[1].close();
    vi.advanceTimersByTime(1100);
    expect(sockets.length).toBe(2); // second retry waits 2 s
    vi.advanceTimersByTime(1000);
    expect(sockets.length).toBe(3);
    client.close();
  });

  it("no reconnect after intentional close", () => {
    const client = new HostClient("ws://x", factory);
    client.connect();
    sockets[0].serverOpen();
    client.close();
    vi.advanceTimersByTime(20000);
    expect(sockets.length).toBe(1);
    expect(client.status).toBe("closed");
  });

  it("requests fail cleanly when disconnected", async () => {
    const client = new HostClient("ws://x", factory);
    client.connect();
    await expect(client.request("get_state")).rejects.toThrow(/not connected/);
    client.close();
  });
});
