// End-to-end: the console's client/store against a real live host process.
//
// Covers the full secondary acceptance path: connect, moving waveform,
// Synced <-> NonSynced toggling, all phases of a two-condition session,
// and host kill/restart -> stale flag -> recovery.

import { ChildProcess, spawn } from "node:child_process";
import { createServer } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { HostClient } from "../src/client.js";
import { ConsoleStore } from "../src/store.js";
import { armGeometry } from "../src/armview.js";

const PYTHON = process.env.PYTHON ?? "python3";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer();
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address && typeof address === "object") {
        const port = address.port;
        server.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

function startHost(port: number): Promise<ChildProcess> {
  return new Promise((resolve, reject) => {
    const child = spawn(PYTHON, ["-m", "breatharm", "host", "run", "--api-port", String(port)], {
      stdio: ["ignore", "pipe", "pipe"],
    });
    let output = "";
    const onData = (chunk: Buffer) => {
      output += chunk.toString();
      if (output.includes("API: ws://")) {
        child.stdout?.off("data", onData);
        resolve(child);
      }
    };
    child.stdout?.on("data", onData);
    child.stderr?.on("data", (chunk: Buffer) => {
      output += chunk.toString();
    });
    child.on("exit", (code) => {
      if (!output.includes("API: ws://")) {
        reject(new Error(`host exited early (code ${code}):\n${output}`));
      }
    });
    setTimeout(() => reject(new Error(`host did not start:\n${output}`)), 15000);
  });
}

async function waitFor(
  predicate: () => boolean,
  what: string,
  timeoutMs = 15000,
  intervalMs = 50,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((r) => setTimeout(r, intervalMs));
  }
  throw new Error(`timed out waiting for ${what}`);
}

describe("console against a live host", () => {
  let port: number;
  let host: ChildProcess;
  let client: HostClient;
  let store: ConsoleStore;

  beforeAll(async () => {
    port = await freePort();
    host = await startHost(port);
    store = new ConsoleStore();
    client = new HostClient(
      `ws://127.0.0.1:${port}`,
      (url) => new WebSocket(url) as never,
      {
        onStatus: (s) => store.setConnection(s),
        onState: (s) => store.applyState(s),
        onEvent: (e) => store.applyEvent(e),
        onRejected: (e) => store.addToast(e),
      },
    );
    client.connect();
  }, 30000);

  afterAll(() => {
    client?.close();
    host?.kill("SIGTERM");
  });

  it("connects and reaches live status within a second", async () => {
    const start = Date.now();
    await waitFor(() => store.connection === "live", "live status", 5000);
    expect(Date.now() - start).toBeLessThan(2500);
    await waitFor(() => store.phase !== null, "initial state");
    expect(store.phase).toBe("idle");
    expect(store.condition).toBe("off");
  });

  it("displays a moving waveform from the pushed stream", async () => {
    await waitFor(
      () => store.waveformIsMoving() && store.waveform.length > 50,
      "moving waveform",
      10000,
    );
    const values = store.waveform.map((p) => p.v);
    expect(Math.max(...values) - Math.min(...values)).toBeGreaterThan(0.1);
  });

  it("renders the latest joint snapshot exactly", async () => {
    await waitFor(() => store.joints !== null, "joint snapshot");
    const geometry = armGeometry(store.joints!);
    expect(geometry.chain).toHaveLength(4);
    for (const p of geometry.chain) {
      expect(Number.isFinite(p.x) && Number.isFinite(p.y)).toBe(true);
    }
  });

  it("toggles synced <-> non-synced on host confirmation", async () => {
    const reply = await client.setCondition("synced");
    expect(reply.ok).toBe(true);
    await waitFor(() => store.condition === "synced", "synced badge");

    // Synced breathing must actually move the shoulder.
    const before = store.joints![1];
    await waitFor(
      () => store.joints![1] !== before,
      "breath-driven shoulder motion",
      10000,
    );

    await client.setCondition("non_synced");
    await waitFor(() => store.condition === "non_synced", "non-synced badge");
    await client.setCondition("synced");
    await waitFor(() => store.condition === "synced", "back to synced");
  }, 30000);

  it("advances all phases of a two-condition session", async () => {
    const seen: string[] = [];
    for (let i = 0; i < 8; i += 1) {
      const reply = await client.advancePhase();
      expect(reply.ok).toBe(true);
      seen.push(reply.state!.phase);
      await waitFor(
        () => store.phase === reply.state!.phase,
        `phase badge ${reply.state!.phase}`,
      );
    }
    expect(seen).toEqual([
      "intro",
      "acclimatization",
      "task_block",
      "questionnaire_pause",
      "acclimatization",
      "task_block",
      "questionnaire_pause",
      "complete",
    ]);
    // Entering the questionnaire pause forces the condition off.
    expect(store.condition).toBe("off");
  }, 30000);

  it("rejects an illegal advance with a toast, badge unchanged", async () => {
    const before = store.phase;
    const reply = await client.advancePhase();
    expect(reply.ok).toBe(false);
    expect(store.toasts.some((t) => t.message.includes("complete"))).toBe(true);
    expect(store.phase).toBe(before);
  });

  it("a reloaded console reconstructs identical state from the host", async () => {
    const freshStore = new ConsoleStore();
    const freshClient = new HostClient(
      `ws://127.0.0.1:${port}`,
      (url) => new WebSocket(url) as never,
      {
        onStatus: (s) => freshStore.setConnection(s),
        onState: (s) => freshStore.applyState(s),
        onEvent: (e) => freshStore.applyEvent(e),
      },
    );
    freshClient.connect();
    try {
      await waitFor(() => freshStore.phase !== null, "fresh console state");
      expect(freshStore.phase).toBe(store.phase);
      expect(freshStore.condition).toBe(store.condition);
      expect(freshStore.conditionsCompleted).toBe(store.conditionsCompleted);
    } finally {
      freshClient.close();
    }
  });

  it("wrong port surfaces an error state without crashing", async () => {
    const lost = new ConsoleStore();
    const badPort = port + 1 === 65535 ? port - 1 : port + 1;
    const badClient = new HostClient(
      `ws://127.0.0.1:${badPort}`,
      (url) => new WebSocket(url) as never,
      { onStatus: (s) => lost.setConnection(s) },
    );
    badClient.connect();
    try {
      await new Promise((r) => setTimeout(r, 1500));
      expect(lost.connection).not.toBe("live");
      expect(badClient.lastError).not.toBeNull();
    } finally {
      badClient.close();
    }
  });

  it("host kill yields stale flag, restart yields recovery", async () => {
    host.kill("SIGKILL");
    await waitFor(() => store.connection === "stale", "stale flag", 10000);

    host = await startHost(port);
    await waitFor(() => store.connection === "live", "recovery", 20000);
    // Fresh host: state rebuilt from get_state, back at idle.
    await waitFor(() => store.phase === "idle", "fresh session state", 10000);
  }, 60000);
});
