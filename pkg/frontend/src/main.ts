// Experimenter console page: badges, commands, charts, arm render.

import { armGeometry } from "./armview.js";
import { StripChart } from "./charts.js";
import { HostClient } from "./client.js";
import { ConditionMode } from "./protocol.js";
import { ConsoleStore } from "./store.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function hostUrl(): string {
  const params = new URLSearchParams(location.search);
  const override = params.get("host");
  if (override) return override;
  return `ws://${location.hostname || "127.0.0.1"}:7761`;
}

function main(): void {
  const store = new ConsoleStore();
  const client = new HostClient(hostUrl(), (url) => new WebSocket(url), {
    onStatus: (status) => store.setConnection(status),
    onState: (state) => store.applyState(state),
    onEvent: (event) => store.applyEvent(event),
    onRejected: (error) => store.addToast(error),
  });

  const statusBadge = el<HTMLSpanElement>("status-badge");
  const phaseBadge = el<HTMLSpanElement>("phase-badge");
  const conditionBadge = el<HTMLSpanElement>("condition-badge");
  const manualBadge = el<HTMLSpanElement>("manual-badge");
  const countersBox = el<HTMLDivElement>("counters");
  const toastBox = el<HTMLDivElement>("toasts");
  const jointReadout = el<HTMLDivElement>("joint-readout");

  const waveChart = new StripChart(el<HTMLCanvasElement>("wave-chart"), {
    windowS: 30,
    color: "#53b1fd",
    label: "respiration (live)",
  });
  const deltaChart = new StripChart(el<HTMLCanvasElement>("delta-chart"), {
    windowS: 30,
    yMin: -1.05,
    yMax: 1.05,
    color: "#7ee08a",
    label: "normalized integration difference",
  });
  const armCanvas = el<HTMLCanvasElement>("arm-canvas");
  const armCtx = armCanvas.getContext("2d")!;

  el<HTMLButtonElement>("btn-synced").onclick = () =>
    sendCondition("synced");
  el<HTMLButtonElement>("btn-non-synced").onclick = () =>
    sendCondition("non_synced");
  el<HTMLButtonElement>("btn-off").onclick = () => sendCondition("off");
  el<HTMLButtonElement>("btn-advance").onclick = () => {
    client.advancePhase().catch((err) => store.addToast(String(err)));
  };

  function sendCondition(mode: ConditionMode): void {
    client.setCondition(mode).catch((err) => store.addToast(String(err)));
  }

  function drawArm(): void {
    const { width, height } = armCanvas;
    armCtx.clearRect(0, 0, width, height);
    armCtx.fillStyle = "#10151c";
    armCtx.fillRect(0, 0, width, height);
    if (!store.joints) return;

    const geo = armGeometry(store.joints);
    const scale = height / 3.2;
    const ox = width / 2;
    const oy = height - 24;
    const px = (p: { x: number; y: number }) => ({
      x: ox + p.x * scale,
      y: oy - p.y * scale,
    });

    // Table line and base block.
    armCtx.strokeStyle = "#2a3442";
    armCtx.beginPath();
    armCtx.moveTo(0, oy + 12);
    armCtx.lineTo(width, oy + 12);
    armCtx.stroke();
    armCtx.fillStyle = "#31405a";
    armCtx.fillRect(ox - 18, oy - 4, 36, 16);

    // Chain segments.
    armCtx.strokeStyle = "#e8a33d";
    armCtx.lineWidth = 6;
    armCtx.lineCap = "round";
    armCtx.beginPath();
    geo.chain.forEach((p, i) => {
      const q = px(p);
      if (i === 0) armCtx.moveTo(q.x, q.y);
      else armCtx.lineTo(q.x, q.y);
    });
    armCtx.stroke();

    // Joints.
    armCtx.fillStyle = "#f4d08a";
    for (const p of geo.chain) {
      const q = px(p);
      armCtx.beginPath();
      armCtx.arc(q.x, q.y, 5, 0, Math.PI * 2);
      armCtx.fill();
    }

    // Gripper fingers at the tip.
    const tip = px(geo.chain[geo.chain.length - 1]);
    const spread = 4 + geo.gripperOpen * 10;
    armCtx.strokeStyle = "#9ad1f5";
    armCtx.lineWidth = 3;
    armCtx.beginPath();
    armCtx.moveTo(tip.x - spread, tip.y - 2);
    armCtx.lineTo(tip.x - spread, tip.y - 16);
    armCtx.moveTo(tip.x + spread, tip.y - 2);
    armCtx.lineTo(tip.x + spread, tip.y - 16);
    armCtx.stroke();

    // Base rotation dial (top-down inset).
    const dial = { x: 42, y: 42, r: 22 };
    armCtx.strokeStyle = "#2a3442";
    armCtx.lineWidth = 1.5;
    armCtx.beginPath();
    armCtx.arc(dial.x, dial.y, dial.r, 0, Math.PI * 2);
    armCtx.stroke();
    const baseRad = ((geo.baseAngleDeg - 90) * Math.PI) / 180;
    armCtx.strokeStyle = "#53b1fd";
    armCtx.lineWidth = 3;
    armCtx.beginPath();
    armCtx.moveTo(dial.x, dial.y);
    armCtx.lineTo(
      dial.x + dial.r * Math.cos(baseRad),
      dial.y + dial.r * Math.sin(baseRad),
    );
    armCtx.stroke();
    armCtx.fillStyle = "#8fa3b8";
    armCtx.font = "10px monospace";
    armCtx.fillText("base", dial.x - 12, dial.y + dial.r + 12);
  }

  function render(): void {
    statusBadge.textContent = store.connection;
    statusBadge.className = `badge status-${store.connection}`;
    phaseBadge.textContent = store.phase ?? "—";
    conditionBadge.textContent = store.condition ?? "—";
    conditionBadge.className = `badge condition-${store.condition ?? "none"}`;
    manualBadge.textContent = store.manualEnabled ? "manual: on" : "manual: off";

    if (store.joints) {
      jointReadout.textContent = store.joints
        .map((a) => a.toFixed(1).padStart(6))
        .join(" ");
    }
    const counters = Object.entries(store.counters)
      .map(([k, v]) => `${k}: ${v}`)
      .join("   ");
    countersBox.textContent = counters;

    toastBox.innerHTML = "";
    const now = Date.now();
    for (const toast of store.toasts.slice(-4)) {
      if (now - toast.at > 6000) continue;
      const div = document.createElement("div");
      div.className = "toast";
      div.textContent = toast.message;
      toastBox.appendChild(div);
    }
  }

  store.subscribe(render);

  // Charts and arm redraw on the client's frame clock.
  function frame(): void {
    waveChart.draw(store.waveform);
    deltaChart.draw(store.deltaNorm);
    drawArm();
    requestAnimationFrame(frame);
  }

  client.connect();
  render();
  requestAnimationFrame(frame);
}

window.addEventListener("load", main);
