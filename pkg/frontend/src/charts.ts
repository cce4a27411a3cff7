// Minimal canvas strip chart for the waveform and delta-norm streams.
// Plots exactly the decimated points the host pushes; no resampling.

import { TimePoint } from "./store.js";

export interface StripChartOptions {
  windowS: number;
  yMin?: number;
  yMax?: number;
  color: string;
  label: string;
}

export class StripChart {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly options: StripChartOptions,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  draw(points: TimePoint[]): void {
    const { width, height } = this.canvas;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#10151c";
    ctx.fillRect(0, 0, width, height);
    ctx.strokeStyle = "#2a3442";
    ctx.strokeRect(0.5, 0.5, width - 1, height - 1);

    ctx.fillStyle = "#8fa3b8";
    ctx.font = "11px monospace";
    ctx.fillText(this.options.label, 8, 14);

    if (points.length < 2) return;
    const tEnd = points[points.length - 1].t;
    const tStart = tEnd - this.options.windowS;
    const visible = points.filter((p) => p.t >= tStart);
    if (visible.length < 2) return;

    let yMin = this.options.yMin;
    let yMax = this.options.yMax;
    if (yMin === undefined || yMax === undefined) {
      const values = visible.map((p) => p.v);
      const lo = Math.min(...values);
      const hi = Math.max(...values);
      const pad = (hi - lo || 1) * 0.1;
      yMin = lo - pad;
      yMax = hi + pad;
    }

    const sx = (t: number) => ((t - tStart) / this.options.windowS) * width;
    const sy = (v: number) => height - ((v - yMin!) / (yMax! - yMin!)) * height;

    ctx.strokeStyle = this.options.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    visible.forEach((p, i) => {
      if (i === 0) ctx.moveTo(sx(p.t), sy(p.v));
      else ctx.lineTo(sx(p.t), sy(p.v));
    });
    ctx.stroke();
  }
}
