/**
 * Rolling energy history and its canvas painter, kept apart so the data
 * model is checkable headless.  Mirrors the simulation's energy plots:
 * total energy with its bending and self-avoidance parts.
 */

import { Diagnostics } from "./protocol.js";

export interface EnergyPoint {
  step: number;
  e_total: number;
  e_bend: number;
  e_tp_weighted: number;
}

export const SERIES: ReadonlyArray<{
  key: keyof Omit<EnergyPoint, "step">;
  label: string;
  color: string;
}> = [
  { key: "e_total", label: "total", color: "#1f2430" },
  { key: "e_bend", label: "bending", color: "#2458d8" },
  { key: "e_tp_weighted", label: "self-avoidance", color: "#d8a000" },
];

export class EnergyHistory {
  private points: EnergyPoint[] = [];

  constructor(readonly capacity = 20000) {
    if (capacity < 2) {
      throw new Error("capacity must be at least 2");
    }
  }

  /**
   * Append one diagnostics row.  A repeated step (a reset broadcast or a
   * duplicate on subscribe) replaces history from that step onward, so the
   * chart always shows a single run.
   */
  push(d: Diagnostics): void {
    while (
      this.points.length > 0 &&
      this.points[this.points.length - 1].step >= d.step
    ) {
      this.points.pop();
    }
    this.points.push({
      step: d.step,
      e_total: d.e_total,
      e_bend: d.e_bend,
      e_tp_weighted: d.e_tp_weighted,
    });
    if (this.points.length > this.capacity) {
      // keep every other retained point: halves memory, keeps the envelope
      this.points = this.points.filter(
        (_, i) => i % 2 === 0 || i >= this.points.length - 16,
      );
    }
  }

  get size(): number {
    return this.points.length;
  }

  last(): EnergyPoint | undefined {
    return this.points[this.points.length - 1];
  }

  all(): readonly EnergyPoint[] {
    return this.points;
  }

  clear(): void {
    this.points = [];
  }
}

/** Axis-fitting paint routine; layout only, no data policy. */
export function paintChart(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  history: EnergyHistory,
): void {
  ctx.clearRect(0, 0, width, height);
  const points = history.all();
  if (points.length < 2) return;

  const margin = { left: 48, right: 8, top: 8, bottom: 22 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const x0 = points[0].step;
  const x1 = points[points.length - 1].step;
  let lo = Infinity;
  let hi = -Infinity;
  for (const p of points) {
    for (const s of SERIES) {
      lo = Math.min(lo, p[s.key]);
      hi = Math.max(hi, p[s.key]);
    }
  }
  if (hi - lo < 1e-12) {
    hi = lo + 1;
  }
  const toX = (step: number) =>
    margin.left + ((step - x0) / Math.max(1, x1 - x0)) * plotW;
  const toY = (value: number) =>
    margin.top + (1 - (value - lo) / (hi - lo)) * plotH;

  ctx.strokeStyle = "#c8ccd4";
  ctx.lineWidth = 1;
  ctx.strokeRect(margin.left, margin.top, plotW, plotH);

  ctx.font = "11px sans-serif";
  ctx.fillStyle = "#5a6070";
  ctx.fillText(hi.toPrecision(4), 4, margin.top + 10);
  ctx.fillText(lo.toPrecision(4), 4, margin.top + plotH);
  ctx.fillText(`step ${x1}`, width - margin.right - 64, height - 6);

  for (const s of SERIES) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.key === "e_total" ? 1.8 : 1.2;
    ctx.beginPath();
    points.forEach((p, i) => {
      const x = toX(p.step);
      const y = toY(p[s.key]);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
}
