import { describe, expect, it } from "vitest";

import { meanEdge, tubeGeometry } from "../src/tube.js";

function circlePositions(n: number, radius: number): number[] {
  const flat: number[] = [];
  for (let i = 0; i < n; i++) {
    const t = (2 * Math.PI * i) / n;
    flat.push(radius * Math.cos(t), radius * Math.sin(t), 0);
  }
  return flat;
}

/** Closed curve with torsion, so the transported frame picks up holonomy. */
function torusKnotPositions(n: number): number[] {
  const flat: number[] = [];
  for (let i = 0; i < n; i++) {
    const t = (2 * Math.PI * i) / n;
    const w = 2 + Math.cos(3 * t);
    flat.push(w * Math.cos(2 * t), w * Math.sin(2 * t), Math.sin(3 * t));
  }
  return flat;
}

function flatColors(n: number): Float32Array {
  const c = new Float32Array(3 * n);
  for (let i = 0; i < n; i++) {
    c[3 * i] = i / n;
    c[3 * i + 1] = 0.5;
    c[3 * i + 2] = 1 - i / n;
  }
  return c;
}

describe("tubeGeometry", () => {
  it("sizes buffers for a closed quad strip", () => {
    const n = 40;
    const seg = 12;
    const tube = tubeGeometry(circlePositions(n, 3), flatColors(n), undefined, seg);
    expect(tube.ringCount).toBe(n);
    expect(tube.positions.length).toBe(n * seg * 3);
    expect(tube.normals.length).toBe(n * seg * 3);
    expect(tube.colors.length).toBe(n * seg * 3);
    expect(tube.indices.length).toBe(n * seg * 6);
    for (const idx of tube.indices) {
      expect(idx).toBeGreaterThanOrEqual(0);
      expect(idx).toBeLessThan(n * seg);
    }
  });

  it("places every ring vertex at the tube radius with unit outward normals", () => {
    const n = 40;
    const flat = circlePositions(n, 3);
    const r = 0.2;
    const tube = tubeGeometry(flat, flatColors(n), r, 10);
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < 10; j++) {
        const k = i * 10 + j;
        let dist2 = 0;
        let nrm2 = 0;
        for (let axis = 0; axis < 3; axis++) {
          const d = tube.positions[3 * k + axis] - flat[3 * i + axis];
          dist2 += d * d;
          nrm2 += tube.normals[3 * k + axis] ** 2;
        }
        expect(Math.sqrt(dist2)).toBeCloseTo(r, 5);
        expect(Math.sqrt(nrm2)).toBeCloseTo(1, 5);
      }
    }
  });

  it("defaults the radius to a fraction of the mean edge", () => {
    const n = 60;
    const flat = circlePositions(n, 5);
    const tube = tubeGeometry(flat, flatColors(n));
    let dist2 = 0;
    for (let axis = 0; axis < 3; axis++) {
      const d = tube.positions[axis] - flat[axis];
      dist2 += d * d;
    }
    expect(Math.sqrt(dist2)).toBeCloseTo(0.45 * meanEdge(flat), 5);
  });

  it("gives every vertex of a ring its node's color", () => {
    const n = 16;
    const colors = flatColors(n);
    const tube = tubeGeometry(circlePositions(n, 2), colors, 0.1, 8);
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < 8; j++) {
        const k = i * 8 + j;
        expect(tube.colors[3 * k]).toBeCloseTo(colors[3 * i], 6);
        expect(tube.colors[3 * k + 1]).toBeCloseTo(colors[3 * i + 1], 6);
        expect(tube.colors[3 * k + 2]).toBeCloseTo(colors[3 * i + 2], 6);
      }
    }
  });

  it("closes the seam as tightly as any interior ring gap", () => {
    const n = 120;
    const seg = 12;
    const tube = tubeGeometry(torusKnotPositions(n), flatColors(n), 0.08, seg);
    const ringGap = (i: number, iNext: number): number => {
      let worst = 0;
      for (let j = 0; j < seg; j++) {
        const a = i * seg + j;
        const b = iNext * seg + j;
        let d2 = 0;
        for (let axis = 0; axis < 3; axis++) {
          const d = tube.positions[3 * a + axis] - tube.positions[3 * b + axis];
          d2 += d * d;
        }
        worst = Math.max(worst, Math.sqrt(d2));
      }
      return worst;
    };
    let interior = 0;
    for (let i = 0; i + 1 < n; i++) {
      interior = Math.max(interior, ringGap(i, i + 1));
    }
    expect(ringGap(n - 1, 0)).toBeLessThanOrEqual(interior * 1.5);
  });

  it("rejects degenerate input", () => {
    expect(() => tubeGeometry([0, 0, 0, 1, 1, 1], flatColors(2))).toThrow(
      "at least 3 nodes",
    );
    expect(() =>
      tubeGeometry(circlePositions(5, 1), new Float32Array(6)),
    ).toThrow("per node");
  });
});
