import { describe, expect, it } from "vitest";

import { BLUE, CurvatureScale, YELLOW, blueYellow } from "../src/colormap.js";

function expectRgbClose(actual: { r: number; g: number; b: number }, wanted: { r: number; g: number; b: number }) {
  expect(actual.r).toBeCloseTo(wanted.r, 12);
  expect(actual.g).toBeCloseTo(wanted.g, 12);
  expect(actual.b).toBeCloseTo(wanted.b, 12);
}

describe("blueYellow", () => {
  it("hits the endpoints and clamps outside [0, 1]", () => {
    expectRgbClose(blueYellow(0), BLUE);
    expectRgbClose(blueYellow(1), YELLOW);
    expectRgbClose(blueYellow(-3), BLUE);
    expectRgbClose(blueYellow(7), YELLOW);
  });

  it("interpolates each channel linearly", () => {
    const mid = blueYellow(0.5);
    expect(mid.r).toBeCloseTo((BLUE.r + YELLOW.r) / 2, 12);
    expect(mid.g).toBeCloseTo((BLUE.g + YELLOW.g) / 2, 12);
    expect(mid.b).toBeCloseTo((BLUE.b + YELLOW.b) / 2, 12);
  });
});

describe("CurvatureScale", () => {
  it("maps the initial extremes to the colormap ends", () => {
    const scale = CurvatureScale.fromInitial([0.2, 0.9, 0.5]);
    expect(scale.normalize(0.2)).toBeCloseTo(0, 12);
    expect(scale.normalize(0.9)).toBeCloseTo(1, 12);
  });

  it("stays frozen: later out-of-range values clamp instead of rescaling", () => {
    const scale = CurvatureScale.fromInitial([0.2, 0.9]);
    expect(scale.normalize(5.0)).toBe(1);
    expect(scale.normalize(-1.0)).toBe(0);
  });

  it("widens a flat range so constant curvature maps mid-scale", () => {
    const scale = CurvatureScale.fromInitial([0.4, 0.4, 0.4]);
    expect(scale.normalize(0.4)).toBeCloseTo(0.5, 6);
  });

  it("packs per-node colors as rgb triples", () => {
    const scale = CurvatureScale.fromInitial([0, 1]);
    const colors = scale.colors([0, 1]);
    expect(colors).toBeInstanceOf(Float32Array);
    expect(colors.length).toBe(6);
    expect(colors[0]).toBeCloseTo(BLUE.r, 6);
    expect(colors[3]).toBeCloseTo(YELLOW.r, 6);
  });
});
