/**
 * Curvature coloring for the tube view: blue for small curvature through to
 * yellow for large.  The scale endpoints are frozen from the first frame of
 * a session so the coloring stays comparable while the curve relaxes.
 */

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

export const BLUE: Rgb = { r: 0.09, g: 0.22, b: 0.85 };
export const YELLOW: Rgb = { r: 0.98, g: 0.86, b: 0.08 };

/** Linear blue-to-yellow ramp on [0, 1]; input is clamped. */
export function blueYellow(t: number): Rgb {
  const x = Math.min(1, Math.max(0, t));
  return {
    r: BLUE.r + (YELLOW.r - BLUE.r) * x,
    g: BLUE.g + (YELLOW.g - BLUE.g) * x,
    b: BLUE.b + (YELLOW.b - BLUE.b) * x,
  };
}

export class CurvatureScale {
  private constructor(
    readonly lo: number,
    readonly hi: number,
  ) {}

  /**
   * Fix the scale from the session's initial curvature samples.  A flat
   * range (a perfect circle) widens to a symmetric band so later deviations
   * still map to visible color changes.
   */
  static fromInitial(curvature: readonly number[]): CurvatureScale {
    if (curvature.length === 0) {
      return new CurvatureScale(0, 1);
    }
    let lo = Infinity;
    let hi = -Infinity;
    for (const k of curvature) {
      lo = Math.min(lo, k);
      hi = Math.max(hi, k);
    }
    if (hi - lo < 1e-12 * Math.max(1, Math.abs(hi))) {
      const pad = Math.max(Math.abs(hi) * 0.5, 1e-6);
      return new CurvatureScale(lo - pad, hi + pad);
    }
    return new CurvatureScale(lo, hi);
  }

  /** Position of k in the frozen range, clamped to [0, 1]. */
  normalize(k: number): number {
    const t = (k - this.lo) / (this.hi - this.lo);
    return Math.min(1, Math.max(0, t));
  }

  color(k: number): Rgb {
    return blueYellow(this.normalize(k));
  }

  /** Flat rgb triples for a whole curvature array, one color per node. */
  colors(curvature: readonly number[]): Float32Array {
    const out = new Float32Array(curvature.length * 3);
    for (let i = 0; i < curvature.length; i++) {
      const c = this.color(curvature[i]);
      out[3 * i] = c.r;
      out[3 * i + 1] = c.g;
      out[3 * i + 2] = c.b;
    }
    return out;
  }
}
