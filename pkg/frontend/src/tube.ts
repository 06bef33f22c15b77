/**
 * Closed-curve tube geometry.  Rings are carried along the curve by
 * parallel transport and the accumulated seam rotation is redistributed as
 * a uniform counter-twist, so the tube closes without a visible crease.
 * Pure array-in / array-out so it can be checked without a GL context.
 */

export interface TubeBuffers {
  positions: Float32Array;
  normals: Float32Array;
  colors: Float32Array;
  indices: Uint32Array;
  ringCount: number;
  ringSegments: number;
}

/** Tube radius as a fraction of the mean polyline edge length. */
export const TUBE_RADIUS_FRACTION = 0.45;

type Vec = [number, number, number];

function sub(a: Vec, b: Vec): Vec {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec, b: Vec): Vec {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function dot(a: Vec, b: Vec): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function norm(a: Vec): number {
  return Math.sqrt(dot(a, a));
}

function normalize(a: Vec): Vec {
  const n = norm(a);
  return n > 0 ? [a[0] / n, a[1] / n, a[2] / n] : [1, 0, 0];
}

/** Rotate v about unit axis by angle (Rodrigues). */
function rotate(v: Vec, axis: Vec, angle: number): Vec {
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const k = cross(axis, v);
  const d = dot(axis, v) * (1 - c);
  return [
    v[0] * c + k[0] * s + axis[0] * d,
    v[1] * c + k[1] * s + axis[1] * d,
    v[2] * c + k[2] * s + axis[2] * d,
  ];
}

/** Transport v from the plane normal to tFrom into the plane normal to tTo. */
function transport(v: Vec, tFrom: Vec, tTo: Vec): Vec {
  const axis = cross(tFrom, tTo);
  const s = norm(axis);
  const c = dot(tFrom, tTo);
  if (s < 1e-12) {
    // parallel tangents: antiparallel would need an arbitrary flip, but a
    // polyline fine enough to simulate on never folds back in one edge
    return v;
  }
  return rotate(v, [axis[0] / s, axis[1] / s, axis[2] / s], Math.atan2(s, c));
}

export function nodeCount(flatPositions: readonly number[]): number {
  return Math.floor(flatPositions.length / 3);
}

export function meanEdge(flatPositions: readonly number[]): number {
  const n = nodeCount(flatPositions);
  if (n < 2) return 1;
  let total = 0;
  for (let i = 0; i < n; i++) {
    const j = (i + 1) % n;
    total += norm([
      flatPositions[3 * j] - flatPositions[3 * i],
      flatPositions[3 * j + 1] - flatPositions[3 * i + 1],
      flatPositions[3 * j + 2] - flatPositions[3 * i + 2],
    ]);
  }
  return total / n;
}

/**
 * Build tube buffers for a closed polyline.
 *
 * nodeColors holds one rgb triple per node (3N floats); every vertex of a
 * ring inherits its node's color.  radius defaults to the fixed fraction of
 * the mean edge.
 */
export function tubeGeometry(
  flatPositions: readonly number[],
  nodeColors: Float32Array,
  radius?: number,
  ringSegments = 12,
): TubeBuffers {
  const n = nodeCount(flatPositions);
  if (n < 3) {
    throw new Error("tube needs at least 3 nodes");
  }
  if (nodeColors.length !== 3 * n) {
    throw new Error("one rgb triple per node required");
  }
  const r = radius ?? TUBE_RADIUS_FRACTION * meanEdge(flatPositions);

  const centers: Vec[] = new Array(n);
  for (let i = 0; i < n; i++) {
    centers[i] = [
      flatPositions[3 * i],
      flatPositions[3 * i + 1],
      flatPositions[3 * i + 2],
    ];
  }
  const tangents: Vec[] = new Array(n);
  for (let i = 0; i < n; i++) {
    tangents[i] = normalize(sub(centers[(i + 1) % n], centers[(i - 1 + n) % n]));
  }

  // transported ring frames (u, w) spanning each normal plane
  const us: Vec[] = new Array(n);
  const ws: Vec[] = new Array(n);
  const seedRef: Vec =
    Math.abs(tangents[0][0]) < 0.9 ? [1, 0, 0] : [0, 1, 0];
  us[0] = normalize(cross(tangents[0], seedRef));
  ws[0] = cross(tangents[0], us[0]);
  for (let i = 1; i < n; i++) {
    us[i] = normalize(transport(us[i - 1], tangents[i - 1], tangents[i]));
    ws[i] = cross(tangents[i], us[i]);
  }

  // seam holonomy: angle between the frame carried once around and the
  // seed frame, spread uniformly so ring n would land exactly on ring 0
  const closed = transport(us[n - 1], tangents[n - 1], tangents[0]);
  const holonomy = Math.atan2(dot(cross(us[0], closed), tangents[0]), dot(us[0], closed));
  for (let i = 1; i < n; i++) {
    const correction = (-holonomy * i) / n;
    us[i] = rotate(us[i], tangents[i], correction);
    ws[i] = cross(tangents[i], us[i]);
  }

  const vertexCount = n * ringSegments;
  const positions = new Float32Array(vertexCount * 3);
  const normals = new Float32Array(vertexCount * 3);
  const colors = new Float32Array(vertexCount * 3);
  const indices = new Uint32Array(n * ringSegments * 6);

  for (let i = 0; i < n; i++) {
    for (let j = 0; j < ringSegments; j++) {
      const theta = (2 * Math.PI * j) / ringSegments;
      const c = Math.cos(theta);
      const s = Math.sin(theta);
      const k = i * ringSegments + j;
      for (let axis = 0; axis < 3; axis++) {
        const outward = c * us[i][axis] + s * ws[i][axis];
        positions[3 * k + axis] = centers[i][axis] + r * outward;
        normals[3 * k + axis] = outward;
        colors[3 * k + axis] = nodeColors[3 * i + axis];
      }
    }
  }

  let t = 0;
  for (let i = 0; i < n; i++) {
    const iNext = (i + 1) % n;
    for (let j = 0; j < ringSegments; j++) {
      const jNext = (j + 1) % ringSegments;
      const a = i * ringSegments + j;
      const b = iNext * ringSegments + j;
      const cIdx = iNext * ringSegments + jNext;
      const d = i * ringSegments + jNext;
      indices[t++] = a;
      indices[t++] = b;
      indices[t++] = cIdx;
      indices[t++] = a;
      indices[t++] = cIdx;
      indices[t++] = d;
    }
  }

  return { positions, normals, colors, indices, ringCount: n, ringSegments };
}
