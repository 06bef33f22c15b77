/**
 * Wire types for the session service and runtime guards for everything the
 * server can send.  The schemas carry a "v" field; this client accepts
 * exactly SCHEMA_VERSION and rejects anything else up front so a stale page
 * cannot misread a newer stream.
 */

export const SCHEMA_VERSION = 1;

/** Per-step scalars computed by the simulation after each completed step. */
export interface Diagnostics {
  step: number;
  e_total: number;
  e_bend: number;
  e_tp_weighted: number;
  length: number;
  arclength_dev: number;
  bilipschitz: number;
  min_pair_dist: number;
  stable: boolean;
  isotopy_ok: boolean;
}

/**
 * One consistent post-step state: positions are a flat xyz array of length
 * 3N, curvature has one sample per node and drives the tube coloring.
 */
export interface Frame {
  v: number;
  session: string;
  step: number;
  positions: number[];
  curvature: number[];
  diagnostics: Diagnostics;
}

export interface CreateResponse {
  id: string;
  status: string;
}

export interface ControlAck {
  ok: boolean;
  action: string;
}

/** Flat parameter object accepted by create and set_params. */
export interface FlowParamsPartial {
  kappa?: number;
  rho?: number;
  tau?: number;
  q?: number;
  epsilon?: number;
  gauss_order?: number;
  metric?: string;
  hr_exponent?: number;
}

export interface CreateRequest {
  source?: string;
  n?: number;
  length?: number;
  curve?: unknown;
  params?: FlowParamsPartial;
  seed?: number;
  frame_stride?: number;
}

export type ControlRequest =
  | { action: "start" | "pause" | "reset" }
  | { action: "step_n"; n: number }
  | { action: "perturb"; amplitude: number }
  | { action: "set_params"; params: FlowParamsPartial };

/** Session presets served by the backend's curve library. */
export const PRESETS = [
  "circle",
  "five_two",
  "trefoil_near_triple_circle",
  "figure_eight",
  "unknot_twisted_triangle",
] as const;

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function isNumberArray(x: unknown): x is number[] {
  return Array.isArray(x) && x.every((v) => isFiniteNumber(v));
}

export function isDiagnostics(x: unknown): x is Diagnostics {
  if (typeof x !== "object" || x === null) return false;
  const d = x as Record<string, unknown>;
  return (
    isFiniteNumber(d.step) &&
    isFiniteNumber(d.e_total) &&
    isFiniteNumber(d.e_bend) &&
    isFiniteNumber(d.e_tp_weighted) &&
    isFiniteNumber(d.length) &&
    isFiniteNumber(d.arclength_dev) &&
    isFiniteNumber(d.bilipschitz) &&
    isFiniteNumber(d.min_pair_dist) &&
    typeof d.stable === "boolean" &&
    typeof d.isotopy_ok === "boolean"
  );
}

export function isFrame(x: unknown): x is Frame {
  if (typeof x !== "object" || x === null) return false;
  const f = x as Record<string, unknown>;
  if (f.v !== SCHEMA_VERSION) return false;
  if (typeof f.session !== "string" || !isFiniteNumber(f.step)) return false;
  if (!isNumberArray(f.positions) || !isNumberArray(f.curvature)) return false;
  // positions come xyz-flattened, three numbers per curvature sample
  if (f.positions.length !== 3 * f.curvature.length) return false;
  return isDiagnostics(f.diagnostics);
}

export function parseFrame(text: string): Frame {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    throw new Error("stream message is not JSON");
  }
  if (!isFrame(data)) {
    throw new Error("stream message is not a valid frame");
  }
  return data;
}

export function isCreateResponse(x: unknown): x is CreateResponse {
  if (typeof x !== "object" || x === null) return false;
  const r = x as Record<string, unknown>;
  return typeof r.id === "string" && typeof r.status === "string";
}

export function isControlAck(x: unknown): x is ControlAck {
  if (typeof x !== "object" || x === null) return false;
  const r = x as Record<string, unknown>;
  return typeof r.ok === "boolean" && typeof r.action === "string";
}
