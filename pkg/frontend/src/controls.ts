/**
 * Control panel state: validates edits locally, sends actions through the
 * session client, and only commits a parameter change once the server acks
 * it, so the displayed values always mirror server state.  Server-side
 * rejections are surfaced verbatim and the prior value is retained.
 */

import { FlowParamsPartial } from "./protocol.js";
import { SessionClient, ServerError } from "./transport.js";

export interface PanelParams {
  kappa: number;
  rho: number;
  tau: number;
  q: number;
}

export type PanelStatus = "idle" | "running" | "paused" | "failed";

const DEFAULTS: PanelParams = { kappa: 1.0, rho: 1e-3, tau: 1e-3, q: 3.9 };

/** Local validation mirroring the simulation's parameter contracts. */
export function validateParam(key: keyof PanelParams, value: number): string | null {
  if (!Number.isFinite(value)) return `${key} must be a number`;
  switch (key) {
    case "tau":
      return value > 0 ? null : "tau must be positive";
    case "q":
      return value > 2 ? null : "q must exceed 2";
    default:
      return value >= 0 ? null : `${key} must be nonnegative`;
  }
}

export class ControlPanel {
  params: PanelParams = { ...DEFAULTS };
  status: PanelStatus = "idle";
  perturbAmplitude = 1e-3;
  lastError: string | null = null;

  constructor(
    private readonly client: SessionClient,
    private sessionId: string | null = null,
  ) {}

  attach(sessionId: string, params?: Partial<PanelParams>): void {
    this.sessionId = sessionId;
    this.status = "paused";
    this.lastError = null;
    if (params) {
      this.params = { ...this.params, ...params };
    }
  }

  private requireSession(): string {
    if (this.sessionId === null) {
      throw new Error("no session attached");
    }
    return this.sessionId;
  }

  private async send(
    request: Parameters<SessionClient["control"]>[1],
  ): Promise<boolean> {
    try {
      await this.client.control(this.requireSession(), request);
      this.lastError = null;
      return true;
    } catch (err) {
      this.lastError =
        err instanceof ServerError ? err.message : String(err);
      return false;
    }
  }

  async start(): Promise<boolean> {
    const ok = await this.send({ action: "start" });
    if (ok) this.status = "running";
    return ok;
  }

  async pause(): Promise<boolean> {
    const ok = await this.send({ action: "pause" });
    if (ok) this.status = "paused";
    return ok;
  }

  async stepN(n: number): Promise<boolean> {
    if (!Number.isInteger(n) || n < 0) {
      this.lastError = "step count must be a nonnegative integer";
      return false;
    }
    return this.send({ action: "step_n", n });
  }

  async perturb(amplitude = this.perturbAmplitude): Promise<boolean> {
    if (!(amplitude >= 0)) {
      this.lastError = "perturb needs an amplitude >= 0";
      return false;
    }
    return this.send({ action: "perturb", amplitude });
  }

  async reset(): Promise<boolean> {
    const ok = await this.send({ action: "reset" });
    if (ok) this.status = "paused";
    return ok;
  }

  /**
   * Validate locally, then propose one parameter to the server; the panel
   * value changes only after the ack arrives.
   */
  async setParam(key: keyof PanelParams, value: number): Promise<boolean> {
    const invalid = validateParam(key, value);
    if (invalid !== null) {
      this.lastError = invalid;
      return false;
    }
    const partial: FlowParamsPartial = { [key]: value };
    const ok = await this.send({ action: "set_params", params: partial });
    if (ok) {
      this.params = { ...this.params, [key]: value };
    }
    return ok;
  }
}
