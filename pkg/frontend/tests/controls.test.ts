import { describe, expect, it } from "vitest";

import { ControlPanel, validateParam } from "../src/controls.js";
import { ControlRequest } from "../src/protocol.js";
import { ServerError, SessionClient } from "../src/transport.js";

/** A client whose control endpoint is scripted per-action. */
function fakeClient(
  respond: (request: ControlRequest) => void,
  log: ControlRequest[],
): SessionClient {
  return {
    control: async (_id: string, request: ControlRequest) => {
      log.push(request);
      respond(request);
      return { ok: true, action: request.action };
    },
  } as unknown as SessionClient;
}

describe("validateParam", () => {
  it("enforces each parameter's domain", () => {
    expect(validateParam("kappa", 0)).toBeNull();
    expect(validateParam("kappa", -1)).toMatch("nonnegative");
    expect(validateParam("rho", 1e-3)).toBeNull();
    expect(validateParam("tau", 0)).toMatch("positive");
    expect(validateParam("q", 2)).toMatch("exceed 2");
    expect(validateParam("q", 3.9)).toBeNull();
    expect(validateParam("rho", Number.NaN)).toMatch("must be a number");
  });
});

describe("ControlPanel", () => {
  it("commits a parameter only after the server acks", async () => {
    const log: ControlRequest[] = [];
    const panel = new ControlPanel(fakeClient(() => {}, log));
    panel.attach("s1");
    expect(panel.params.kappa).toBe(1.0);
    const ok = await panel.setParam("kappa", 2.5);
    expect(ok).toBe(true);
    expect(panel.params.kappa).toBe(2.5);
    expect(log).toEqual([{ action: "set_params", params: { kappa: 2.5 } }]);
  });

  it("keeps the prior value and surfaces the server message on rejection", async () => {
    const log: ControlRequest[] = [];
    const panel = new ControlPanel(
      fakeClient(() => {
        throw new ServerError("q must exceed 2", 400);
      }, log),
    );
    panel.attach("s1");
    const ok = await panel.setParam("rho", 0.5);
    expect(ok).toBe(false);
    expect(panel.params.rho).toBe(1e-3);
    expect(panel.lastError).toBe("q must exceed 2");
  });

  it("rejects invalid edits locally without calling the server", async () => {
    const log: ControlRequest[] = [];
    const panel = new ControlPanel(fakeClient(() => {}, log));
    panel.attach("s1");
    expect(await panel.setParam("tau", -1)).toBe(false);
    expect(await panel.setParam("q", 1.5)).toBe(false);
    expect(await panel.stepN(2.5)).toBe(false);
    expect(await panel.perturb(-1)).toBe(false);
    expect(log).toEqual([]);
    expect(panel.lastError).toMatch("amplitude");
  });

  it("tracks run state through start/pause/reset", async () => {
    const log: ControlRequest[] = [];
    const panel = new ControlPanel(fakeClient(() => {}, log));
    panel.attach("s1");
    await panel.start();
    expect(panel.status).toBe("running");
    await panel.pause();
    expect(panel.status).toBe("paused");
    await panel.reset();
    expect(panel.status).toBe("paused");
    expect(log.map((r) => r.action)).toEqual(["start", "pause", "reset"]);
  });

  it("sends the default perturbation amplitude", async () => {
    const log: ControlRequest[] = [];
    const panel = new ControlPanel(fakeClient(() => {}, log));
    panel.attach("s1");
    await panel.perturb();
    expect(log).toEqual([{ action: "perturb", amplitude: 1e-3 }]);
  });

  it("refuses to act without a session", async () => {
    const panel = new ControlPanel(fakeClient(() => {}, []));
    const ok = await panel.start();
    expect(ok).toBe(false);
    expect(panel.lastError).toMatch("no session attached");
  });
});
