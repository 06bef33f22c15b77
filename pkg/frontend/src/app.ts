/**
 * Page wiring: builds the panel DOM, connects the session client to the
 * rendering loop, and routes widget events into control actions.  All
 * simulation state lives on the server; this file owns only widgets.
 */

import { EnergyHistory, paintChart } from "./chart.js";
import { ControlPanel, PanelParams, validateParam } from "./controls.js";
import { PRESETS } from "./protocol.js";
import { SessionClient, SocketLike } from "./transport.js";
import { UiLoop } from "./ui_loop.js";
import { TubeView } from "./view3d.js";

interface AppElements {
  view: HTMLCanvasElement;
  chart: HTMLCanvasElement;
  preset: HTMLSelectElement;
  nodes: HTMLInputElement;
  seed: HTMLInputElement;
  status: HTMLElement;
  diagnostics: HTMLElement;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function browserScheduler(drain: () => void): void {
  requestAnimationFrame(drain);
}

export function startApp(baseUrl: string = window.location.origin): void {
  const elements: AppElements = {
    view: el<HTMLCanvasElement>("view3d"),
    chart: el<HTMLCanvasElement>("energy-chart"),
    preset: el<HTMLSelectElement>("preset"),
    nodes: el<HTMLInputElement>("nodes"),
    seed: el<HTMLInputElement>("seed"),
    status: el("status"),
    diagnostics: el("diagnostics"),
  };
  for (const name of PRESETS) {
    const option = document.createElement("option");
    option.value = name;
    option.textContent = name;
    elements.preset.appendChild(option);
  }

  const browserSocket = (url: string): SocketLike => {
    const ws = new WebSocket(url);
    const sock: SocketLike = {
      onmessage: null,
      onclose: null,
      onerror: null,
      close: () => ws.close(),
    };
    ws.onmessage = (ev) => sock.onmessage?.({ data: ev.data });
    ws.onclose = (ev) => sock.onclose?.(ev);
    ws.onerror = (ev) => sock.onerror?.(ev);
    return sock;
  };
  const client = new SessionClient(
    baseUrl,
    (url, init) => fetch(url, init),
    browserSocket,
  );
  const panel = new ControlPanel(client);
  const view = new TubeView(elements.view);
  const loop = new UiLoop(view, browserScheduler);
  let stream: { close(): void } | null = null;

  const chartCtx = elements.chart.getContext("2d");
  const repaintChart = (history: EnergyHistory) => {
    if (chartCtx) {
      paintChart(chartCtx, elements.chart.width, elements.chart.height, history);
    }
  };

  const showStatus = (text: string) => {
    elements.status.textContent = text;
  };

  const renderDiagnostics = () => {
    const point = loop.history.last();
    if (!point) return;
    elements.diagnostics.textContent =
      `step ${point.step}  E=${point.e_total.toFixed(6)}  ` +
      `bend=${point.e_bend.toFixed(6)}  tp=${point.e_tp_weighted.toFixed(6)}`;
  };

  async function connect(): Promise<void> {
    stream?.close();
    const n = Number(elements.nodes.value) || undefined;
    const seed = Number(elements.seed.value) || 0;
    try {
      const created = await client.createSession({
        source: elements.preset.value,
        n,
        seed,
        params: { ...panel.params },
      });
      panel.attach(created.id);
      stream = client.openStream(
        created.id,
        (frame) => {
          loop.enqueue(frame);
          // chart + readout follow the loop's history on the same tick
          requestAnimationFrame(() => {
            repaintChart(loop.history);
            renderDiagnostics();
          });
        },
        (err) => showStatus(`stream: ${err.message}`),
        () => showStatus("stream closed"),
      );
      showStatus(`session ${created.id} (${elements.preset.value})`);
    } catch (err) {
      showStatus(String(err instanceof Error ? err.message : err));
    }
  }

  const actions: Array<[string, () => Promise<boolean> | Promise<void>]> = [
    ["connect", connect],
    ["start", () => panel.start()],
    ["pause", () => panel.pause()],
    ["step100", () => panel.stepN(100)],
    ["perturb", () => panel.perturb()],
    ["reset", () => panel.reset()],
  ];
  for (const [id, handler] of actions) {
    el<HTMLButtonElement>(id).addEventListener("click", () => {
      void Promise.resolve(handler()).then(() => {
        if (panel.lastError) showStatus(panel.lastError);
      });
    });
  }

  for (const key of ["kappa", "rho", "tau", "q"] as Array<keyof PanelParams>) {
    const input = el<HTMLInputElement>(`param-${key}`);
    input.value = String(panel.params[key]);
    input.addEventListener("change", () => {
      const value = Number(input.value);
      const invalid = validateParam(key, value);
      if (invalid !== null) {
        // rejected edits roll the widget back to the committed value
        showStatus(invalid);
        input.value = String(panel.params[key]);
        return;
      }
      void panel.setParam(key, value).then((ok) => {
        input.value = String(panel.params[key]);
        if (!ok && panel.lastError) showStatus(panel.lastError);
      });
    });
  }
}
