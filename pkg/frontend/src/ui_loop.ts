/**
 * The single rendering loop: network frames are queued onto it and drained
 * in arrival order, one full render per frame, so every decimated frame the
 * server sends produces exactly one rendering and the screen always ends on
 * the latest state.
 */

import { CurvatureScale } from "./colormap.js";
import { EnergyHistory } from "./chart.js";
import { Frame } from "./protocol.js";
import { TubeBuffers, tubeGeometry } from "./tube.js";

/** Rendering backend fed by the loop; the 3D view implements this. */
export interface FrameRenderer {
  render(frame: Frame, tube: TubeBuffers): void;
}

/**
 * Schedules queue drains.  The browser adapter forwards to
 * requestAnimationFrame; tests pass an immediate scheduler.
 */
export type Scheduler = (drain: () => void) => void;

export const immediateScheduler: Scheduler = (drain) => drain();

export class UiLoop {
  private queue: Frame[] = [];
  private scheduled = false;
  private scale: CurvatureScale | null = null;
  private lastStep: number | null = null;
  readonly history: EnergyHistory;

  /** Steps rendered, in render order; duplicates are never re-rendered. */
  readonly renderedSteps: number[] = [];

  constructor(
    private readonly renderer: FrameRenderer,
    private readonly scheduler: Scheduler,
    historyCapacity = 20000,
  ) {
    this.history = new EnergyHistory(historyCapacity);
  }

  /** Queue a frame from the network; rendering happens on the loop. */
  enqueue(frame: Frame): void {
    this.queue.push(frame);
    if (!this.scheduled) {
      this.scheduled = true;
      this.scheduler(() => this.drain());
    }
  }

  private drain(): void {
    this.scheduled = false;
    const batch = this.queue;
    this.queue = [];
    for (const frame of batch) {
      this.apply(frame);
    }
  }

  private apply(frame: Frame): void {
    if (this.lastStep !== null && frame.step === this.lastStep) {
      // a subscriber that attaches at a step boundary can see that step
      // twice (snapshot frame then broadcast); render it once
      return;
    }
    if (this.scale === null) {
      this.scale = CurvatureScale.fromInitial(frame.curvature);
    }
    if (this.lastStep !== null && frame.step < this.lastStep) {
      // reset broadcast: history rewinds, the session scale stays fixed
      this.history.clear();
    }
    const colors = this.scale.colors(frame.curvature);
    const tube = tubeGeometry(frame.positions, colors);
    this.renderer.render(frame, tube);
    this.history.push(frame.diagnostics);
    this.lastStep = frame.step;
    this.renderedSteps.push(frame.step);
  }

  /** The frozen session colormap scale; null before the first frame. */
  get curvatureScale(): CurvatureScale | null {
    return this.scale;
  }
}
