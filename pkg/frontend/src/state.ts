// UI session state: stroke history, cumulative seeds, solve scheduling.

import { Api, ApiError, Seed, SessionInfo, SolveResponse } from "./api.js";
import { rasterizeStroke, SliceView, StrokePoint } from "./raster.js";

export interface Stroke {
  label: number;
  radius: number;
  path: StrokePoint[];
  indices: number[];
}

export interface Report {
  m_use: number;
  online_ms: number;
  refreshed: boolean;
  base_beta: number;
}

export type Listener = (studio: SeedStudio) => void;

/**
 * Seeds are kept as the cumulative union of all strokes (later strokes win
 * on overlap) and always sent as a full set, so undo is just a resend.
 * At most one solve request is in flight; while busy, newer paints collapse
 * into exactly one pending resend.
 */
export class SeedStudio {
  session: SessionInfo | null = null;
  view: SliceView = { dims: [1, 1], axis: 2, index: 0 };
  strokes: Stroke[] = [];
  brushLabel = 0;
  brushRadius = 1.5;
  overlayMode: "labels" | "uncertainty" | "off" = "labels";
  lastSolve: SolveResponse | null = null;
  report: Report | null = null;
  lastError: string | null = null;
  busy = false;
  private pendingResend = false;
  private listeners: Listener[] = [];
  private drainWaiters: Array<() => void> = [];

  constructor(private api: Api) {}

  onChange(listener: Listener) {
    this.listeners.push(listener);
  }

  private emit() {
    for (const fn of this.listeners) fn(this);
  }

  async open(imagePath: string, packPaths: string[]): Promise<SessionInfo> {
    this.session = await this.api.createSession(imagePath, packPaths);
    const dims = this.session.dims;
    this.view = { dims, axis: dims.length === 3 ? 2 : 2, index: 0 };
    this.strokes = [];
    this.lastSolve = null;
    this.report = null;
    this.emit();
    return this.session;
  }

  /** Cumulative seed set; later strokes overwrite earlier labels. */
  seeds(): Seed[] {
    const byIndex = new Map<number, number>();
    for (const stroke of this.strokes) {
      for (const index of stroke.indices) byIndex.set(index, stroke.label);
    }
    return Array.from(byIndex.entries())
      .sort((a, b) => a[0] - b[0])
      .map(([index, label]) => ({ index, label }));
  }

  paintStroke(path: StrokePoint[]): Stroke {
    const indices = rasterizeStroke(path, this.brushRadius, this.view);
    const stroke: Stroke = {
      label: this.brushLabel,
      radius: this.brushRadius,
      path,
      indices,
    };
    this.strokes.push(stroke);
    void this.requestSolve();
    return stroke;
  }

  undo(): boolean {
    if (!this.strokes.length) return false;
    this.strokes.pop();
    void this.requestSolve();
    return true;
  }

  async setParams(params: {
    gamma?: number;
    beta?: number;
    epsilon?: number;
  }): Promise<void> {
    if (!this.session) return;
    const out = await this.api.setParams(this.session.id, params);
    this.session = {
      ...this.session,
      beta: out.beta,
      gamma: out.gamma,
      epsilon: out.epsilon,
      refreshed: out.refreshed || this.session.refreshed,
    };
    this.emit();
  }

  /** Resolves once the solve queue fully drains (latest stroke included). */
  async requestSolve(): Promise<void> {
    if (!this.session) return;
    if (this.busy) {
      this.pendingResend = true;
      return this.drained();
    }
    const seeds = this.seeds();
    if (!seeds.length) {
      this.lastSolve = null;
      this.emit();
      this.settleIfDrained();
      return;
    }
    this.busy = true;
    this.emit();
    try {
      const out = await this.api.postSeeds(this.session.id, seeds);
      this.lastSolve = out;
      this.report = {
        m_use: out.m_use,
        online_ms: out.online_ms,
        refreshed: out.refreshed,
        base_beta: out.base_beta,
      };
      this.lastError = null;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.pendingResend = true; // someone else is solving; try again
      } else {
        this.lastError = err instanceof Error ? err.message : String(err);
      }
    } finally {
      this.busy = false;
      this.emit();
    }
    if (this.pendingResend) {
      this.pendingResend = false;
      await this.requestSolve();
    }
    this.settleIfDrained();
  }

  /** Promise that settles when no solve is running or queued. */
  drained(): Promise<void> {
    if (!this.busy && !this.pendingResend) return Promise.resolve();
    return new Promise((resolve) => this.drainWaiters.push(resolve));
  }

  private settleIfDrained() {
    if (this.busy || this.pendingResend) return;
    const waiters = this.drainWaiters;
    this.drainWaiters = [];
    for (const resolve of waiters) resolve();
  }
}
