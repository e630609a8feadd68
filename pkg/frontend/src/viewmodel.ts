/**
 * Console view model: everything the renderer shows, derived purely from
 * received session events.  No interpretation happens here — event
 * detection, classification and state transitions all live in the engine;
 * this class only mirrors payloads and trims rolling buffers.
 */

import {
  DropNotice,
  ServerMessage,
  SessionEvent,
  isDropNotice,
  isReply,
  isSessionEvent,
} from "./protocol.js";

export interface UiStateView {
  view: string;
  entries: [string, string][];
  highlighted: number;
  mode: string;
  origin: string | null;
}

export interface TracePoint {
  t: number;
  value: number;
}

/** Time-bounded rolling buffer: speed changes never distort the window. */
export class RollingTrace {
  points: TracePoint[] = [];

  constructor(readonly windowSeconds: number) {}

  push(t: number, value: number): void {
    this.points.push({ t, value });
    const cutoff = t - this.windowSeconds;
    let firstKept = 0;
    while (firstKept < this.points.length && this.points[firstKept].t < cutoff) {
      firstKept += 1;
    }
    if (firstKept > 0) this.points = this.points.slice(firstKept);
  }

  get latest(): TracePoint | null {
    return this.points.length ? this.points[this.points.length - 1] : null;
  }
}

export interface MetricsView {
  separability: number;
  consistency: Record<string, number>;
  activeNext: string[];
}

export class ConsoleViewModel {
  connected = false;
  stale = true;
  clock = 0;
  lastSeq = -1;
  droppedTotal = 0;
  uiState: UiStateView | null = null;
  mode = "par_only";
  feedback: RollingTrace;
  pupil: RollingTrace;
  metrics: MetricsView | null = null;
  lastAction: { kind: string; item: string | null; t: number } | null = null;
  lastReply: { ok: boolean; text: string } | null = null;
  notices: string[] = [];

  constructor(traceWindowSeconds = 30) {
    this.feedback = new RollingTrace(traceWindowSeconds);
    this.pupil = new RollingTrace(traceWindowSeconds);
  }

  onConnect(): void {
    this.connected = true;
    this.stale = false;
  }

  onDisconnect(): void {
    this.connected = false;
    this.stale = true;
  }

  apply(msg: ServerMessage): void {
    if (isReply(msg)) {
      this.lastReply =
        msg.reply === "ok"
          ? { ok: true, text: `ok: ${msg.cmd ?? ""}` }
          : { ok: false, text: `error: ${msg.message ?? "unknown"}` };
      return;
    }
    if (isDropNotice(msg)) {
      this.droppedTotal += (msg as DropNotice).count;
      return;
    }
    if (!isSessionEvent(msg)) return;
    const event = msg as SessionEvent;
    this.lastSeq = event.seq;
    this.clock = event.t;
    switch (event.kind) {
      case "ui_state":
        this.uiState = event.payload as unknown as UiStateView;
        this.mode = this.uiState.mode;
        break;
      case "mode_change":
        this.mode = String(event.payload.mode);
        break;
      case "pupil_sample": {
        const n = event.payload.n;
        if (typeof n === "number") this.pupil.push(event.t, n);
        break;
      }
      case "feedback": {
        const samples = event.payload.samples as [number, number][];
        for (const [t, score] of samples) this.feedback.push(t, score);
        break;
      }
      case "classification": {
        const score = event.payload.score;
        if (typeof score === "number") this.feedback.push(event.t, score);
        break;
      }
      case "action":
        this.lastAction = {
          kind: String(event.payload.kind),
          item: (event.payload.item as string | null) ?? null,
          t: event.t,
        };
        break;
      case "par_event":
        this.notices.push(
          `PAR ${Number(event.payload.duration).toFixed(2)}s depth ` +
            Number(event.payload.depth).toFixed(2),
        );
        if (this.notices.length > 5) this.notices.shift();
        break;
      case "metrics":
        this.metrics = {
          separability: Number(event.payload.separability),
          consistency: event.payload.consistency as Record<string, number>,
          activeNext: (event.payload.active_next as string[]) ?? [],
        };
        break;
      default:
        break;
    }
  }
}
