/**
 * ANSI terminal rendering of the console view model.
 *
 * Pure functions from view model to a list of lines, so tests can assert on
 * frames without a terminal.
 */

import { ConsoleViewModel, RollingTrace, UiStateView } from "./viewmodel.js";

const GAUGE_WIDTH = 41;
const SPARK_CHARS = "▁▂▃▄▅▆▇█";

export function renderMenu(state: UiStateView): string[] {
  const title = state.view.replace("_", " ").toUpperCase();
  const lines = [`[ ${title} ]`];
  state.entries.forEach(([id, caption], index) => {
    const arrow = index === state.highlighted ? "➤" : " ";
    lines.push(` ${arrow} ${caption}${id === state.origin ? " *" : ""}`);
  });
  return lines;
}

/** Maps a score in [-1, 1] onto an empty-to-full gauge; 0 sits mid-scale. */
export function renderGauge(score: number): string {
  const clamped = Math.max(-1, Math.min(1, score));
  const fill = Math.round(((clamped + 1) / 2) * (GAUGE_WIDTH - 1));
  let bar = "";
  for (let i = 0; i < GAUGE_WIDTH; i++) bar += i <= fill ? "█" : "·";
  return `[${bar}] ${clamped >= 0 ? "+" : ""}${clamped.toFixed(2)}`;
}

export function renderSparkline(trace: RollingTrace, width = 48): string {
  if (trace.points.length === 0) return "(no data)".padEnd(width);
  const points = trace.points.slice(-width);
  const values = points.map((p) => p.value);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  return points
    .map((p) => SPARK_CHARS[Math.min(7, Math.floor(((p.value - lo) / span) * 8))])
    .join("")
    .padEnd(width);
}

export function renderFrame(vm: ConsoleViewModel): string[] {
  const lines: string[] = [];
  const badge = vm.mode === "multimodal" ? "MULTIMODAL" : "PAR-ONLY";
  const link = vm.connected ? "connected" : "DISCONNECTED";
  lines.push(`parmi console   mode:${badge}   t=${vm.clock.toFixed(2)}s   ${link}`);
  if (vm.stale) {
    lines.push("!! STALE VIEW - no live session data (reconnecting...) !!");
  }
  if (vm.droppedTotal > 0) {
    lines.push(`!! ${vm.droppedTotal} event(s) dropped on this connection !!`);
  }
  lines.push("");
  if (vm.uiState) {
    lines.push(...renderMenu(vm.uiState));
  } else {
    lines.push("(waiting for the first ui_state event)");
  }
  lines.push("");
  const latest = vm.feedback.latest;
  lines.push(`feedback ${renderGauge(latest ? latest.value : 0)}`);
  lines.push(`score    ${renderSparkline(vm.feedback)}`);
  lines.push(`pupil    ${renderSparkline(vm.pupil)}`);
  if (vm.metrics) {
    const cons = Object.entries(vm.metrics.consistency)
      .map(([k, v]) => `${k}:${v.toFixed(2)}`)
      .join(" ");
    lines.push(`metrics  separability=${vm.metrics.separability.toFixed(2)} ${cons}`);
  }
  if (vm.lastAction) {
    lines.push(`action   ${vm.lastAction.kind} (${vm.lastAction.item ?? "-"}) at ${vm.lastAction.t.toFixed(2)}s`);
  }
  for (const notice of vm.notices) lines.push(`event    ${notice}`);
  if (vm.lastReply) {
    lines.push(`engine   ${vm.lastReply.text}`);
  }
  lines.push("");
  lines.push("keys: [p]AR  [m]I  [b]utton  [space]pause/resume  [+/-]speed  [q]uit");
  return lines;
}

export function paint(lines: string[]): string {
  return "\x1b[2J\x1b[H" + lines.join("\n") + "\n";
}
