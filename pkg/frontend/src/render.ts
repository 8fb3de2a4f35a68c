/** HTML for a ViewModel. Pure: same model, same markup.
 *
 * The decision buttons carry data-action attributes and are enabled exactly
 * when a decision is pending; everything the page shows is derived from the
 * model, never from ambient state.
 */

import { Cell } from "./protocol.js";
import { TranscriptRow, ViewModel } from "./viewmodel.js";

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function money(x: number): string {
  return x.toFixed(2);
}

function isCell(v: unknown): v is Cell {
  return Array.isArray(v) && v.length === 2;
}

function cellKey(c: Cell): string {
  return `${c[0]},${c[1]}`;
}

function gridHtml(vm: ViewModel): string {
  const ov = vm.overlay;
  if (ov === null) return "";
  const walls = new Set(ov.walls.map(cellKey));
  const taboo = new Set(ov.taboo.map(cellKey));
  const agent = isCell(vm.state) ? cellKey(vm.state) : null;
  const rows: string[] = [];
  for (let y = 0; y < ov.height; y++) {
    const cells: string[] = [];
    for (let x = 0; x < ov.width; x++) {
      const key = `${x},${y}`;
      const cls = ["cell"];
      let glyph = "";
      if (walls.has(key)) cls.push("wall");
      // taboo marking stays on the cell even when something sits on it
      if (taboo.has(key)) {
        cls.push("taboo");
        glyph = "!";
      }
      if (key === cellKey(ov.goal)) {
        cls.push("goal");
        glyph = "G";
      }
      if (key === cellKey(ov.start)) cls.push("start");
      if (key === agent) {
        cls.push("agent");
        glyph = "@";
      }
      cells.push(`<td class="${cls.join(" ")}">${glyph}</td>`);
    }
    rows.push(`<tr>${cells.join("")}</tr>`);
  }
  return (
    `<table class="grid">${rows.join("")}</table>` +
    `<p class="legend">@ agent &nbsp; G goal &nbsp; ! taboo &nbsp;` +
    ` dark squares are walls</p>`
  );
}

function phaseLabel(vm: ViewModel): string {
  switch (vm.phase) {
    case "idle":
      return "not connected";
    case "connecting":
      return "connecting...";
    case "live":
      return "live";
    case "done":
      return `finished (${esc(vm.doneReason ?? "?")})`;
    case "error":
      return "error";
  }
}

function bannerHtml(vm: ViewModel): string {
  if (vm.error === null) return "";
  const e = vm.error;
  const code = e.code === null ? "" : ` [${esc(e.code)}]`;
  return (
    `<div class="banner">${esc(e.kind)} error${code}: ${esc(e.message)}` +
    ` <button data-action="retry">reconnect</button></div>`
  );
}

function statusHtml(vm: ViewModel): string {
  const bits = [`<span class="phase">${phaseLabel(vm)}</span>`];
  if (vm.session !== null) bits.push(`session ${esc(vm.session)}`);
  if (vm.seed !== null) bits.push(`seed ${vm.seed}`);
  bits.push(`step ${vm.stepIndex}`);
  return `<p class="status">${bits.join(" &middot; ")}</p>`;
}

function tallyHtml(vm: ViewModel): string {
  const c = vm.cumulative;
  return (
    `<p class="tally">return ${money(c.rH)} (agent ${money(c.rSi)})` +
    ` &middot; violations ${c.violations}</p>`
  );
}

function pendingHtml(vm: ViewModel): string {
  if (vm.committedMeta === null) return "";
  const what =
    vm.committedMeta === "ask"
      ? "the agent asks for review"
      : "the agent will act on its own";
  return `<p class="pending">${what}</p>`;
}

function lastStepHtml(vm: ViewModel): string {
  const r = vm.lastResolved;
  if (r === null) return "";
  const parts = [`agent ${esc(r.si_meta_action)}`, `you ${esc(r.h_action)}`];
  if (r.proposed_env_action !== null)
    parts.push(`proposed ${esc(r.proposed_env_action)}`);
  let executed = `executed ${esc(r.executed)}`;
  if (r.proposed_env_action !== null && r.proposed_env_action !== r.executed)
    executed += " (substituted)";
  parts.push(executed);
  parts.push(`reward ${money(r.r_h)}`);
  if (r.violation) parts.push(`<strong>violation</strong>`);
  return `<p class="laststep">last step: ${parts.join(", ")}</p>`;
}

function controlsHtml(vm: ViewModel): string {
  const dis = vm.decisionPending ? "" : " disabled";
  return (
    `<div class="controls">` +
    `<button data-action="trust"${dis}>trust</button>` +
    `<button data-action="oversee"${dis}>oversee</button>` +
    `</div>`
  );
}

function rowHtml(row: TranscriptRow): string {
  const proposed = row.proposed === null ? "" : esc(row.proposed);
  const viol = row.violation ? "!" : "";
  return (
    `<tr><td>${row.step}</td><td>${esc(row.si)}</td>` +
    `<td>${esc(row.h)}</td><td>${proposed}</td>` +
    `<td>${esc(row.executed)}</td><td>${money(row.rH)}</td>` +
    `<td>${viol}</td></tr>`
  );
}

function transcriptHtml(vm: ViewModel): string {
  if (vm.transcript.length === 0) return "";
  const head =
    `<tr><th>step</th><th>agent</th><th>you</th><th>proposed</th>` +
    `<th>executed</th><th>reward</th><th>viol</th></tr>`;
  const rows = vm.transcript.map(rowHtml).join("");
  return `<table class="transcript">${head}${rows}</table>`;
}

export function render(vm: ViewModel): string {
  return (
    `<div class="console">` +
    bannerHtml(vm) +
    statusHtml(vm) +
    gridHtml(vm) +
    pendingHtml(vm) +
    tallyHtml(vm) +
    lastStepHtml(vm) +
    controlsHtml(vm) +
    transcriptHtml(vm) +
    `</div>`
  );
}
