/** HTML rendering of the console state. Kept separate from the models so
 * tests can assert on structure without a DOM. */
import type { ConsoleState } from "./console.js";
import type { GridView } from "./grid.js";
import { isGreen, isHighlighted } from "./grid.js";
import type { PanelView } from "./explain.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function show(v: unknown): string {
  return v === null || v === undefined ? "NULL" : String(v);
}

export function renderGridHtml(grid: GridView): string {
  const parts: string[] = [];
  if (grid.missingBanner) {
    parts.push(`<div class="banner">${escapeHtml(grid.missingBanner)}</div>`);
  }
  parts.push('<table class="grid"><thead><tr>');
  for (const c of grid.columns) {
    parts.push(`<th>${escapeHtml(c)}</th>`);
  }
  parts.push("<th></th></tr></thead><tbody>");
  for (let i = 0; i < grid.rows.length; i++) {
    const row = grid.rows[i];
    parts.push("<tr>");
    for (let j = 0; j < row.cells.length; j++) {
      const cell = row.cells[j];
      const cls = isHighlighted(cell)
        ? "cell uncertain"
        : isGreen(cell)
          ? "cell acknowledged"
          : "cell";
      parts.push(
        `<td class="${cls}" data-row="${i}" data-col="${escapeHtml(grid.columns[j])}">` +
          `${escapeHtml(show(cell.value))}</td>`,
      );
    }
    // non-deterministic rows get a marker on the right
    parts.push(
      row.deterministic
        ? "<td></td>"
        : `<td class="row-uncertain" data-row="${i}">&#9888;</td>`,
    );
    parts.push("</tr>");
  }
  parts.push("</tbody></table>");
  parts.push('<div class="provenance">path: ');
  parts.push(
    [...grid.provenance.tables, ...grid.provenance.lenses]
      .map(escapeHtml)
      .join(" &rarr; "),
  );
  parts.push("</div>");
  return parts.join("");
}

export function renderPanelHtml(panel: PanelView): string {
  const parts: string[] = ['<div class="panel">'];
  const metrics: [string, unknown][] = [
    ["confidence", panel.confidence],
    ["variance", panel.variance],
    ["5th pct", panel.ciLow],
    ["95th pct", panel.ciHigh],
    ["lower bound", panel.boundLow],
    ["upper bound", panel.boundHigh],
    ["samples", panel.nSamples],
  ];
  parts.push("<dl>");
  for (const [k, v] of metrics) {
    if (v !== null && v !== undefined) {
      parts.push(`<dt>${k}</dt><dd>${escapeHtml(show(v))}</dd>`);
    }
  }
  parts.push("</dl>");
  parts.push('<ul class="histogram">');
  for (const bar of panel.histogram) {
    parts.push(
      `<li>${escapeHtml(bar.label)}: ${(100 * bar.probability).toFixed(1)}%</li>`,
    );
  }
  parts.push("</ul>");
  parts.push('<ol class="reasons">');
  for (let i = 0; i < panel.reasons.length; i++) {
    const r = panel.reasons[i];
    parts.push(`<li>${escapeHtml(r.text)}`);
    if (r.target) {
      parts.push(
        ` <button data-action="approve" data-reason="${i}">Approve</button>`,
      );
      parts.push(
        ` <button data-action="fix" data-reason="${i}">Fix</button>`,
      );
    }
    parts.push("</li>");
  }
  parts.push("</ol></div>");
  return parts.join("");
}

export function renderConsoleHtml(state: ConsoleState): string {
  const parts: string[] = [];
  if (state.error) {
    parts.push(`<div class="error">${escapeHtml(state.error)}</div>`);
  }
  if (state.grid) {
    parts.push(renderGridHtml(state.grid));
  }
  if (state.panel) {
    parts.push(renderPanelHtml(state.panel.view));
  }
  return parts.join("");
}
