// Aggregate results table for the study runner.

import { escapeHtml } from "./render.js";
import type { ResultsRow, ResultsTable } from "./types.js";

function pct(value: number | undefined): string {
  return value === undefined ? "&ndash;" : value.toFixed(2);
}

function row(label: string, r: ResultsRow): string {
  return [
    `<tr><td>${escapeHtml(label)}</td><td>${r.items}</td>`,
    `<td>${pct(r.agreement_pct)}</td>`,
    `<td>${pct(r.model_corpus_pct)}</td>`,
    `<td>${pct(r.model_human_pct)}</td></tr>`,
  ].join("");
}

export function renderDashboard(results: ResultsTable): string {
  if (!results.total || results.total.items === 0) {
    return `<p class="hint">No judgments recorded yet.</p>`;
  }
  const parts = [
    `<table class="results">`,
    `<thead><tr><th>Construction (items)</th><th>n</th>`,
    `<th>Agreement % human:corpus</th><th>Model % corpus labels</th>`,
    `<th>Model % human labels</th></tr></thead>`,
    `<tbody>`,
  ];
  for (const [tag, r] of Object.entries(results.per_construction)) {
    parts.push(row(tag, r));
  }
  parts.push(row("Total", results.total));
  parts.push(`</tbody></table>`);
  if (results.pearson) {
    const h = results.pearson.vs_human;
    const c = results.pearson.vs_corpus;
    parts.push(
      `<p class="pearson">Pearson r of model probability: ` +
        `vs human labels ${h === null ? "undefined" : h.toFixed(3)}, ` +
        `vs corpus labels ${c === null ? "undefined" : c.toFixed(3)}</p>`,
    );
  }
  return parts.join("\n");
}
