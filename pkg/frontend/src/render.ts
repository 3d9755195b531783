// HTML fragments for the participant view. Pure string builders so the
// rendering logic is testable without a DOM.

import type { SessionState } from "./session.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderState(state: SessionState): string {
  switch (state.kind) {
    case "idle":
      return `<p class="hint">Enter a participant id to begin.</p>`;
    case "loading":
      return `<p class="hint">Loading&hellip;</p>`;
    case "judging": {
      const v = state.view;
      return [
        `<p class="progress">Item ${v.answered + 1} of ${v.total}</p>`,
        `<section class="context"><h2>Preceding sentence</h2>`,
        `<p lang="hi">${escapeHtml(v.context_text)}</p></section>`,
        `<p class="question">Which continuation reads best?</p>`,
        `<div class="options">`,
        `<button class="option" data-choice="A" lang="hi">${escapeHtml(v.option_a_text)}</button>`,
        `<button class="option" data-choice="B" lang="hi">${escapeHtml(v.option_b_text)}</button>`,
        `</div>`,
        `<p class="hint">Click an option, or use the left / right arrow keys.</p>`,
      ].join("\n");
    }
    case "done":
      return [
        `<p class="done">All ${state.total} items answered. Thank you!</p>`,
      ].join("\n");
    case "error":
      return [
        `<p class="error">${escapeHtml(state.message)}</p>`,
        state.retryable ? `<button id="retry">Retry</button>` : "",
      ].join("\n");
  }
}
