/**
 * HTML renderers for the review screen.  Each function returns a markup
 * string built from escaped text, so the pieces can be asserted on directly
 * in tests and the DOM layer stays a thin innerHTML assignment.
 */

import {
  canSubmit,
  extractGivenDoctests,
  rowProblem,
  type DoctestRow,
  type ReviewState,
} from "./viewmodel.js";

const HTML_ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => HTML_ESCAPES[ch]!);
}

export function renderBanner(
  kind: "error" | "info",
  message: string,
  options: { reload?: boolean } = {},
): string {
  const button = options.reload
    ? ' <button id="reload-btn" type="button">Reload session</button>'
    : "";
  return `<div class="banner ${kind}" role="alert">${escapeHtml(message)}${button}</div>`;
}

function renderVerdictCell(row: DoctestRow): string {
  const acceptChecked = row.verdict === "accept" ? " checked" : "";
  const rejectChecked = row.verdict === "reject" ? " checked" : "";
  const rejectDisabled = row.isGiven ? " disabled" : "";
  return (
    `<label><input type="radio" name="verdict-${row.index}" value="accept"` +
    ` data-index="${row.index}"${acceptChecked}> Accept</label> ` +
    `<label><input type="radio" name="verdict-${row.index}" value="reject"` +
    ` data-index="${row.index}"${rejectChecked}${rejectDisabled}> Reject</label>`
  );
}

function renderCorrectionCell(row: DoctestRow): string {
  if (row.verdict !== "reject") {
    return "";
  }
  const problem = rowProblem(row);
  const note =
    problem === null
      ? ""
      : `<span class="problem">${escapeHtml(problem)}</span>`;
  return (
    `<input type="text" class="correction" data-index="${row.index}"` +
    ` value="${escapeHtml(row.correctionText)}"` +
    ` placeholder="expected value or Error: message" aria-label="correction">` +
    note
  );
}

function renderRow(row: DoctestRow): string {
  const badge = row.isGiven ? ' <span class="badge">given</span>' : "";
  const doctest = row.doctestText || `${row.input} → ${row.outcomeLabel}`;
  return (
    `<tr data-index="${row.index}">` +
    `<td><pre class="doctest">${escapeHtml(doctest)}</pre>${badge}</td>` +
    `<td class="verdict">${renderVerdictCell(row)}</td>` +
    `<td class="correction-cell">${renderCorrectionCell(row)}</td>` +
    `</tr>`
  );
}

export function renderRows(rows: DoctestRow[]): string {
  return (
    '<table class="doctest-table">' +
    "<thead><tr><th>Proposed doctest</th><th>Verdict</th><th>Correction</th></tr></thead>" +
    `<tbody>${rows.map(renderRow).join("")}</tbody>` +
    "</table>"
  );
}

export function renderEmptyState(specText: string): string {
  const given = extractGivenDoctests(specText);
  const blocks = given
    .map((block) => `<pre class="doctest">${escapeHtml(block)}</pre>`)
    .join("");
  return (
    '<div class="empty-state">' +
    "<p>Nothing needs review: no extra doctests were proposed.</p>" +
    (blocks
      ? `<p>The specification already pins these examples:</p>${blocks}`
      : "") +
    "</div>"
  );
}

export function renderGivenFailures(failures: string[]): string {
  if (failures.length === 0) {
    return "";
  }
  const items = failures
    .map((text) => `<li><pre class="doctest">${escapeHtml(text)}</pre></li>`)
    .join("");
  return (
    '<div class="banner error" role="alert">' +
    "<p>The candidate does not satisfy these given doctests:</p>" +
    `<ul>${items}</ul></div>`
  );
}

export function renderReview(state: ReviewState): string {
  const heading = state.functionName
    ? `Review doctests for <code>${escapeHtml(state.functionName)}</code>`
    : "Review doctests";
  const body =
    state.rows.length > 0
      ? renderRows(state.rows)
      : renderEmptyState(state.specText);
  const submit =
    state.rows.length > 0
      ? `<div class="submit-bar"><button id="submit-btn" type="button"` +
        `${canSubmit(state) ? "" : " disabled"}>Submit feedback</button></div>`
      : "";
  return (
    `<section class="review"><h2>${heading}</h2>` +
    renderGivenFailures(state.givenFailures) +
    body +
    submit +
    "</section>"
  );
}

export function renderRevealed(
  code: string,
  meta: { provenance?: string; attemptsUsed?: number } = {},
): string {
  const parts: string[] = [];
  if (meta.provenance) {
    parts.push(`selected: ${meta.provenance}`);
  }
  if (meta.attemptsUsed !== undefined) {
    parts.push(`correction attempts used: ${meta.attemptsUsed}`);
  }
  const metaLine = parts.length
    ? `<p class="meta">${escapeHtml(parts.join(" · "))}</p>`
    : "";
  return (
    '<section class="revealed"><h2>Selected implementation</h2>' +
    metaLine +
    `<pre id="revealed-code" class="code">${escapeHtml(code)}</pre>` +
    "</section>"
  );
}

export function renderFailed(reason: string): string {
  return (
    '<section class="failed"><h2>No implementation matched</h2>' +
    `<p>${escapeHtml(reason || "the correction attempts were exhausted")}</p>` +
    "</section>"
  );
}
