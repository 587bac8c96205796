/** HTML builders for every view fragment the client shows.
 *
 * All values pass through escapeHtml, and every number shown comes
 * straight from a server payload: the client never adds points up or
 * derives a score on its own.
 */

import {
  GradebookEntry,
  GradeReport,
  JobView,
  SequenceView,
  UnitEntry,
} from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** 7.5 -> "7.5", 5 -> "5"; display formatting only. */
export function formatPoints(value: number): string {
  return String(value);
}

export function unitTabs(sequence: SequenceView, activeUnit: string): string {
  const tabs = sequence.units
    .map((unit) => {
      const classes = unit.unit_id === activeUnit ? "tab active" : "tab";
      const href = `#/course/${encodeURIComponent(sequence.course_id)}` +
        `/unit/${encodeURIComponent(unit.unit_id)}`;
      return (
        `<a class="${classes}" data-unit-id="${escapeHtml(unit.unit_id)}" ` +
        `data-kind="${escapeHtml(unit.kind)}" href="${escapeHtml(href)}">` +
        `${escapeHtml(unit.title)}</a>`
      );
    })
    .join("");
  return `<nav class="unit-tabs">${tabs}</nav>`;
}

export function tamperBanner(): string {
  return (
    '<div class="banner tampered">Protected cells were modified in this ' +
    "submission; the instructor's originals were restored before grading.</div>"
  );
}

export function scoreTable(report: GradeReport): string {
  const rows = report.rows
    .map((row) => {
      const cls = row.passed ? "pass" : "fail";
      const mark = row.passed ? "&#10003;" : "&#10007;";
      const message = row.message === null ? "" : escapeHtml(row.message);
      return (
        `<tr class="${cls}"><td>${escapeHtml(row.grade_id)}</td>` +
        `<td>${formatPoints(row.earned)} / ${formatPoints(row.points)}</td>` +
        `<td class="mark">${mark}</td><td class="message">${message}</td></tr>`
      );
    })
    .join("");
  const banner = report.tampered ? tamperBanner() : "";
  return (
    banner +
    '<table class="score-table">' +
    "<thead><tr><th>question</th><th>points</th><th></th><th></th></tr></thead>" +
    `<tbody>${rows}</tbody>` +
    `<tfoot><tr class="total"><td>total</td>` +
    `<td>${formatPoints(report.earned)} / ${formatPoints(report.possible)}</td>` +
    `<td></td><td></td></tr></tfoot></table>`
  );
}

export function jobStateLine(job: JobView): string {
  if (job.state === "failed") {
    const detail = job.error === null ? "" : `: ${escapeHtml(job.error)}`;
    return `<p class="job-state failed">grading failed${detail}</p>`;
  }
  return `<p class="job-state ${job.state}">${escapeHtml(job.state)}&hellip;</p>`;
}

export function uploadPanel(unit: UnitEntry, releaseUrl: string): string {
  const points =
    unit.points_possible === undefined
      ? ""
      : ` <span class="points">(${formatPoints(unit.points_possible)} points)</span>`;
  return (
    `<section class="upload-panel" data-assignment-id="${escapeHtml(unit.unit_id)}">` +
    `<h2>${escapeHtml(unit.title)}${points}</h2>` +
    `<p><a class="release-link" href="${escapeHtml(releaseUrl)}" download>` +
    "Download the assignment notebook</a></p>" +
    '<p><input type="file" class="submission-file" accept=".ipynb"> ' +
    '<button type="button" class="submission-send">Upload solution</button></p>' +
    '<div class="submission-status"></div><div class="submission-result"></div>' +
    "</section>"
  );
}

export function gradebookTable(entries: GradebookEntry[]): string {
  if (entries.length === 0) {
    return '<p class="gradebook-empty">No recorded scores yet.</p>';
  }
  const rows = entries
    .map(
      (entry) =>
        `<tr><td>${escapeHtml(entry.assignment_id)}</td>` +
        `<td>${formatPoints(entry.earned)} / ${formatPoints(entry.possible)}</td>` +
        `<td>${escapeHtml(String(entry.score))}</td>` +
        `<td>${escapeHtml(entry.policy)}</td></tr>`,
    )
    .join("");
  return (
    '<table class="gradebook">' +
    "<thead><tr><th>assignment</th><th>points</th><th>score</th><th>policy</th></tr></thead>" +
    `<tbody>${rows}</tbody></table>`
  );
}

export function errorBanner(detail: string, retryable: boolean): string {
  const hint = retryable
    ? ' <button type="button" class="retry">Retry</button>'
    : "";
  return `<div class="banner error">${escapeHtml(detail)}${hint}</div>`;
}

export function notFoundPage(courseId: string): string {
  return (
    '<div class="not-found"><h2>Course not found</h2>' +
    `<p>No course named <code>${escapeHtml(courseId)}</code> is loaded.</p></div>`
  );
}
