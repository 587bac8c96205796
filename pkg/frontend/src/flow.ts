/** The submission flow and unit display: the parts of the page that talk
 * to the service. DOM containers and the clock are injected so the whole
 * flow runs under tests without a browser event loop.
 */

import { ApiError, Client, JobView, SequenceView } from "./api.js";
import { enhanceFragment } from "./enhance.js";
import {
  errorBanner,
  jobStateLine,
  scoreTable,
  uploadPanel,
} from "./render.js";
import { pollJob } from "./poll.js";

/** Pre-flight check; a message means "do not upload this". */
export function looksLikeNotebook(name: string, text: string): string | null {
  if (!name.toLowerCase().endsWith(".ipynb")) {
    return "expected a .ipynb notebook file";
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch {
    return "file is not valid JSON; export the notebook and retry";
  }
  if (
    typeof parsed !== "object" ||
    parsed === null ||
    !Array.isArray((parsed as { cells?: unknown }).cells)
  ) {
    return "file is JSON but not a notebook (no cells list)";
  }
  return null;
}

export interface UploadFile {
  name: string;
  text(): Promise<string>;
}

/**
 * Upload one solution and watch it through the queue.
 *
 * Returns the terminal job view, or null when the file never left the
 * browser (pre-flight failure). Progress and the final score table are
 * written into the panel's status/result containers.
 */
export async function runUploadFlow(
  panel: HTMLElement,
  client: Client,
  assignmentId: string,
  userId: string,
  file: UploadFile,
  sleep?: (ms: number) => Promise<void>,
): Promise<JobView | null> {
  const status = panel.querySelector<HTMLElement>(".submission-status");
  const result = panel.querySelector<HTMLElement>(".submission-result");
  if (!status || !result) throw new Error("upload panel is missing its containers");
  result.innerHTML = "";

  const text = await file.text();
  const objection = looksLikeNotebook(file.name, text);
  if (objection !== null) {
    status.innerHTML = errorBanner(objection, false);
    return null;
  }

  let jobId: string;
  try {
    status.innerHTML = '<p class="job-state">uploading&hellip;</p>';
    const accepted = await client.submit(assignmentId, userId, text);
    jobId = accepted.job_id;
  } catch (failure) {
    if (failure instanceof ApiError && failure.status === 429) {
      status.innerHTML = errorBanner(
        "the grading queue is full - wait a moment and retry", true);
    } else if (failure instanceof ApiError) {
      status.innerHTML = errorBanner(failure.message, false);
    } else {
      status.innerHTML = errorBanner("service unreachable - retry shortly", true);
    }
    return null;
  }

  const job = await pollJob(client, jobId, {
    sleep,
    onUpdate: (view) => {
      status.innerHTML = jobStateLine(view);
    },
  });
  if (job.state === "done" && job.report !== null) {
    status.innerHTML = "";
    result.innerHTML = scoreTable(job.report);
  } else {
    status.innerHTML = jobStateLine(job);
  }
  return job;
}

/** Inject one unit's server fragment (plus the upload panel for assignments). */
export async function showUnit(
  panel: HTMLElement,
  client: Client,
  sequence: SequenceView,
  unitId: string,
): Promise<void> {
  const unit = sequence.units.find((u) => u.unit_id === unitId);
  if (unit === undefined) {
    panel.innerHTML = errorBanner(`unknown unit ${unitId}`, false);
    return;
  }
  const html = await client.unitHtml(unitId);
  let page = `<article class="unit-body">${html}</article>`;
  if (unit.kind === "assignment") {
    page += uploadPanel(unit, client.releaseUrl(unit.unit_id));
  }
  panel.innerHTML = page;
  enhanceFragment(panel);
}
