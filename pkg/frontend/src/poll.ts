/** Job polling: 1 s interval backing off to 5 s, stopping at terminal states. */

import type { JobState, JobView } from "./api.js";

/** Anything that can answer a job-status probe (the API client does). */
export interface JobSource {
  job(jobId: string): Promise<JobView>;
}

export const TERMINAL_STATES: readonly JobState[] = ["done", "failed"];

export interface PollOptions {
  initialMs?: number;
  maxMs?: number;
  onUpdate?: (job: JobView) => void;
  sleep?: (ms: number) => Promise<void>;
  signal?: { aborted: boolean };
}

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class PollCancelled extends Error {
  constructor() {
    super("polling cancelled");
    this.name = "PollCancelled";
  }
}

/**
 * Poll until the job reaches done or failed and return the final view.
 *
 * The delay doubles after every probe, capped at maxMs, so a stuck queue
 * costs one request per five seconds. No timer survives the terminal
 * state: the function simply returns, so callers cannot leak a loop.
 */
export async function pollJob(
  client: JobSource,
  jobId: string,
  options: PollOptions = {},
): Promise<JobView> {
  const sleep = options.sleep ?? defaultSleep;
  const maxMs = options.maxMs ?? 5000;
  let delay = options.initialMs ?? 1000;
  for (;;) {
    if (options.signal?.aborted) throw new PollCancelled();
    const job = await client.job(jobId);
    options.onUpdate?.(job);
    if (TERMINAL_STATES.includes(job.state)) return job;
    await sleep(delay);
    delay = Math.min(delay * 2, maxMs);
  }
}
