import { describe, expect, it } from "vitest";

import type { JobState, JobView } from "../src/api.js";
import { PollCancelled, pollJob } from "../src/poll.js";

function jobView(state: JobState): JobView {
  return { job_id: "j1", submission_id: "s1", state, report: null, error: null };
}

function scriptedSource(states: JobState[]) {
  let probes = 0;
  return {
    get probes() {
      return probes;
    },
    job: async (_jobId: string): Promise<JobView> => {
      const state = states[Math.min(probes, states.length - 1)];
      probes += 1;
      if (state === undefined) throw new Error("script exhausted");
      return jobView(state);
    },
  };
}

describe("pollJob", () => {
  it("probes until done and then stops", async () => {
    const source = scriptedSource(["queued", "running", "done"]);
    const slept: number[] = [];
    const seen: JobState[] = [];
    const job = await pollJob(source, "j1", {
      sleep: async (ms) => {
        slept.push(ms);
      },
      onUpdate: (view) => seen.push(view.state),
    });
    expect(job.state).toBe("done");
    expect(source.probes).toBe(3);
    expect(seen).toEqual(["queued", "running", "done"]);
    expect(slept).toEqual([1000, 2000]);
  });

  it("backs off 1s, 2s, 4s and caps at 5s", async () => {
    const source = scriptedSource([
      "queued", "queued", "queued", "queued", "queued", "done",
    ]);
    const slept: number[] = [];
    await pollJob(source, "j1", {
      sleep: async (ms) => {
        slept.push(ms);
      },
    });
    expect(slept).toEqual([1000, 2000, 4000, 5000, 5000]);
  });

  it("returns immediately when the first probe is terminal", async () => {
    const source = scriptedSource(["done"]);
    const slept: number[] = [];
    await pollJob(source, "j1", {
      sleep: async (ms) => {
        slept.push(ms);
      },
    });
    expect(slept).toEqual([]);
    expect(source.probes).toBe(1);
  });

  it("treats failed as terminal", async () => {
    const source = scriptedSource(["running", "failed"]);
    const job = await pollJob(source, "j1", { sleep: async () => {} });
    expect(job.state).toBe("failed");
    expect(source.probes).toBe(2);
  });

  it("honours cancellation between probes", async () => {
    const signal = { aborted: false };
    const source = scriptedSource(["queued", "queued", "done"]);
    const outcome = await pollJob(source, "j1", {
      signal,
      sleep: async () => {
        signal.aborted = true;
      },
    }).catch((err: unknown) => err);
    expect(outcome).toBeInstanceOf(PollCancelled);
    expect(source.probes).toBe(1);
  });

  it("accepts a custom starting interval", async () => {
    const source = scriptedSource(["queued", "done"]);
    const slept: number[] = [];
    await pollJob(source, "j1", {
      initialMs: 50,
      sleep: async (ms) => {
        slept.push(ms);
      },
    });
    expect(slept).toEqual([50]);
  });
});
