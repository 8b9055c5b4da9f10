// Job polling with backoff; resolves when the job leaves the queue.

import type { Job } from "./types";

export interface PollOptions {
  intervalMs?: number;
  backoff?: number;
  maxIntervalMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onUpdate?: (job: Job) => void;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export async function pollJob(
  fetchJob: (id: string) => Promise<Job>,
  id: string,
  opts: PollOptions = {},
): Promise<Job> {
  const {
    intervalMs = 500,
    backoff = 1.4,
    maxIntervalMs = 4000,
    timeoutMs = 300_000,
    sleep = defaultSleep,
    onUpdate,
  } = opts;
  let wait = intervalMs;
  let elapsed = 0;
  for (;;) {
    const job = await fetchJob(id);
    onUpdate?.(job);
    if (job.status === "done" || job.status === "failed") return job;
    if (elapsed >= timeoutMs) throw new Error(`job ${id} timed out after ${elapsed}ms`);
    await sleep(wait);
    elapsed += wait;
    wait = Math.min(maxIntervalMs, wait * backoff);
  }
}
