/** Job polling with capped backoff; stops on terminal states. */

import type { JobStatus } from './types';

export interface PollOptions {
  initialDelayMs?: number;
  factor?: number;
  maxDelayMs?: number; // never exceeded, per the client contract (2s cap)
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onDelay?: (ms: number) => void;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export const MAX_POLL_DELAY_MS = 2000;

export async function pollUntilTerminal(
  fetchStatus: () => Promise<JobStatus>,
  options: PollOptions = {},
): Promise<JobStatus> {
  const {
    initialDelayMs = 250,
    factor = 1.6,
    maxDelayMs = MAX_POLL_DELAY_MS,
    timeoutMs = 180_000,
    sleep = defaultSleep,
    onDelay,
  } = options;
  const startedAt = Date.now();
  let delay = initialDelayMs;
  for (;;) {
    const status = await fetchStatus();
    if (status.state === 'done' || status.state === 'failed') {
      return status;
    }
    if (Date.now() - startedAt > timeoutMs) {
      throw new Error(`job ${status.job_id} still ${status.state} after ${timeoutMs} ms`);
    }
    const bounded = Math.min(delay, maxDelayMs);
    onDelay?.(bounded);
    await sleep(bounded);
    delay = delay * factor;
  }
}
