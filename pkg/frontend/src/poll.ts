/** Run-state polling: 1 s interval, backing off to 5 s after two minutes,
 * stopping at terminal states. At most one in-flight poll per view. */

import { getRunState } from "./api.js";
import type { RunState } from "./types.js";

export const POLL_INTERVAL_MS = 1000;
export const SLOW_INTERVAL_MS = 5000;
export const BACKOFF_AFTER_MS = 120_000;

const TERMINAL: ReadonlySet<string> = new Set(["succeeded", "failed", "cancelled"]);

export interface PollHandle {
  cancel(): void;
  done: Promise<RunState>;
}

type Sleep = (ms: number) => Promise<void>;

const realSleep: Sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export function pollRun(runId: string, onState: (state: RunState) => void,
                        sleep: Sleep = realSleep): PollHandle {
  let cancelled = false;
  const done = (async () => {
    let waited = 0;
    for (;;) {
      const state = await getRunState(runId);
      if (cancelled) return state;
      onState(state);
      if (TERMINAL.has(state.status)) return state;
      const interval = waited >= BACKOFF_AFTER_MS ? SLOW_INTERVAL_MS : POLL_INTERVAL_MS;
      await sleep(interval);
      waited += interval;
      if (cancelled) return state;
    }
  })();
  return { cancel: () => { cancelled = true; }, done };
}
