// The resampling pipeline: slider releases funnel through a trailing
// debounce (drags never fire), and at most one request is ever in flight; a
// newer release aborts and supersedes the stale one.

import { ServiceClient } from "./api.js";
import { cloneRequest, validateDraft, type SessionState } from "./state.js";
import type { CounterfactualSetDoc } from "./types.js";

export const DEBOUNCE_MS = 150;

export interface ResamplerEvents {
  onResult: (result: CounterfactualSetDoc) => void;
  onError: (error: unknown) => void;
  onBlocked?: (reasons: string[]) => void;
}

export class Resampler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight: AbortController | null = null;
  private generation = 0;
  /** Sampling requests actually issued (inspectable in tests). */
  issued = 0;

  constructor(
    private readonly client: ServiceClient,
    private readonly state: SessionState,
    private readonly events: ResamplerEvents,
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  /** Call on slider release / editor commit. Drag events must not call this. */
  release(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire();
    }, this.debounceMs);
  }

  /** Immediate dispatch (initial load), still serialized with in-flight work. */
  async fire(): Promise<void> {
    const { runId } = this.state;
    if (runId === null) return;
    const problems = validateDraft(this.state.draft);
    if (problems.length) {
      this.events.onBlocked?.(problems.map((p) => `${p.field}: ${p.message}`));
      return;
    }
    this.generation += 1;
    const myGeneration = this.generation;
    if (this.inFlight) this.inFlight.abort();
    const controller = new AbortController();
    this.inFlight = controller;
    this.issued += 1;
    try {
      const result = await this.client.sample(runId, cloneRequest(this.state.draft), controller.signal);
      if (myGeneration === this.generation) {
        this.state.lastResult = result;
        this.events.onResult(result);
      }
    } catch (error) {
      if ((error as Error)?.name === "AbortError") return; // superseded
      if (myGeneration === this.generation) this.events.onError(error);
    } finally {
      if (this.inFlight === controller) this.inFlight = null;
    }
  }

  /** Flush a pending debounce immediately (used by tests and page unload). */
  async flush(): Promise<void> {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
      await this.fire();
    }
  }
}
