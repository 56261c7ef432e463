// Shared fixtures: a fake two-feature problem and a scripted ServiceClient
// whose sample() answers from a queue, so controller tests run without a
// network or a real engine.

import { ServiceClient, type FetchLike } from "../src/api.js";
import type {
  CounterfactualSetDoc,
  ProblemSummary,
  RunDoc,
  SampledEntryDoc,
  SamplingRequestDoc,
} from "../src/types.js";

export const PROBLEM: ProblemSummary = {
  schema: {
    features: [
      { name: "x1", kind: "continuous", lower: 0, upper: 1, actionable: true },
      { name: "x2", kind: "continuous", lower: 0, upper: 1, actionable: true },
    ],
  },
  query: [0.2, 0.3],
  ranges: [0.95, 0.97],
  objectives: [{ name: "peak_density", direction: "maximize", channel: "Y2", expression: null }],
};

export function entry(index: number, values: (number | string)[], quality = 0.8): SampledEntryDoc {
  return {
    archive_index: index,
    values,
    objectives: { proximity: 0.1, sparsity: 0.5, manifold_proximity: 0.02, auxiliary: {} },
    quality,
    dtai: null,
    achievement_ratios: {},
    quality_breakdown: { proximity_term: 0.05, sparsity_term: 0.1, manifold_term: 0.01, target_penalty: null },
  };
}

export function resultDoc(request: SamplingRequestDoc, entries: SampledEntryDoc[]): CounterfactualSetDoc {
  return {
    request,
    feature_names: ["x1", "x2"],
    auxiliary_names: [],
    query: PROBLEM.query,
    entries,
  };
}

export const FINISHED_RUN: RunDoc = {
  run_id: "run-one",
  problem_id: "problem-one",
  state: "finished",
  created_at: 0,
  progress: { generation: 10, generations: 10, feasible: 5, best_violation: 0, archive_size: 40 },
  error: null,
  archive_entries: 40,
  problem: PROBLEM,
};

export interface ScriptedService {
  client: ServiceClient;
  sampleBodies: SamplingRequestDoc[];
  /** Push the entries the next sample() call should return. */
  queueResult(entries: SampledEntryDoc[]): void;
}

export function scriptedService(): ScriptedService {
  const queue: SampledEntryDoc[][] = [];
  const sampleBodies: SamplingRequestDoc[] = [];

  const fetchImpl: FetchLike = async (input, init) => {
    const url = new URL(input, "http://fake");
    const respond = (body: unknown, status = 200) =>
      new Response(JSON.stringify(body), { status, headers: { "Content-Type": "application/json" } });

    if (url.pathname === "/v1/runs" && (!init || !init.method)) {
      return respond({ runs: [FINISHED_RUN] });
    }
    if (url.pathname === "/v1/runs/run-one") {
      return respond(FINISHED_RUN);
    }
    if (url.pathname === "/v1/runs/run-one/candidates") {
      return respond({ total: 0, offset: 0, limit: 0, entries: [] });
    }
    if (url.pathname === "/v1/runs/run-one/samples" && init?.method === "POST") {
      const body = JSON.parse(String(init.body)) as SamplingRequestDoc;
      sampleBodies.push(body);
      const entries = queue.length ? queue.shift()! : [entry(1, [0.33, 0.3]), entry(2, [0.67, 0.31])];
      return respond(resultDoc(body, entries));
    }
    return respond({ detail: `unhandled ${init?.method ?? "GET"} ${url.pathname}` }, 404);
  };

  return {
    client: new ServiceClient("http://fake", fetchImpl),
    sampleBodies,
    queueResult: (entries) => queue.push(entries),
  };
}

export function mount(): HTMLElement {
  document.body.innerHTML = `<div id="app"></div>`;
  return document.getElementById("app") as HTMLElement;
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
