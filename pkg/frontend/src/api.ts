// Thin typed client over the documented service endpoints. Every network
// call in the app goes through one ServiceClient so requests can be counted
// and superseded-request aborts live in one place.

import type { CandidatePage, CounterfactualSetDoc, RunDoc, SamplingRequestDoc } from "./types.js";

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  /** Total requests issued, by endpoint kind (inspectable in tests). */
  readonly requestCounts: Record<string, number> = {};

  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private count(kind: string): void {
    this.requestCounts[kind] = (this.requestCounts[kind] ?? 0) + 1;
  }

  private async request<T>(kind: string, path: string, init?: RequestInit): Promise<T> {
    this.count(kind);
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // keep statusText
      }
      throw new ServiceError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  listRuns(): Promise<{ runs: RunDoc[] }> {
    return this.request("listRuns", "/v1/runs");
  }

  getRun(runId: string): Promise<RunDoc> {
    return this.request("getRun", `/v1/runs/${runId}`);
  }

  candidates(runId: string, offset = 0, limit = 500): Promise<CandidatePage> {
    return this.request("candidates", `/v1/runs/${runId}/candidates?offset=${offset}&limit=${limit}`);
  }

  sample(runId: string, body: SamplingRequestDoc, signal?: AbortSignal): Promise<CounterfactualSetDoc> {
    return this.request("sample", `/v1/runs/${runId}/samples`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
  }
}
