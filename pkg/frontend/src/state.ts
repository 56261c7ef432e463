// Session state: the request draft, the latest result, and pinned snapshots.
// Pins deep-freeze their payloads so later weight changes or resamples can
// never mutate a captured comparison.

import type { CounterfactualSetDoc, SamplingRequestDoc, TargetDoc } from "./types.js";

export interface WeightBounds {
  min: number;
  max: number;
}

// Log-scale slider ranges for the four priority weights.
export const WEIGHT_BOUNDS: Record<"proximity" | "sparsity" | "manifold" | "diversity", WeightBounds> = {
  proximity: { min: 0.01, max: 100 },
  sparsity: { min: 0.01, max: 100 },
  manifold: { min: 0.01, max: 100 },
  diversity: { min: 0.1, max: 50 },
};

export interface Pin {
  id: number;
  label: string;
  request: SamplingRequestDoc;
  result: CounterfactualSetDoc;
}

export interface SessionState {
  runId: string | null;
  draft: SamplingRequestDoc;
  lastResult: CounterfactualSetDoc | null;
  pins: Pin[];
}

export function defaultDraft(): SamplingRequestDoc {
  return {
    weights: { proximity: 0.5, sparsity: 0.2, manifold: 0.5, diversity: 0.2 },
    targets: [],
    count: 5,
    seed: 0,
  };
}

export function initialState(): SessionState {
  return { runId: null, draft: defaultDraft(), lastResult: null, pins: [] };
}

export interface DraftProblem {
  field: string;
  message: string;
}

/** Client-side validation mirroring the service's request rules. */
export function validateDraft(draft: SamplingRequestDoc): DraftProblem[] {
  const problems: DraftProblem[] = [];
  const { weights } = draft;
  for (const key of ["proximity", "sparsity", "manifold"] as const) {
    if (!(weights[key] >= 0)) problems.push({ field: key, message: "must be >= 0" });
  }
  if (!(weights.diversity > 0)) problems.push({ field: "diversity", message: "must be > 0" });
  if (!(Number.isInteger(draft.count) && draft.count >= 1)) {
    problems.push({ field: "count", message: "must be an integer >= 1" });
  }
  const hasSignal =
    weights.proximity > 0 || weights.sparsity > 0 || weights.manifold > 0 || draft.targets.length > 0;
  if (!hasSignal) problems.push({ field: "weights", message: "set at least one weight or target" });
  for (const target of draft.targets) {
    if (!(target.target > 0)) problems.push({ field: target.objective, message: "target must be > 0" });
    if (!(target.alpha > 0) || !(target.beta > 0)) {
      problems.push({ field: target.objective, message: "alpha and beta must be > 0" });
    }
  }
  return problems;
}

export function cloneRequest(request: SamplingRequestDoc): SamplingRequestDoc {
  return {
    weights: { ...request.weights },
    targets: request.targets.map((t: TargetDoc) => ({ ...t })),
    count: request.count,
    seed: request.seed,
  };
}

function deepFreeze<T>(value: T): T {
  if (value && typeof value === "object" && !Object.isFrozen(value)) {
    Object.freeze(value);
    for (const key of Object.keys(value as object)) {
      deepFreeze((value as Record<string, unknown>)[key]);
    }
  }
  return value;
}

let pinCounter = 0;

export function pinCurrent(state: SessionState): Pin | null {
  if (!state.lastResult) return null;
  pinCounter += 1;
  const { weights } = state.lastResult.request;
  const pin: Pin = deepFreeze({
    id: pinCounter,
    label:
      `pin ${pinCounter}: pr=${weights.proximity} sp=${weights.sparsity} ` +
      `mp=${weights.manifold} d=${weights.diversity}`,
    request: JSON.parse(JSON.stringify(state.lastResult.request)),
    result: JSON.parse(JSON.stringify(state.lastResult)),
  });
  state.pins = [...state.pins, pin];
  return pin;
}

export function removePin(state: SessionState, id: number): void {
  state.pins = state.pins.filter((pin) => pin.id !== id);
}

/** Map a slider position in [0, 1] to a log-scale weight and back. */
export function sliderToWeight(position: number, bounds: WeightBounds): number {
  const clamped = Math.min(1, Math.max(0, position));
  const logMin = Math.log10(bounds.min);
  const logMax = Math.log10(bounds.max);
  return 10 ** (logMin + clamped * (logMax - logMin));
}

export function weightToSlider(weight: number, bounds: WeightBounds): number {
  const logMin = Math.log10(bounds.min);
  const logMax = Math.log10(bounds.max);
  const clamped = Math.min(bounds.max, Math.max(bounds.min, weight));
  return (Math.log10(clamped) - logMin) / (logMax - logMin);
}
