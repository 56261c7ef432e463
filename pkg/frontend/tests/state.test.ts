import { describe, expect, it } from "vitest";

import {
  WEIGHT_BOUNDS,
  defaultDraft,
  initialState,
  pinCurrent,
  removePin,
  sliderToWeight,
  validateDraft,
  weightToSlider,
} from "../src/state.js";
import { entry, resultDoc } from "./helpers.js";

describe("validateDraft", () => {
  it("accepts the default draft", () => {
    expect(validateDraft(defaultDraft())).toEqual([]);
  });

  it("rejects all-zero weights without targets", () => {
    const draft = defaultDraft();
    draft.weights = { proximity: 0, sparsity: 0, manifold: 0, diversity: 1 };
    expect(validateDraft(draft).map((p) => p.field)).toContain("weights");
  });

  it("rejects non-positive diversity and bad counts", () => {
    const draft = defaultDraft();
    draft.weights.diversity = 0;
    draft.count = 0;
    const fields = validateDraft(draft).map((p) => p.field);
    expect(fields).toContain("diversity");
    expect(fields).toContain("count");
  });

  it("checks target positivity", () => {
    const draft = defaultDraft();
    draft.targets = [{ objective: "mass", target: -1, alpha: 1, beta: 1 }];
    expect(validateDraft(draft).map((p) => p.field)).toContain("mass");
  });
});

describe("log-scale sliders", () => {
  it("round-trips weights through slider positions", () => {
    for (const key of ["proximity", "sparsity", "manifold", "diversity"] as const) {
      const bounds = WEIGHT_BOUNDS[key];
      for (const weight of [bounds.min, 1, bounds.max]) {
        const back = sliderToWeight(weightToSlider(weight, bounds), bounds);
        expect(back).toBeCloseTo(weight, 9);
      }
    }
  });

  it("maps the midpoint to the geometric mean", () => {
    const bounds = { min: 0.01, max: 100 };
    expect(sliderToWeight(0.5, bounds)).toBeCloseTo(1.0, 9);
  });
});

describe("pins", () => {
  it("pin snapshots are frozen and survive later mutation", () => {
    const state = initialState();
    state.runId = "run-one";
    const request = defaultDraft();
    state.lastResult = resultDoc(request, [entry(3, [0.4, 0.5])]);

    const pin = pinCurrent(state);
    expect(pin).not.toBeNull();
    const snapshot = JSON.stringify(pin!.result);

    // Mutate live state as a later resample would.
    state.draft.weights.diversity = 20;
    state.lastResult = resultDoc(state.draft, [entry(9, [0.9, 0.9])]);

    expect(JSON.stringify(state.pins[0].result)).toBe(snapshot);
    expect(Object.isFrozen(state.pins[0].result)).toBe(true);
    expect(Object.isFrozen(state.pins[0].result.entries[0])).toBe(true);
    expect(() => {
      (state.pins[0].result.entries[0] as { quality: number }).quality = 0;
    }).toThrow(TypeError);
  });

  it("pinning nothing returns null", () => {
    const state = initialState();
    expect(pinCurrent(state)).toBeNull();
  });

  it("removePin drops only the matching pin", () => {
    const state = initialState();
    state.lastResult = resultDoc(defaultDraft(), [entry(1, [0.1, 0.1])]);
    const first = pinCurrent(state)!;
    state.lastResult = resultDoc(defaultDraft(), [entry(2, [0.2, 0.2])]);
    const second = pinCurrent(state)!;
    removePin(state, first.id);
    expect(state.pins.map((p) => p.id)).toEqual([second.id]);
  });
});
