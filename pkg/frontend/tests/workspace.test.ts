import { describe, expect, it } from "vitest";

import { Workspace } from "../src/controller.js";
import { renderResultsTable, renderRunList } from "../src/render.js";
import { defaultDraft } from "../src/state.js";
import type { RunDoc } from "../src/types.js";
import { FINISHED_RUN, PROBLEM, entry, mount, resultDoc, scriptedService, sleep } from "./helpers.js";

describe("run list rendering", () => {
  it("empty data dir shows an empty-state message", () => {
    expect(renderRunList([], null)).toContain("No runs yet");
  });

  it("finished runs are selectable, failed runs disabled with a badge", () => {
    const failed: RunDoc = { ...FINISHED_RUN, run_id: "run-bad", state: "failed", error: "boom", problem: null };
    const html = renderRunList([FINISHED_RUN, failed], null);
    expect(html).toContain('data-run-id="run-one"');
    expect(html).toContain('data-selectable="true"');
    expect(html).toContain('data-selectable="false"');
    expect(html).toContain("badge-failed");
    expect(html).toContain("boom");
  });
});

describe("results table", () => {
  it("highlights exactly the changed cells and locks non-actionable columns", () => {
    const problem = {
      ...PROBLEM,
      schema: {
        features: [
          { ...PROBLEM.schema.features[0] },
          { ...PROBLEM.schema.features[1], actionable: false },
        ],
      },
    };
    // x1 changed, x2 equals the query exactly.
    const doc = resultDoc(defaultDraft(), [entry(5, [0.34, problem.query[1]])]);
    const html = renderResultsTable(doc, problem);
    const changedCells = html.match(/class="[^"]*changed[^"]*"/g) ?? [];
    expect(changedCells.length).toBe(1);
    expect(html).toContain("locked");
    expect(html).toContain("query-row");
  });
});

describe("workspace wiring", () => {
  it("drags preview only; release issues exactly one request", async () => {
    const service = scriptedService();
    const workspace = new Workspace(mount(), service.client, { debounceMs: 10 });
    await workspace.refreshRuns();
    await workspace.selectRun("run-one");
    const before = service.sampleBodies.length;
    expect(before).toBe(1); // initial load samples once

    const slider = document.getElementById("slider-diversity") as HTMLInputElement;
    for (const position of [400, 600, 800]) {
      slider.value = String(position);
      slider.dispatchEvent(new Event("input", { bubbles: true })); // drag
    }
    await sleep(30);
    expect(service.sampleBodies.length).toBe(before); // drags never fire

    slider.dispatchEvent(new Event("change", { bubbles: true })); // release
    await sleep(40);
    expect(service.sampleBodies.length).toBe(before + 1);
    expect(service.sampleBodies[before].weights.diversity).toBeGreaterThan(
      defaultDraft().weights.diversity,
    );
  });

  it("renders the sampled set and updates the readout", async () => {
    const service = scriptedService();
    service.queueResult([entry(1, [0.33, 0.3]), entry(2, [0.67, 0.31]), entry(3, [0.35, 0.72])]);
    const workspace = new Workspace(mount(), service.client, { debounceMs: 10 });
    await workspace.refreshRuns();
    await workspace.selectRun("run-one");
    const results = document.getElementById("results")!;
    expect(results.querySelectorAll("tbody tr").length).toBe(4); // query + 3 picks
    expect(document.getElementById("readout")!.textContent).toContain("3 counterfactuals");
    expect(document.querySelector("svg.scatter")).not.toBeNull();
  });

  it("pins survive subsequent resampling and removal works", async () => {
    const service = scriptedService();
    service.queueResult([entry(1, [0.33, 0.3])]);
    const workspace = new Workspace(mount(), service.client, { debounceMs: 10 });
    await workspace.refreshRuns();
    await workspace.selectRun("run-one");

    (document.getElementById("pin-button") as HTMLButtonElement).click();
    expect(workspace.state.pins.length).toBe(1);
    const snapshot = JSON.stringify(workspace.state.pins[0].result);
    expect(document.querySelectorAll(".pin-panel").length).toBe(1);

    service.queueResult([entry(9, [0.9, 0.9])]);
    workspace.setWeight("diversity", 20);
    workspace.releaseSlider();
    await sleep(40);
    expect(JSON.stringify(workspace.state.pins[0].result)).toBe(snapshot);

    (document.querySelector(".unpin") as HTMLButtonElement).click();
    expect(workspace.state.pins.length).toBe(0);
    expect((document.getElementById("compare-title") as HTMLElement).hidden).toBe(true);
  });

  it("target editors commit into the request and block invalid drafts", async () => {
    const service = scriptedService();
    const workspace = new Workspace(mount(), service.client, { debounceMs: 10 });
    await workspace.refreshRuns();
    await workspace.selectRun("run-one");
    const issued = service.sampleBodies.length;

    const row = document.querySelector<HTMLElement>("#targets .target-row")!;
    expect(row.dataset.objective).toBe("peak_density");
    const valueInput = row.querySelector<HTMLInputElement>(".target-value")!;
    expect(valueInput.disabled).toBe(true);

    // Enable targeting with an empty value: draft invalid, nothing issued.
    const enable = row.querySelector<HTMLInputElement>(".target-enable")!;
    enable.checked = true;
    enable.dispatchEvent(new Event("change", { bubbles: true }));
    await sleep(40);
    expect(valueInput.disabled).toBe(false);
    expect(service.sampleBodies.length).toBe(issued);
    expect(workspace.status).toContain("peak_density");

    // Commit a real target: exactly one request carrying it.
    valueInput.value = "0.8";
    valueInput.dispatchEvent(new Event("change", { bubbles: true }));
    await sleep(40);
    expect(service.sampleBodies.length).toBe(issued + 1);
    expect(service.sampleBodies.at(-1)!.targets).toEqual([
      { objective: "peak_density", target: 0.8, alpha: 1, beta: 1 },
    ]);
  });

  it("service down shows a retry banner", async () => {
    const { ServiceClient } = await import("../src/api.js");
    const failing = new ServiceClient("http://fake", async () => {
      throw new Error("connection refused");
    });
    const workspace = new Workspace(mount(), failing);
    await workspace.refreshRuns();
    const banner = document.getElementById("service-banner") as HTMLElement;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("service unreachable");
  });
});
