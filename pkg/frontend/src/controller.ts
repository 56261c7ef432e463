// Wires the workspace: run browser, weight sliders, resample pipeline, pins.
// Extracted from main.ts so tests can drive a full session against a DOM
// without a dev server.

import { ServiceClient } from "./api.js";
import { meanPairwiseGower } from "./metrics.js";
import {
  renderPins,
  renderResultsTable,
  renderRunList,
  renderScatter,
  renderTargetEditors,
} from "./render.js";
import { Resampler } from "./resampler.js";
import {
  initialState,
  pinCurrent,
  removePin,
  sliderToWeight,
  WEIGHT_BOUNDS,
  weightToSlider,
  type SessionState,
} from "./state.js";
import type { CounterfactualSetDoc, ProblemSummary, TargetDoc } from "./types.js";

const WEIGHT_KEYS = ["proximity", "sparsity", "manifold", "diversity"] as const;
type WeightKey = (typeof WEIGHT_KEYS)[number];

export interface ControllerOptions {
  debounceMs?: number;
  scatterBackgroundLimit?: number;
}

export class Workspace {
  readonly state: SessionState = initialState();
  readonly resampler: Resampler;
  problem: ProblemSummary | null = null;
  private background: (number | string)[][] = [];
  private statusLine = "";

  constructor(
    private readonly root: HTMLElement,
    readonly client: ServiceClient,
    private readonly options: ControllerOptions = {},
  ) {
    this.resampler = new Resampler(client, this.state, {
      onResult: (result) => this.renderResult(result),
      onError: (error) => this.setStatus(`sampling failed: ${(error as Error).message ?? error}`),
      onBlocked: (reasons) => this.setStatus(`request not sent: ${reasons.join("; ")}`),
    }, options.debounceMs);
    this.root.innerHTML = this.skeleton();
    this.wireStaticHandlers();
  }

  private skeleton(): string {
    return `
      <section id="run-browser">
        <h2>Runs</h2>
        <div id="service-banner" class="banner" hidden></div>
        <div id="run-list"></div>
      </section>
      <section id="workspace" hidden>
        <h2>Resample <span id="run-label" class="mono"></span></h2>
        <div id="controls">
          ${WEIGHT_KEYS.map((key) => this.sliderMarkup(key)).join("")}
          <label class="count">set size
            <input id="count" type="number" min="1" step="1" value="5">
          </label>
          <div id="targets"></div>
        </div>
        <div id="status" class="muted"></div>
        <div id="readout" class="muted"></div>
        <div id="scatter-holder"></div>
        <div id="results"></div>
        <div id="pin-bar"><button id="pin-button">pin this set</button></div>
        <h3 id="compare-title" hidden>Pinned comparisons</h3>
        <div id="pins"></div>
      </section>`;
  }

  private sliderMarkup(key: WeightKey): string {
    const value = this.state.draft.weights[key];
    return `
      <label class="slider" data-weight="${key}">
        <span>${key} weight <output id="weight-${key}">${value}</output></span>
        <input id="slider-${key}" type="range" min="0" max="1000" step="1"
               value="${Math.round(weightToSlider(value, WEIGHT_BOUNDS[key]) * 1000)}">
      </label>`;
  }

  private wireStaticHandlers(): void {
    const runList = this.query("#run-list");
    runList.addEventListener("click", (event) => {
      const row = (event.target as HTMLElement).closest<HTMLElement>(".run-row");
      if (row && row.dataset.selectable === "true" && row.dataset.runId) {
        void this.selectRun(row.dataset.runId);
      }
    });
    for (const key of WEIGHT_KEYS) {
      const slider = this.query<HTMLInputElement>(`#slider-${key}`);
      // Dragging updates the readout only; release (change) resamples.
      slider.addEventListener("input", () => this.previewWeight(key, slider));
      slider.addEventListener("change", () => {
        this.commitWeight(key, slider);
        this.resampler.release();
      });
    }
    const count = this.query<HTMLInputElement>("#count");
    count.addEventListener("change", () => {
      this.state.draft.count = Number.parseInt(count.value, 10);
      this.resampler.release();
    });
    this.query("#pin-button").addEventListener("click", () => {
      pinCurrent(this.state);
      this.renderPins();
    });
    this.query("#pins").addEventListener("click", (event) => {
      const button = (event.target as HTMLElement).closest<HTMLElement>(".unpin");
      if (button?.dataset.pinId) {
        removePin(this.state, Number(button.dataset.pinId));
        this.renderPins();
      }
    });
    const targets = this.query("#targets");
    targets.addEventListener("change", (event) => {
      const element = event.target as HTMLInputElement;
      if (element.classList.contains("target-enable")) {
        const row = element.closest<HTMLElement>(".target-row");
        row?.querySelectorAll("input:not(.target-enable)").forEach((input) => {
          (input as HTMLInputElement).disabled = !element.checked;
        });
      }
      this.collectTargets();
      this.resampler.release();
    });
  }

  /** Rebuild draft.targets from the editor rows; invalid rows stay in the
      draft so client-side validation reports them instead of firing. */
  private collectTargets(): void {
    const rows = this.root.querySelectorAll<HTMLElement>("#targets .target-row");
    const targets: TargetDoc[] = [];
    rows.forEach((row) => {
      const enabled = row.querySelector<HTMLInputElement>(".target-enable")?.checked;
      if (!enabled) return;
      targets.push({
        objective: row.dataset.objective ?? "",
        target: Number(row.querySelector<HTMLInputElement>(".target-value")?.value),
        alpha: Number(row.querySelector<HTMLInputElement>(".target-alpha")?.value),
        beta: Number(row.querySelector<HTMLInputElement>(".target-beta")?.value),
      });
    });
    this.state.draft.targets = targets;
  }

  private previewWeight(key: WeightKey, slider: HTMLInputElement): void {
    const weight = sliderToWeight(Number(slider.value) / 1000, WEIGHT_BOUNDS[key]);
    this.query(`#weight-${key}`).textContent = weight.toPrecision(3);
  }

  private commitWeight(key: WeightKey, slider: HTMLInputElement): void {
    const weight = sliderToWeight(Number(slider.value) / 1000, WEIGHT_BOUNDS[key]);
    this.state.draft.weights[key] = Number(weight.toPrecision(6));
    this.query(`#weight-${key}`).textContent = weight.toPrecision(3);
  }

  /** Set a weight programmatically (slider position + commit), no resample. */
  setWeight(key: WeightKey, value: number): void {
    const slider = this.query<HTMLInputElement>(`#slider-${key}`);
    slider.value = String(Math.round(weightToSlider(value, WEIGHT_BOUNDS[key]) * 1000));
    this.state.draft.weights[key] = value;
    this.query(`#weight-${key}`).textContent = value.toPrecision(3);
  }

  /** Simulate the end of a drag on one slider. */
  releaseSlider(): void {
    this.resampler.release();
  }

  async refreshRuns(): Promise<void> {
    const banner = this.query("#service-banner");
    try {
      const { runs } = await this.client.listRuns();
      banner.hidden = true;
      this.query("#run-list").innerHTML = renderRunList(runs, this.state.runId);
    } catch (error) {
      banner.hidden = false;
      banner.innerHTML = `service unreachable (${(error as Error).message}) <button id="retry">retry</button>`;
      this.query("#retry").addEventListener("click", () => void this.refreshRuns());
    }
  }

  async selectRun(runId: string): Promise<void> {
    const run = await this.client.getRun(runId);
    if (run.state !== "finished" || !run.problem) {
      this.setStatus(`run ${runId} is ${run.state}; sampling disabled`);
      return;
    }
    this.state.runId = runId;
    this.problem = run.problem;
    this.state.draft.targets = [];
    this.query("#run-label").textContent = runId.slice(0, 12);
    (this.query("#workspace") as HTMLElement).hidden = false;
    this.query("#targets").innerHTML = renderTargetEditors(run.problem.objectives, this.state.draft.targets);
    await this.loadBackground(runId);
    await this.resampler.fire();
    await this.refreshRuns();
  }

  private async loadBackground(runId: string): Promise<void> {
    this.background = [];
    if (!this.problem || this.problem.schema.features.length !== 2) return;
    const limit = this.options.scatterBackgroundLimit ?? 1000;
    const page = await this.client.candidates(runId, 0, limit);
    this.background = page.entries.map((entry) => entry.values);
  }

  private renderResult(result: CounterfactualSetDoc): void {
    if (!this.problem) return;
    this.setStatus("");
    this.query("#results").innerHTML = renderResultsTable(result, this.problem);
    this.query("#scatter-holder").innerHTML = renderScatter(result, this.problem, this.background);
    const spread = meanPairwiseGower(
      result.entries.map((e) => e.values),
      this.problem.schema,
      this.problem.ranges,
    );
    this.query("#readout").textContent =
      `${result.entries.length} counterfactuals | mean pairwise distance ${spread.toFixed(4)}`;
  }

  private renderPins(): void {
    (this.query("#compare-title") as HTMLElement).hidden = this.state.pins.length === 0;
    this.query("#pins").innerHTML = renderPins(this.state.pins);
  }

  private setStatus(text: string): void {
    this.statusLine = text;
    this.query("#status").textContent = text;
  }

  get status(): string {
    return this.statusLine;
  }

  private query<T extends HTMLElement = HTMLElement>(selector: string): T {
    const node = this.root.querySelector<T>(selector);
    if (!node) throw new Error(`missing element ${selector}`);
    return node;
  }
}
