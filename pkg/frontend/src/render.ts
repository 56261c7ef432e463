// HTML renderers. All of these build markup strings from documents; the
// controller owns insertion and event wiring. Feature diff highlighting uses
// the same tolerance rule as the engine's changed-feature objective.

import { featureChanged } from "./metrics.js";
import type { Pin } from "./state.js";
import type {
  CounterfactualSetDoc,
  ObjectiveDoc,
  ProblemSummary,
  RunDoc,
  SampledEntryDoc,
  TargetDoc,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function formatValue(value: number | string): string {
  if (typeof value === "number") {
    return Math.abs(value) >= 1e4 || (value !== 0 && Math.abs(value) < 1e-3)
      ? value.toExponential(3)
      : value.toPrecision(5);
  }
  return escapeHtml(value);
}

export function renderRunList(runs: RunDoc[], selected: string | null): string {
  if (!runs.length) {
    return `<p class="empty">No runs yet. Start one with the command line or POST /v1/runs.</p>`;
  }
  const rows = runs.map((run) => {
    const selectable = run.state === "finished";
    const progress = run.progress
      ? `${run.progress.generation}/${run.progress.generations} generations, archive ${run.progress.archive_size}`
      : "";
    const classes = [
      "run-row",
      selectable ? "selectable" : "disabled",
      run.run_id === selected ? "selected" : "",
    ].filter(Boolean).join(" ");
    return `
      <tr class="${classes}" data-run-id="${escapeHtml(run.run_id)}" data-selectable="${selectable}">
        <td class="mono">${escapeHtml(run.run_id.slice(0, 12))}</td>
        <td><span class="badge badge-${run.state}">${run.state}</span></td>
        <td>${run.archive_entries ?? ""}</td>
        <td class="muted">${escapeHtml(run.error ?? progress)}</td>
      </tr>`;
  });
  return `
    <table class="runs">
      <thead><tr><th>run</th><th>state</th><th>candidates</th><th></th></tr></thead>
      <tbody>${rows.join("")}</tbody>
    </table>`;
}

export function renderResultsTable(result: CounterfactualSetDoc, problem: ProblemSummary): string {
  const { features } = problem.schema;
  const headers = features
    .map((feature) => {
      const lock = feature.actionable ? "" : " <span class=\"lock\" title=\"not actionable\">&#128274;</span>";
      return `<th class="${feature.actionable ? "" : "locked"}">${escapeHtml(feature.name)}${lock}</th>`;
    })
    .join("");
  const auxHeaders = result.auxiliary_names.map((name) => `<th>${escapeHtml(name)}</th>`).join("");

  const queryCells = features
    .map((feature, i) => `<td class="${feature.actionable ? "" : "locked"}">${formatValue(problem.query[i])}</td>`)
    .join("");
  const queryAux = result.auxiliary_names.map(() => "<td></td>").join("");

  const bodyRows = result.entries.map((entry) => renderEntryRow(entry, result, problem)).join("");
  return `
    <table class="results">
      <thead><tr><th></th>${headers}<th>f_pr</th><th>f_sp</th><th>f_mp</th>${auxHeaders}<th>quality</th></tr></thead>
      <tbody>
        <tr class="query-row"><td>query</td>${queryCells}<td>0</td><td>0</td><td></td>${queryAux}<td></td></tr>
        ${bodyRows}
      </tbody>
    </table>`;
}

function renderEntryRow(entry: SampledEntryDoc, result: CounterfactualSetDoc, problem: ProblemSummary): string {
  const cells = problem.schema.features
    .map((feature, i) => {
      const changed = featureChanged(entry.values[i], problem.query[i], feature.kind, problem.ranges[i]);
      const classes = [changed ? "changed" : "", feature.actionable ? "" : "locked"].filter(Boolean).join(" ");
      return `<td class="${classes}">${formatValue(entry.values[i])}</td>`;
    })
    .join("");
  const aux = result.auxiliary_names
    .map((name) => `<td>${formatValue(entry.objectives.auxiliary[name] ?? NaN)}</td>`)
    .join("");
  const dtai = entry.dtai === null ? "" : ` title="target achievement ${entry.dtai.toFixed(3)}"`;
  return `
    <tr data-archive-index="${entry.archive_index}">
      <td class="mono">#${entry.archive_index}</td>${cells}
      <td>${formatValue(entry.objectives.proximity)}</td>
      <td>${formatValue(entry.objectives.sparsity)}</td>
      <td>${formatValue(entry.objectives.manifold_proximity)}</td>
      ${aux}
      <td${dtai}>${formatValue(entry.quality)}</td>
    </tr>`;
}

/** SVG scatter for two-feature problems: background cloud, query, picks. */
export function renderScatter(
  result: CounterfactualSetDoc,
  problem: ProblemSummary,
  background: (number | string)[][],
  size = 360,
): string {
  const [fx, fy] = problem.schema.features;
  if (!fx || !fy || problem.schema.features.length !== 2) return "";
  if (fx.kind !== "continuous" || fy.kind !== "continuous") return "";
  const xLo = fx.lower ?? 0;
  const xHi = fx.upper ?? 1;
  const yLo = fy.lower ?? 0;
  const yHi = fy.upper ?? 1;
  const pad = 12;
  const scaleX = (v: number) => pad + ((v - xLo) / (xHi - xLo)) * (size - 2 * pad);
  const scaleY = (v: number) => size - pad - ((v - yLo) / (yHi - yLo)) * (size - 2 * pad);

  const cloud = background
    .map(([a, b]) => `<circle cx="${scaleX(a as number).toFixed(1)}" cy="${scaleY(b as number).toFixed(1)}" r="1.5" class="cloud"/>`)
    .join("");
  const picks = result.entries
    .map((entry, rank) => {
      const [a, b] = entry.values as [number, number];
      return `<circle cx="${scaleX(a).toFixed(1)}" cy="${scaleY(b).toFixed(1)}" r="5" class="pick"><title>#${entry.archive_index} (rank ${rank + 1})</title></circle>`;
    })
    .join("");
  const [qx, qy] = problem.query as [number, number];
  const query = `<path d="M ${scaleX(qx) - 6} ${scaleY(qy)} l 6 -6 l 6 6 l -6 6 z" class="query"><title>query</title></path>`;
  return `
    <svg viewBox="0 0 ${size} ${size}" class="scatter" role="img" aria-label="design space scatter">
      <rect x="0" y="0" width="${size}" height="${size}" class="frame"/>
      ${cloud}${picks}${query}
    </svg>`;
}

/** One editor row per auxiliary objective: enable + target/priority/decay. */
export function renderTargetEditors(objectives: ObjectiveDoc[], targets: TargetDoc[]): string {
  if (!objectives.length) return "";
  const rows = objectives.map((objective) => {
    const active = targets.find((t) => t.objective === objective.name);
    const name = escapeHtml(objective.name);
    const disabled = active ? "" : " disabled";
    return `
      <div class="target-row" data-objective="${name}">
        <label class="target-toggle">
          <input type="checkbox" class="target-enable"${active ? " checked" : ""}>
          ${name} <span class="muted">(${objective.direction})</span>
        </label>
        <label>target <input class="target-value" type="number" step="any"
               value="${active ? active.target : ""}"${disabled}></label>
        <label>priority &alpha; <input class="target-alpha" type="number" step="any" min="0"
               value="${active ? active.alpha : 1}"${disabled}></label>
        <label>decay &beta; <input class="target-beta" type="number" step="any" min="0"
               value="${active ? active.beta : 1}"${disabled}></label>
      </div>`;
  });
  return `<fieldset class="targets"><legend>objective targets</legend>${rows.join("")}</fieldset>`;
}

export function renderPins(pins: Pin[]): string {
  if (!pins.length) return "";
  const panels = pins.map((pin) => {
    const rows = pin.result.entries
      .map((entry) => {
        const values = entry.values.map((v) => `<td>${formatValue(v)}</td>`).join("");
        return `<tr><td class="mono">#${entry.archive_index}</td>${values}<td>${formatValue(entry.quality)}</td></tr>`;
      })
      .join("");
    const header = pin.result.feature_names.map((n) => `<th>${escapeHtml(n)}</th>`).join("");
    return `
      <div class="pin-panel" data-pin-id="${pin.id}">
        <header>
          <span>${escapeHtml(pin.label)}</span>
          <button class="unpin" data-pin-id="${pin.id}">remove</button>
        </header>
        <table><thead><tr><th></th>${header}<th>quality</th></tr></thead><tbody>${rows}</tbody></table>
      </div>`;
  });
  return `<div class="pin-grid">${panels.join("")}</div>`;
}
