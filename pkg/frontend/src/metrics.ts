// Client-side mirrors of the engine's distance/diff semantics, used for the
// results table highlighting and the diversity readout. The change tolerance
// matches the engine: a continuous feature counts as changed only beyond
// 1e-9 of its observed range (floored at 1e-12).

import type { SchemaDoc } from "./types.js";

export const CHANGE_TOLERANCE = 1e-9;
export const RANGE_FLOOR = 1e-12;

export type Value = number | string;

export function featureChanged(
  value: Value,
  queryValue: Value,
  kind: "continuous" | "categorical",
  range: number | null,
): boolean {
  if (kind === "categorical") return value !== queryValue;
  const tolerance = CHANGE_TOLERANCE * Math.max(range ?? 0, RANGE_FLOOR);
  return Math.abs((value as number) - (queryValue as number)) > tolerance;
}

export function gowerDistance(
  a: Value[],
  b: Value[],
  schema: SchemaDoc,
  ranges: (number | null)[],
): number {
  const d = schema.features.length;
  let total = 0;
  for (let i = 0; i < d; i++) {
    const feature = schema.features[i];
    if (feature.kind === "categorical") {
      total += a[i] !== b[i] ? 1 : 0;
    } else {
      const range = ranges[i];
      const diff = Math.abs((a[i] as number) - (b[i] as number));
      if (range != null && range > 0) total += diff / range;
      else total += diff > 0 ? 1 : 0;
    }
  }
  return total / d;
}

export function meanPairwiseGower(
  points: Value[][],
  schema: SchemaDoc,
  ranges: (number | null)[],
): number {
  if (points.length < 2) return 0;
  let total = 0;
  let pairs = 0;
  for (let i = 0; i < points.length; i++) {
    for (let j = 0; j < i; j++) {
      total += gowerDistance(points[i], points[j], schema, ranges);
      pairs += 1;
    }
  }
  return total / pairs;
}

export function meanGowerToQuery(
  points: Value[][],
  query: Value[],
  schema: SchemaDoc,
  ranges: (number | null)[],
): number {
  if (!points.length) return 0;
  const sum = points.reduce((acc, p) => acc + gowerDistance(p, query, schema, ranges), 0);
  return sum / points.length;
}
