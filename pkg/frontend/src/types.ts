// Wire types mirroring the service's JSON documents.

export type FeatureKind = "continuous" | "categorical";

export interface FeatureDoc {
  name: string;
  kind: FeatureKind;
  lower?: number;
  upper?: number;
  categories?: string[];
  actionable: boolean;
}

export interface SchemaDoc {
  features: FeatureDoc[];
}

export interface ObjectiveDoc {
  name: string;
  direction: "minimize" | "maximize";
  channel: string | null;
  expression: string | null;
}

export interface ProblemSummary {
  schema: SchemaDoc;
  query: (number | string)[];
  ranges: (number | null)[];
  objectives: ObjectiveDoc[];
}

export type RunState = "pending" | "running" | "finished" | "failed";

export interface RunProgress {
  generation: number;
  generations: number;
  feasible: number;
  best_violation: number | null;
  archive_size: number;
}

export interface RunDoc {
  run_id: string;
  problem_id: string;
  state: RunState;
  created_at: number;
  progress: RunProgress | null;
  error: string | null;
  archive_entries: number | null;
  problem?: ProblemSummary | null;
}

export interface TargetDoc {
  objective: string;
  target: number;
  alpha: number;
  beta: number;
}

export interface SamplingRequestDoc {
  weights: {
    proximity: number;
    sparsity: number;
    manifold: number;
    diversity: number;
  };
  targets: TargetDoc[];
  count: number;
  seed: number;
}

export interface SampledEntryDoc {
  archive_index: number;
  values: (number | string)[];
  objectives: {
    proximity: number;
    sparsity: number;
    manifold_proximity: number;
    auxiliary: Record<string, number>;
  };
  quality: number;
  dtai: number | null;
  achievement_ratios: Record<string, number>;
  quality_breakdown: {
    proximity_term: number;
    sparsity_term: number;
    manifold_term: number;
    target_penalty: number | null;
  };
}

export interface CounterfactualSetDoc {
  request: SamplingRequestDoc;
  feature_names: string[];
  auxiliary_names: string[];
  query: (number | string)[];
  entries: SampledEntryDoc[];
}

export interface CandidatePage {
  total: number;
  offset: number;
  limit: number;
  entries: {
    index: number;
    values: (number | string)[];
    objectives: {
      proximity: number;
      sparsity: number;
      manifold_proximity: number;
      auxiliary: number[];
    };
    channels: Record<string, number>;
  }[];
}
