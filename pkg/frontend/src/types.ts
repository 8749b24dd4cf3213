// Shapes of the service's JSON responses, as consumed by the playground.
// The UI never computes hashes or metrics itself: these are display types.

export interface Partition {
  partition_id: string;
  window_start: number;
  window_end: number;
  record_count: number;
  content: string;
  tag: string;
  stream: string;
}

export interface DatasetVersion {
  name: string;
  version: string;
  partitions: string[];
  content: string;
  stream: string;
}

export interface StageNodeObj {
  id: string;
  function: string;
  version: string;
  params: Record<string, unknown>;
  seed: number;
}

export interface PipelineVersion {
  name: string;
  version: string;
  parent: string | null;
  nodes: StageNodeObj[];
  edges: [string, string][];
  bindings: Record<string, string[]>;
  manifest_hash: string;
}

export interface FunctionDef {
  name: string;
  version: string;
  kind: string;
  entry: string;
  input_arity: number;
  output_kind: string;
  param_schema: { name: string; type: string; default: unknown }[];
}

export interface DiffEntry {
  node_id: string;
  change: "added" | "removed" | "modified";
}

export interface StageResult {
  node_id: string;
  output: string;
  output_kind: string;
  duration_ms: number;
  cache_hit: boolean;
}

export interface DatasetRef {
  name: string;
  version: string;
  content: string;
}

export interface Run {
  run_no: number;
  pipeline_name: string;
  pipeline_version: string;
  manifest_hash: string;
  train_dataset: DatasetRef;
  eval_dataset: DatasetRef;
  model_name: string;
  hyperparams: Record<string, unknown>;
  metrics: Record<string, number>;
  status: "succeeded" | "failed";
  failing_node: string | null;
  stage_results: StageResult[];
  requested_by: string;
  started_at: number;
  finished_at: number;
}

export interface GateDecision {
  window: number;
  champion: [string, string];
  challenger: [string, string];
  champion_value: number;
  challenger_value: number;
  passed: boolean;
}

export interface ScenarioSeries {
  scenario_id: string;
  pipeline_name: string;
  metric_name: string;
  series: Record<string, [number, number][]>;
  timeline: [number, string][];
  gates: GateDecision[];
  run_nos: number[];
}

export interface ApiError {
  code: string;
  message: string;
}
