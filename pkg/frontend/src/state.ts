// Playground view state and its transitions. Every mutation of server state
// goes through exactly one documented API call; the controller holds only
// what the panels need to render.

import { ApiClient, ApiRequestError } from "./api.js";
import type { ChartModel } from "./chart.js";
import { overlayRuns, scenarioChart } from "./chart.js";
import type {
  DatasetVersion,
  DiffEntry,
  FunctionDef,
  Partition,
  PipelineVersion,
  Run,
  ScenarioSeries,
} from "./types.js";

export interface PendingSwap {
  nodeId: string;
  functionName: string;
  functionVersion: string;
  params: Record<string, unknown>;
}

export interface ViewState {
  partitions: Partition[];
  selectedPartitions: string[];
  functions: FunctionDef[];
  pipelines: PipelineVersion[];
  currentPipeline: PipelineVersion | null;
  lineage: string[];
  highlight: string[];
  nodeError: { nodeId: string; message: string } | null;
  runPanel: Run | null;
  leaderboard: Run[];
  chart: ChartModel | null;
  scenario: ScenarioSeries | null;
  banner: string | null;
}

export function initialState(): ViewState {
  return {
    partitions: [],
    selectedPartitions: [],
    functions: [],
    pipelines: [],
    currentPipeline: null,
    lineage: [],
    highlight: [],
    nodeError: null,
    runPanel: null,
    leaderboard: [],
    chart: null,
    scenario: null,
    banner: null,
  };
}

export class PlaygroundController {
  readonly state: ViewState = initialState();

  constructor(private readonly api: ApiClient) {}

  async refreshCatalog(stream?: string): Promise<void> {
    try {
      this.state.partitions = await this.api.listPartitions(stream);
      this.state.functions = await this.api.listFunctions();
      this.state.pipelines = await this.api.listPipelines();
      this.state.banner = null;
    } catch (error) {
      this.state.banner = `service unreachable: ${(error as Error).message}`;
    }
  }

  togglePartition(partitionId: string): void {
    const selected = this.state.selectedPartitions;
    const index = selected.indexOf(partitionId);
    if (index >= 0) {
      selected.splice(index, 1);
    } else {
      selected.push(partitionId);
    }
  }

  async publishSelection(name: string, stream?: string): Promise<DatasetVersion> {
    const dataset = await this.api.publishDataset(name, [...this.state.selectedPartitions], stream);
    this.state.selectedPartitions = [];
    return dataset;
  }

  async openPipeline(name: string, version: string): Promise<void> {
    this.state.currentPipeline = await this.api.getPipeline(name, version);
    this.state.lineage = await this.api.getLineage(name, version);
    this.state.highlight = [];
    this.state.nodeError = null;
  }

  /** One-click node swap: exactly one derive call, then the view follows the
   *  child version with the changed nodes highlighted per the server's diff. */
  async swapNode(swap: PendingSwap): Promise<PipelineVersion | null> {
    const current = this.state.currentPipeline;
    if (!current) throw new Error("no pipeline displayed");
    if (!current.nodes.some((n) => n.id === swap.nodeId)) {
      throw new Error(`node ${swap.nodeId} is not part of the displayed version`);
    }
    let child: PipelineVersion;
    try {
      child = await this.api.derivePipeline(
        current.name,
        current.version,
        swap.nodeId,
        swap.functionName,
        swap.functionVersion,
        swap.params,
      );
    } catch (error) {
      if (error instanceof ApiRequestError && error.status === 422) {
        this.state.nodeError = { nodeId: swap.nodeId, message: error.message };
        return null;
      }
      throw error;
    }
    const diff: DiffEntry[] = await this.api.diffPipelines(
      current.name,
      current.version,
      child.version,
    );
    this.state.currentPipeline = child;
    this.state.lineage = await this.api.getLineage(child.name, child.version);
    this.state.highlight = diff.map((entry) => entry.node_id);
    this.state.nodeError = null;
    return child;
  }

  async launchRun(
    train: { name: string; version: string },
    evalDataset: { name: string; version: string },
  ): Promise<Run> {
    const pipeline = this.state.currentPipeline;
    if (!pipeline) throw new Error("select a pipeline version first");
    const run = await this.api.launchRun({
      pipeline_name: pipeline.name,
      pipeline_version: pipeline.version,
      train_dataset: train,
      eval_dataset: evalDataset,
      requested_by: "playground",
    });
    this.state.runPanel = run;
    return run;
  }

  async showRun(runNo: number): Promise<void> {
    this.state.runPanel = await this.api.getRun(runNo);
  }

  async refreshLeaderboard(metric = "accuracy"): Promise<void> {
    this.state.leaderboard = await this.api.queryRuns({ sort: metric, limit: 50 });
  }

  overlaySelectedRuns(runNos: number[], metric = "accuracy"): void {
    const runs = this.state.leaderboard.filter((r) => runNos.includes(r.run_no));
    this.state.chart = overlayRuns(runs, metric);
  }

  async runScenario(config: unknown): Promise<ScenarioSeries> {
    const series = await this.api.runScenario(config);
    this.state.scenario = series;
    this.state.chart = scenarioChart(series);
    return series;
  }
}
