// Thin typed client over the service's HTTP API. Every playground request
// funnels through one injectable fetch so tests can count and record calls.

import type {
  DatasetVersion,
  DiffEntry,
  FunctionDef,
  Partition,
  PipelineVersion,
  Run,
  ScenarioSeries,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiRequestError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let code = "error";
      let message = `${method} ${path} failed with ${response.status}`;
      try {
        const parsed = await response.json();
        code = parsed.code ?? code;
        message = parsed.message ?? message;
      } catch {
        // non-JSON error body: keep the generic message
      }
      throw new ApiRequestError(code, message, response.status);
    }
    if (path.endsWith(".csv")) {
      return (await response.text()) as T;
    }
    return (await response.json()) as T;
  }

  listPartitions(stream?: string): Promise<Partition[]> {
    const query = stream ? `?stream=${encodeURIComponent(stream)}` : "";
    return this.request("GET", `/api/partitions${query}`);
  }

  publishDataset(name: string, partitions: string[], stream?: string): Promise<DatasetVersion> {
    return this.request("POST", "/api/datasets", { name, partitions, stream });
  }

  listDatasets(name: string): Promise<DatasetVersion[]> {
    return this.request("GET", `/api/datasets/${encodeURIComponent(name)}`);
  }

  listFunctions(): Promise<FunctionDef[]> {
    return this.request("GET", "/api/functions");
  }

  listPipelines(): Promise<PipelineVersion[]> {
    return this.request("GET", "/api/pipelines");
  }

  getPipeline(name: string, version: string): Promise<PipelineVersion> {
    return this.request("GET", `/api/pipelines/${encodeURIComponent(name)}/${version}`);
  }

  derivePipeline(
    name: string,
    baseVersion: string,
    replace: string,
    functionName: string,
    functionVersion: string,
    params: Record<string, unknown>,
  ): Promise<PipelineVersion> {
    return this.request(
      "POST",
      `/api/pipelines/${encodeURIComponent(name)}/${baseVersion}/derive`,
      { replace, function: functionName, function_version: functionVersion, params },
    );
  }

  getLineage(name: string, version: string): Promise<string[]> {
    return this.request("GET", `/api/pipelines/${encodeURIComponent(name)}/${version}/lineage`);
  }

  diffPipelines(name: string, a: string, b: string): Promise<DiffEntry[]> {
    return this.request("GET", `/api/pipelines/${encodeURIComponent(name)}/diff?a=${a}&b=${b}`);
  }

  launchRun(body: {
    pipeline_name: string;
    pipeline_version: string;
    train_dataset: { name: string; version: string };
    eval_dataset: { name: string; version: string };
    requested_by?: string;
  }): Promise<Run> {
    return this.request("POST", "/api/runs", body);
  }

  getRun(runNo: number): Promise<Run> {
    return this.request("GET", `/api/runs/${runNo}`);
  }

  queryRuns(params: Record<string, string | number> = {}): Promise<Run[]> {
    const query = new URLSearchParams(
      Object.fromEntries(Object.entries(params).map(([k, v]) => [k, String(v)])),
    ).toString();
    return this.request("GET", `/api/runs${query ? "?" + query : ""}`);
  }

  runScenario(config: unknown): Promise<ScenarioSeries> {
    return this.request("POST", "/api/scenario", config);
  }

  getSeriesCsv(scenarioId: string): Promise<string> {
    return this.request("GET", `/api/series/${encodeURIComponent(scenarioId)}.csv`);
  }
}
