// Chart models for the leaderboard panel. Values are carried verbatim from
// API responses; this module only arranges them, never recomputes them.

import type { Run, ScenarioSeries } from "./types.js";

export interface ChartPoint {
  window: number;
  value: number;
}

export interface ChartSeries {
  label: string;
  points: ChartPoint[];
}

export interface ChartModel {
  metric: string;
  series: ChartSeries[];
  mixedEval: boolean;
}

function lookup(points: [number, number][] | undefined, window: number): number | undefined {
  return points?.find(([w]) => w === window)?.[1];
}

/** The Figure-4 style view: the frozen initial line versus the deployed,
 *  per-window refreshed line assembled from gate decisions. */
export function scenarioChart(series: ScenarioSeries): ChartModel {
  const initial = series.timeline[0][1];
  const frozen: ChartSeries = {
    label: `${initial} (frozen)`,
    points: (series.series[initial] ?? []).map(([window, value]) => ({ window, value })),
  };

  const deployedAt = new Map(series.timeline);
  const lastGateAt = new Map<number, number>();
  series.gates.forEach((gate, i) => lastGateAt.set(gate.window, i));
  const refreshed: ChartSeries = { label: "deployed (refreshed)", points: [] };
  for (const [window] of series.timeline) {
    if (window === 0) continue;
    const gateIndex = lastGateAt.get(window);
    let value: number | undefined;
    if (gateIndex !== undefined) {
      value = series.gates[gateIndex].challenger_value;
    } else {
      value = lookup(series.series[deployedAt.get(window)!], window);
    }
    if (value !== undefined) {
      refreshed.points.push({ window, value });
    }
  }
  return { metric: series.metric_name, series: [frozen, refreshed], mixedEval: false };
}

/** One line per version, straight from the per-version series. */
export function versionChart(series: ScenarioSeries): ChartModel {
  const lines = Object.entries(series.series)
    .sort(([a], [b]) => Number(a.slice(1)) - Number(b.slice(1)))
    .map(([version, points]) => ({
      label: version,
      points: points.map(([window, value]) => ({ window, value })),
    }));
  return { metric: series.metric_name, series: lines, mixedEval: false };
}

/** Overlay selected runs on one metric; flags (but allows) mixed eval sets. */
export function overlayRuns(runs: Run[], metric: string): ChartModel {
  const evalHashes = new Set(runs.map((r) => r.eval_dataset.content));
  const series = runs
    .filter((r) => metric in r.metrics)
    .map((r, i) => ({
      label: `#${r.run_no} ${r.pipeline_name}@${r.pipeline_version}`,
      points: [{ window: i, value: r.metrics[metric] }],
    }));
  return { metric, series, mixedEval: evalHashes.size > 1 };
}

export function parseSeriesCsv(csv: string): { metric: string; series: ChartSeries[] } {
  const lines = csv.trim().split("\n");
  const byVersion = new Map<string, ChartPoint[]>();
  let metric = "";
  for (const line of lines.slice(1)) {
    const [window, version, metricName, value] = line.split(",");
    metric = metricName;
    if (!byVersion.has(version)) byVersion.set(version, []);
    byVersion.get(version)!.push({ window: Number(window), value: Number(value) });
  }
  const series = [...byVersion.entries()]
    .sort(([a], [b]) => Number(a.slice(1)) - Number(b.slice(1)))
    .map(([label, points]) => ({ label, points }));
  return { metric, series };
}
