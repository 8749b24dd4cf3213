// HTML/SVG templating for the playground panels. Pure string builders: no
// DOM access here, so every displayed value is testable without a browser.
// All numbers shown are String(...) of API response fields, verbatim.

import type { ChartModel } from "./chart.js";
import { layoutPipeline, NODE_HEIGHT, NODE_WIDTH } from "./layout.js";
import type { Partition, PipelineVersion, Run } from "./types.js";
import type { ViewState } from "./state.js";

const esc = (value: unknown): string =>
  String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");

// ----------------------------------------------------------------------
// data picker

export function renderDataPicker(partitions: Partition[], selected: string[]): string {
  if (partitions.length === 0) {
    return `<div class="empty">No partitions yet. Ingest records and close a window to get started.</div>`;
  }
  const rows = partitions
    .map((p) => {
      const checked = selected.includes(p.partition_id) ? " checked" : "";
      return (
        `<tr data-partition="${esc(p.partition_id)}">` +
        `<td><input type="checkbox"${checked}></td>` +
        `<td class="tag">${esc(p.tag)}</td>` +
        `<td>${esc(p.partition_id)}</td>` +
        `<td class="num">${esc(p.record_count)}</td>` +
        `<td class="hash" title="${esc(p.content)}">${esc(p.content.slice(0, 12))}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="partitions"><thead><tr>` +
    `<th></th><th>tag</th><th>partition</th><th>records</th><th>content</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

// ----------------------------------------------------------------------
// DAG view

export function renderDag(
  pipeline: PipelineVersion,
  highlight: string[] = [],
  failingNode: string | null = null,
): string {
  const layout = layoutPipeline(pipeline);
  const byId = new Map(pipeline.nodes.map((n) => [n.id, n]));
  const bindings = pipeline.bindings;
  const sinkIds = new Set(
    pipeline.nodes
      .filter((n) => !pipeline.edges.some(([from]) => from === n.id))
      .filter((n) => (bindings[n.id] ?? []).includes("$eval_dataset"))
      .map((n) => n.id),
  );

  const edges = layout.edges
    .map(
      (e) =>
        `<line class="edge" x1="${e.x1}" y1="${e.y1}" x2="${e.x2}" y2="${e.y2}" marker-end="url(#arrow)"/>`,
    )
    .join("");
  const nodes = layout.nodes
    .map((pos) => {
      const node = byId.get(pos.id)!;
      const classes = ["node"];
      if (sinkIds.has(pos.id)) classes.push("sink");
      if (highlight.includes(pos.id)) classes.push("highlight");
      if (failingNode === pos.id) classes.push("failing");
      const params = esc(JSON.stringify(node.params));
      return (
        `<g class="${classes.join(" ")}" data-node="${esc(pos.id)}" transform="translate(${pos.x},${pos.y})">` +
        `<rect width="${NODE_WIDTH}" height="${NODE_HEIGHT}" rx="8"/>` +
        `<text class="id" x="10" y="20">${esc(pos.id)}</text>` +
        `<text class="fn" x="10" y="38">${esc(node.function)}@${esc(node.version)}</text>` +
        `<text class="params" x="10" y="54">${params}</text>` +
        `</g>`
      );
    })
    .join("");
  return (
    `<svg class="dag" viewBox="0 0 ${layout.width} ${layout.height}" width="${layout.width}" height="${layout.height}">` +
    `<defs><marker id="arrow" viewBox="0 0 8 8" refX="7" refY="4" markerWidth="7" markerHeight="7" orient="auto">` +
    `<path d="M0,0 L8,4 L0,8 z"/></marker></defs>` +
    edges +
    nodes +
    `</svg>`
  );
}

export function renderLineage(lineage: string[]): string {
  return `<nav class="lineage">${lineage.map((v) => `<span>${esc(v)}</span>`).join(" → ")}</nav>`;
}

// ----------------------------------------------------------------------
// run panel

export function renderRunPanel(run: Run): string {
  const stages = run.stage_results
    .map(
      (s) =>
        `<tr><td>${esc(s.node_id)}</td><td class="num">${esc(s.duration_ms)}</td>` +
        `<td>${s.cache_hit ? "cache&nbsp;hit" : "computed"}</td>` +
        `<td class="hash">${esc(s.output.slice(0, 12))}</td></tr>`,
    )
    .join("");
  const metrics = Object.entries(run.metrics)
    .map(
      ([name, value]) =>
        `<div class="metric"><span class="name">${esc(name)}</span>` +
        `<span class="value" data-metric="${esc(name)}">${esc(value)}</span></div>`,
    )
    .join("");
  const failure =
    run.status === "failed"
      ? `<div class="failure">failed at <b data-failing-node>${esc(run.failing_node)}</b></div>`
      : "";
  return (
    `<section class="run-panel" data-run="${run.run_no}">` +
    `<header>run #${run.run_no} · ${esc(run.pipeline_name)}@${esc(run.pipeline_version)}` +
    ` · <span class="status ${run.status}">${run.status}</span></header>` +
    failure +
    `<div class="metrics">${metrics}</div>` +
    `<div class="model">${esc(run.model_name)} ${esc(JSON.stringify(run.hyperparams))}</div>` +
    `<table class="stages"><thead><tr><th>stage</th><th>ms</th><th>execution</th><th>output</th></tr></thead>` +
    `<tbody>${stages}</tbody></table>` +
    `</section>`
  );
}

// ----------------------------------------------------------------------
// leaderboard: chart + table

export function renderChart(model: ChartModel, width = 640, height = 280): string {
  const all = model.series.flatMap((s) => s.points);
  if (all.length === 0) return `<div class="empty">No points to plot.</div>`;
  const xs = all.map((p) => p.window);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const pad = 36;
  const sx = (w: number) =>
    xMax === xMin ? width / 2 : pad + ((w - xMin) / (xMax - xMin)) * (width - 2 * pad);
  const sy = (v: number) => height - pad - v * (height - 2 * pad);

  const palette = ["#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377"];
  const lines = model.series
    .map((s, i) => {
      const points = s.points.map((p) => `${sx(p.window)},${sy(p.value)}`).join(" ");
      const dots = s.points
        .map(
          (p) =>
            `<circle cx="${sx(p.window)}" cy="${sy(p.value)}" r="3" data-series="${esc(s.label)}"` +
            ` data-window="${p.window}" data-value="${esc(p.value)}"/>`,
        )
        .join("");
      return (
        `<g class="series" stroke="${palette[i % palette.length]}" fill="${palette[i % palette.length]}">` +
        `<polyline fill="none" points="${points}"/>` +
        dots +
        `</g>`
      );
    })
    .join("");
  const legend = model.series
    .map(
      (s, i) =>
        `<span class="key" style="color:${palette[i % palette.length]}">● ${esc(s.label)}</span>`,
    )
    .join(" ");
  const warning = model.mixedEval
    ? `<div class="badge warn">overlaid runs use different eval datasets</div>`
    : "";
  return (
    warning +
    `<svg class="chart" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">` +
    `<line class="axis" x1="${pad}" y1="${height - pad}" x2="${width - pad}" y2="${height - pad}"/>` +
    `<line class="axis" x1="${pad}" y1="${pad}" x2="${pad}" y2="${height - pad}"/>` +
    `<text class="axis-label" x="${width / 2}" y="${height - 8}">window</text>` +
    `<text class="axis-label" x="12" y="${height / 2}" transform="rotate(-90 12 ${height / 2})">${esc(model.metric)}</text>` +
    lines +
    `</svg><div class="legend">${legend}</div>`
  );
}

export function renderGateBadges(state: ViewState): string {
  const scenario = state.scenario;
  if (!scenario || scenario.gates.length === 0) return "";
  const badges = scenario.gates
    .map(
      (g) =>
        `<span class="badge ${g.passed ? "pass" : "fail"}" data-window="${g.window}">` +
        `w${g.window} ${esc(g.challenger[1])} ${g.passed ? "passed gate" : "failed gate"}</span>`,
    )
    .join(" ");
  return `<div class="gates">${badges}</div>`;
}

export function renderLeaderboardTable(runs: Run[], metric = "accuracy"): string {
  const rows = runs
    .map(
      (r) =>
        `<tr data-run="${r.run_no}"><td>#${r.run_no}</td>` +
        `<td>${esc(r.pipeline_name)}@${esc(r.pipeline_version)}</td>` +
        `<td>${esc(r.eval_dataset.name)}@${esc(r.eval_dataset.version)}</td>` +
        `<td>${esc(r.model_name)}</td>` +
        `<td class="num" data-metric="${esc(metric)}">${
          metric in r.metrics ? esc(r.metrics[metric]) : "–"
        }</td>` +
        `<td class="status ${r.status}">${r.status}</td></tr>`,
    )
    .join("");
  return (
    `<table class="leaderboard"><thead><tr>` +
    `<th>run</th><th>pipeline</th><th>eval dataset</th><th>model</th><th>${esc(metric)}</th><th>status</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderBanner(state: ViewState): string {
  if (!state.banner) return "";
  return `<div class="banner">${esc(state.banner)} <button data-action="retry">retry</button></div>`;
}

export function renderNodeError(state: ViewState): string {
  if (!state.nodeError) return "";
  return (
    `<div class="node-error" data-node="${esc(state.nodeError.nodeId)}">` +
    `${esc(state.nodeError.message)}</div>`
  );
}
