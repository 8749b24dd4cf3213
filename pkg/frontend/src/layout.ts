// Layered left-to-right DAG layout, computed client-side from the manifest.
// Pure functions only: the server stays presentation-free.

import type { PipelineVersion } from "./types.js";

export interface PositionedNode {
  id: string;
  layer: number;
  row: number;
  x: number;
  y: number;
}

export interface PositionedEdge {
  from: string;
  to: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface DagLayout {
  nodes: PositionedNode[];
  edges: PositionedEdge[];
  layers: string[][];
  width: number;
  height: number;
}

export const NODE_WIDTH = 168;
export const NODE_HEIGHT = 64;
const LAYER_GAP = 230;
const ROW_GAP = 96;
const PADDING = 24;

/** Longest-path layering: a node sits one layer right of its deepest input. */
export function assignLayers(
  nodeIds: string[],
  edges: [string, string][],
): Map<string, number> {
  const incoming = new Map<string, string[]>(nodeIds.map((id) => [id, []]));
  for (const [from, to] of edges) {
    incoming.get(to)?.push(from);
  }
  const layers = new Map<string, number>();
  const visiting = new Set<string>();

  const depth = (id: string): number => {
    const known = layers.get(id);
    if (known !== undefined) return known;
    if (visiting.has(id)) throw new Error(`cycle through node ${id}`);
    visiting.add(id);
    const parents = incoming.get(id) ?? [];
    const layer = parents.length === 0 ? 0 : Math.max(...parents.map(depth)) + 1;
    visiting.delete(id);
    layers.set(id, layer);
    return layer;
  };

  for (const id of nodeIds) depth(id);
  return layers;
}

export function layoutPipeline(pipeline: PipelineVersion): DagLayout {
  const ids = pipeline.nodes.map((n) => n.id);
  const layerOf = assignLayers(ids, pipeline.edges);
  const layerCount = ids.length ? Math.max(...layerOf.values()) + 1 : 0;
  const layers: string[][] = Array.from({ length: layerCount }, () => []);
  for (const id of [...ids].sort()) {
    layers[layerOf.get(id)!].push(id);
  }

  const tallest = Math.max(1, ...layers.map((l) => l.length));
  const height = PADDING * 2 + tallest * NODE_HEIGHT + (tallest - 1) * (ROW_GAP - NODE_HEIGHT);
  const positioned = new Map<string, PositionedNode>();
  layers.forEach((layerIds, layer) => {
    const columnHeight = layerIds.length * ROW_GAP - (ROW_GAP - NODE_HEIGHT);
    const top = PADDING + (height - PADDING * 2 - columnHeight) / 2;
    layerIds.forEach((id, row) => {
      positioned.set(id, {
        id,
        layer,
        row,
        x: PADDING + layer * LAYER_GAP,
        y: top + row * ROW_GAP,
      });
    });
  });

  const edges: PositionedEdge[] = pipeline.edges.map(([from, to]) => {
    const a = positioned.get(from)!;
    const b = positioned.get(to)!;
    return {
      from,
      to,
      x1: a.x + NODE_WIDTH,
      y1: a.y + NODE_HEIGHT / 2,
      x2: b.x,
      y2: b.y + NODE_HEIGHT / 2,
    };
  });

  return {
    nodes: ids.map((id) => positioned.get(id)!),
    edges,
    layers,
    width: PADDING * 2 + Math.max(0, layerCount - 1) * LAYER_GAP + NODE_WIDTH,
    height,
  };
}
