/** Evolutionary tree, layered left to right by generation.
 *
 * Layout is a pure function of the lineage export; the SVG carries each
 * edge's endpoint ids as data attributes, so the rendered edge set can be
 * compared against the export directly.
 */

import { LineageExport } from "./api.js";

const COL_WIDTH = 150;
const ROW_HEIGHT = 46;
const MARGIN = { left: 60, top: 28, right: 140, bottom: 16 };
const SVG_NS = "http://www.w3.org/2000/svg";

export interface PlacedNode {
  id: string;
  title: string;
  generation: number;
  viable: boolean;
  x: number;
  y: number;
}

export interface TreeLayout {
  nodes: PlacedNode[];
  edges: { from: string; to: string }[];
  width: number;
  height: number;
  generations: number[];
}

export function layoutTree(lineage: LineageExport): TreeLayout {
  const generations = [...new Set(lineage.nodes.map((n) => n.generation))].sort(
    (a, b) => a - b,
  );
  const column = new Map(generations.map((g, i) => [g, i]));
  const rowsUsed = new Map<number, number>();
  const nodes: PlacedNode[] = [];
  let maxRows = 0;
  for (const node of lineage.nodes) {
    const col = column.get(node.generation) ?? 0;
    const row = rowsUsed.get(col) ?? 0;
    rowsUsed.set(col, row + 1);
    maxRows = Math.max(maxRows, row + 1);
    nodes.push({
      id: node.id,
      title: node.title,
      generation: node.generation,
      viable: node.viable,
      x: MARGIN.left + col * COL_WIDTH,
      y: MARGIN.top + row * ROW_HEIGHT,
    });
  }
  return {
    nodes,
    edges: lineage.edges.map((e) => ({ from: e.from, to: e.to })),
    width: MARGIN.left + Math.max(1, generations.length) * COL_WIDTH + MARGIN.right,
    height: MARGIN.top + Math.max(1, maxRows) * ROW_HEIGHT + MARGIN.bottom,
    generations,
  };
}

export function renderTree(lineage: LineageExport): HTMLElement {
  const layout = layoutTree(lineage);
  const byId = new Map(layout.nodes.map((n) => [n.id, n]));

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("width", String(layout.width));
  svg.setAttribute("height", String(layout.height));
  svg.setAttribute("viewBox", `0 0 ${layout.width} ${layout.height}`);

  for (const generation of layout.generations) {
    const col = layout.generations.indexOf(generation);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("class", "gen-label");
    label.setAttribute("x", String(MARGIN.left + col * COL_WIDTH));
    label.setAttribute("y", "14");
    label.textContent = `Gen ${generation}`;
    svg.append(label);
  }

  for (const edge of layout.edges) {
    const from = byId.get(edge.from);
    const to = byId.get(edge.to);
    if (!from || !to) continue;
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("class", "tree-edge");
    line.setAttribute("data-from", edge.from);
    line.setAttribute("data-to", edge.to);
    line.setAttribute("x1", String(from.x + 6));
    line.setAttribute("y1", String(from.y));
    line.setAttribute("x2", String(to.x - 6));
    line.setAttribute("y2", String(to.y));
    svg.append(line);
  }

  for (const node of layout.nodes) {
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("class", node.viable ? "tree-node" : "tree-node nonviable");
    group.setAttribute("data-id", node.id);
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(node.x));
    dot.setAttribute("cy", String(node.y));
    dot.setAttribute("r", "5");
    const text = document.createElementNS(SVG_NS, "text");
    text.setAttribute("x", String(node.x + 9));
    text.setAttribute("y", String(node.y + 4));
    text.textContent = node.title.length > 22 ? node.title.slice(0, 21) + "…" : node.title;
    group.append(dot, text);
    svg.append(group);
  }

  const wrap = document.createElement("div");
  wrap.className = "lineage-tree";
  wrap.append(svg);
  return wrap;
}

/** The edge set actually drawn, for comparing against the export. */
export function renderedEdges(tree: HTMLElement): { from: string; to: string }[] {
  return [...tree.querySelectorAll("line.tree-edge")].map((line) => ({
    from: line.getAttribute("data-from") ?? "",
    to: line.getAttribute("data-to") ?? "",
  }));
}
