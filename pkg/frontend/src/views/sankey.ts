import { clear, svgEl } from "../dom";
import { OUTCOME_LABELS, shortLabel, type TransitionMatrixPayload } from "../types";

export interface SankeyOptions {
  height?: number;
  width?: number;
  nodeGap?: number;
  onSelectFlow?(from: string, to: string): void;
  selected?: { from: string; to: string };
}

interface NodeBox {
  label: string;
  y: number;
  h: number;
  total: number;
}

export interface SankeyLayout {
  scale: number;
  left: NodeBox[];
  right: NodeBox[];
  flows: { from: string; to: string; count: number; y0: number; y1: number; h: number }[];
}

/**
 * Two-column flow layout. Node order is pinned to the outcome display order
 * on both sides for visual stability; flow thickness is count * scale with
 * one shared scale, so widths stay proportional to counts.
 */
export function layoutSankey(
  matrix: TransitionMatrixPayload,
  height = 360,
  nodeGap = 6,
): SankeyLayout {
  const labels = matrix.labels;
  const rowSums = matrix.counts.map((row) => row.reduce((s, c) => s + c, 0));
  const colSums = labels.map((_, j) => matrix.counts.reduce((s, row) => s + row[j], 0));
  const total = rowSums.reduce((s, c) => s + c, 0);
  const gaps = nodeGap * (labels.filter((_, i) => rowSums[i] > 0 || colSums[i] > 0).length + 1);
  const scale = total > 0 ? Math.max(height - gaps, 10) / total : 0;

  function column(sums: number[]): NodeBox[] {
    let y = nodeGap;
    return labels.map((label, i) => {
      const h = sums[i] * scale;
      const box = { label, y, h, total: sums[i] };
      if (sums[i] > 0) y += h + nodeGap;
      return box;
    });
  }

  const left = column(rowSums);
  const right = column(colSums);

  // stack flows inside each node following the fixed label order
  const leftOffsets = left.map((n) => n.y);
  const rightOffsets = right.map((n) => n.y);
  const flows: SankeyLayout["flows"] = [];
  for (let i = 0; i < labels.length; i++) {
    for (let j = 0; j < labels.length; j++) {
      const count = matrix.counts[i][j];
      if (count === 0) continue;
      const h = count * scale;
      flows.push({
        from: labels[i],
        to: labels[j],
        count,
        y0: leftOffsets[i] + h / 2,
        y1: rightOffsets[j] + h / 2,
        h,
      });
      leftOffsets[i] += h;
      rightOffsets[j] += h;
    }
  }
  return { scale, left, right, flows };
}

export function renderSankey(
  container: Element,
  matrix: TransitionMatrixPayload,
  options: SankeyOptions = {},
): void {
  clear(container);
  const height = options.height ?? 360;
  const width = options.width ?? 520;
  const layout = layoutSankey(matrix, height, options.nodeGap ?? 6);
  const nodeW = 12;
  const x0 = 90;
  const x1 = width - 90 - nodeW;
  const svg = svgEl("svg", {
    class: "sankey",
    viewBox: `0 0 ${width} ${height}`,
    width: String(width),
    height: String(height),
  });

  for (const flow of layout.flows) {
    const mid = (x0 + nodeW + x1) / 2;
    const path = svgEl("path", {
      class:
        options.selected &&
        options.selected.from === flow.from &&
        options.selected.to === flow.to
          ? "flow selected"
          : "flow",
      d: `M ${x0 + nodeW} ${flow.y0} C ${mid} ${flow.y0}, ${mid} ${flow.y1}, ${x1} ${flow.y1}`,
      "stroke-width": String(flow.h),
      "data-from": flow.from,
      "data-to": flow.to,
      "data-count": String(flow.count),
      "data-h": String(flow.h),
      fill: "none",
    });
    path.append(
      svgEl("title", {}, `${shortLabel(flow.from)} -> ${shortLabel(flow.to)}: ${flow.count}`),
    );
    path.addEventListener("click", () => options.onSelectFlow?.(flow.from, flow.to));
    svg.append(path);
  }

  const sides: ["a" | "b", NodeBox[], number][] = [
    ["a", layout.left, x0],
    ["b", layout.right, x1],
  ];
  for (const [side, nodes, x] of sides) {
    for (const node of nodes) {
      if (node.total === 0) continue;
      const rect = svgEl("rect", {
        class: "node",
        x: String(x),
        y: String(node.y),
        width: String(nodeW),
        height: String(Math.max(node.h, 1)),
        "data-side": side,
        "data-label": node.label,
        "data-total": String(node.total),
      });
      rect.append(svgEl("title", {}, `${shortLabel(node.label)}: ${node.total}`));
      svg.append(rect);
      svg.append(
        svgEl(
          "text",
          {
            class: "node-label",
            x: String(side === "a" ? x - 4 : x + nodeW + 4),
            y: String(node.y + Math.max(node.h, 1) / 2 + 3),
            "text-anchor": side === "a" ? "end" : "start",
          },
          shortLabel(node.label),
        ),
      );
    }
  }
  container.append(svg);
}

export const ALL_LABELS = OUTCOME_LABELS;
