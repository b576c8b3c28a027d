import { clear, el, svgEl } from "../dom";
import type { InstancePayload, TrackEntry } from "../types";

const ROW_H = 26;
const BAR_H = 18;

export interface TrackCallbacks {
  onToggleChunk(chunkId: string): void;
  onSelectChunk(side: "a" | "b", chunkId: string): void;
  onThreshold(threshold: number): void;
}

export interface TrackRenderState {
  threshold: number;
  curated: Set<string>; // chunk ids kept in the what-if context (track A)
  selectedChunk?: { side: "a" | "b"; chunkId: string };
}

function trackColumn(
  side: "a" | "b",
  entries: TrackEntry[],
  state: TrackRenderState,
  callbacks: TrackCallbacks,
): HTMLElement {
  const column = el("div", { class: "track", "data-side": side });
  for (const entry of entries) {
    const classes = ["chunk-bar"];
    if (entry.in_top_k) classes.push("in-top-k");
    if (entry.evidence_spans.length) classes.push("has-evidence");
    if (
      state.selectedChunk &&
      state.selectedChunk.side === side &&
      state.selectedChunk.chunkId === entry.chunk_id
    ) {
      classes.push("selected");
    }
    const bar = el(
      "div",
      {
        class: classes.join(" "),
        "data-chunk-id": entry.chunk_id,
        "data-rank": String(entry.rank),
        "data-score": String(entry.score),
        style: `top:${(entry.rank - 1) * ROW_H}px;height:${BAR_H}px`,
        title: `rank ${entry.rank}  score ${entry.score.toFixed(4)}`,
      },
      el("span", { class: "chunk-name" }, entry.chunk_id),
    );
    bar.addEventListener("click", () => callbacks.onSelectChunk(side, entry.chunk_id));
    if (side === "a") {
      const toggle = el("input", {
        type: "checkbox",
        class: "ctx-toggle",
        "aria-label": `keep ${entry.chunk_id} in context`,
      }) as HTMLInputElement;
      toggle.checked = state.curated.has(entry.chunk_id);
      toggle.addEventListener("click", (event) => {
        event.stopPropagation();
        callbacks.onToggleChunk(entry.chunk_id);
      });
      bar.prepend(toggle);
      if (!toggle.checked) bar.classList.add("ctx-removed");
    }
    column.append(bar);
  }
  column.style.height = `${entries.length * ROW_H}px`;
  return column;
}

/**
 * Dual-track context comparison: one column of rank-positioned chunk bars
 * per configuration, connectors between textually similar chunks at or
 * above the Jaccard threshold, and per-chunk context toggles on track A.
 */
export function renderTracks(
  container: Element,
  payload: InstancePayload,
  state: TrackRenderState,
  callbacks: TrackCallbacks,
): void {
  clear(container);
  const root = el("div", { class: "tracks" });

  const slider = el("input", {
    type: "range",
    class: "threshold-slider",
    min: "0.05",
    max: "1",
    step: "0.05",
    value: String(state.threshold),
    "aria-label": "similarity threshold",
  }) as HTMLInputElement;
  slider.addEventListener("change", () => callbacks.onThreshold(Number(slider.value)));
  root.append(
    el(
      "div",
      { class: "tracks-toolbar" },
      el("span", {}, `link threshold `),
      slider,
      el("span", { class: "threshold-value" }, state.threshold.toFixed(2)),
    ),
  );

  const columnA = trackColumn("a", payload.a.track, state, callbacks);
  const columnB = trackColumn("b", payload.b.track, state, callbacks);

  const rankA = new Map(payload.a.track.map((e) => [e.chunk_id, e.rank]));
  const rankB = new Map(payload.b.track.map((e) => [e.chunk_id, e.rank]));
  const height = Math.max(payload.a.track.length, payload.b.track.length) * ROW_H;
  const links = svgEl("svg", {
    class: "track-links",
    width: "80",
    height: String(height),
    viewBox: `0 0 80 ${height}`,
  });
  const shown = payload.links.filter((link) => link.jaccard >= state.threshold);
  for (const link of shown) {
    const ya = ((rankA.get(link.a) ?? 1) - 1) * ROW_H + BAR_H / 2;
    const yb = ((rankB.get(link.b) ?? 1) - 1) * ROW_H + BAR_H / 2;
    const line = svgEl("line", {
      class: "link",
      x1: "0",
      y1: String(ya),
      x2: "80",
      y2: String(yb),
      "data-a": link.a,
      "data-b": link.b,
      "data-jaccard": String(link.jaccard),
    });
    line.append(svgEl("title", {}, `jaccard ${link.jaccard.toFixed(3)}`));
    links.append(line);
  }

  // hovering a chunk bar highlights its strongest counterpart link
  function wireHover(column: HTMLElement, key: "a" | "b"): void {
    for (const bar of column.querySelectorAll<HTMLElement>(".chunk-bar")) {
      bar.addEventListener("mouseenter", () => {
        const mine = shown.filter((l) => l[key] === bar.dataset.chunkId);
        const best = mine.reduce(
          (top, l) => (top && top.jaccard >= l.jaccard ? top : l),
          undefined as (typeof shown)[number] | undefined,
        );
        for (const line of links.querySelectorAll<SVGLineElement>(".link")) {
          const isBest = !!best && line.dataset.a === best.a && line.dataset.b === best.b;
          line.classList.toggle("hl", isBest);
        }
      });
      bar.addEventListener("mouseleave", () => {
        for (const line of links.querySelectorAll(".link")) line.classList.remove("hl");
      });
    }
  }
  wireHover(columnA, "a");
  wireHover(columnB, "b");

  root.append(
    el(
      "div",
      { class: "tracks-body" },
      el(
        "div",
        { class: "track-head" },
        el("span", { class: "track-title" }, `A ${payload.a.config_id.slice(0, 6)} (${payload.a.outcome})`),
      ),
      columnA,
      links,
      columnB,
      el(
        "div",
        { class: "track-head" },
        el("span", { class: "track-title" }, `B ${payload.b.config_id.slice(0, 6)} (${payload.b.outcome})`),
      ),
    ),
  );
  container.append(root);
}
