import { clear, el } from "../dom";
import type { TrackEntry } from "../types";

export interface TextSegment {
  text: string;
  evidence: boolean;
  support: boolean;
}

/** Split chunk text into segments carrying evidence/support membership. */
export function segmentText(
  text: string,
  evidenceSpans: [number, number][],
  supportSpans: [number, number][],
): TextSegment[] {
  const bounds = new Set<number>([0, text.length]);
  for (const [start, end] of [...evidenceSpans, ...supportSpans]) {
    bounds.add(Math.max(0, Math.min(start, text.length)));
    bounds.add(Math.max(0, Math.min(end, text.length)));
  }
  const points = [...bounds].sort((x, y) => x - y);
  const inside = (spans: [number, number][], start: number, end: number) =>
    spans.some(([s, e]) => s <= start && end <= e);
  const segments: TextSegment[] = [];
  for (let i = 0; i < points.length - 1; i++) {
    const [start, end] = [points[i], points[i + 1]];
    if (start === end) continue;
    segments.push({
      text: text.slice(start, end),
      evidence: inside(evidenceSpans, start, end),
      support: inside(supportSpans, start, end),
    });
  }
  return segments;
}

/**
 * Full text of the selected chunk with ground-truth evidence underlined in
 * orange and cited supporting sentences underlined in blue (styles combine
 * where the passages overlap).
 */
export function renderTextPanel(container: Element, entry: TrackEntry | undefined): void {
  clear(container);
  if (!entry) {
    container.append(el("div", { class: "text-panel empty" }, "Select a chunk to read it."));
    return;
  }
  const body = el("div", { class: "text-panel", "data-chunk-id": entry.chunk_id });
  body.append(el("div", { class: "text-panel-head" }, entry.chunk_id));
  const paragraph = el("p", { class: "chunk-text" });
  for (const segment of segmentText(entry.text, entry.evidence_spans, entry.support_spans)) {
    const classes = [
      segment.evidence ? "ev-underline" : "",
      segment.support ? "sup-underline" : "",
    ]
      .filter(Boolean)
      .join(" ");
    paragraph.append(
      classes ? el("span", { class: classes }, segment.text) : document.createTextNode(segment.text),
    );
  }
  body.append(paragraph);
  container.append(body);
}
