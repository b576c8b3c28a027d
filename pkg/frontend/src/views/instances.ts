import { clear, el, svgEl } from "../dom";
import { shortLabel, type InstanceListPayload } from "../types";

/** Circular coverage glyph: arc fraction equals the API's glyph fraction. */
export function coverageGlyph(fraction: number, radius = 7): SVGSVGElement {
  const size = radius * 2 + 2;
  const center = size / 2;
  const svg = svgEl("svg", {
    class: "glyph",
    width: String(size),
    height: String(size),
    viewBox: `0 0 ${size} ${size}`,
    "data-fraction": String(fraction),
  });
  svg.append(
    svgEl("circle", {
      class: "glyph-track",
      cx: String(center),
      cy: String(center),
      r: String(radius),
    }),
  );
  if (fraction >= 1) {
    svg.append(
      svgEl("circle", {
        class: "glyph-fill full",
        cx: String(center),
        cy: String(center),
        r: String(radius),
      }),
    );
  } else if (fraction > 0) {
    const angle = fraction * 2 * Math.PI;
    const x = center + radius * Math.sin(angle);
    const y = center - radius * Math.cos(angle);
    const large = fraction > 0.5 ? 1 : 0;
    svg.append(
      svgEl("path", {
        class: "glyph-fill",
        d: `M ${center} ${center} L ${center} ${center - radius} A ${radius} ${radius} 0 ${large} 1 ${x} ${y} Z`,
      }),
    );
  }
  return svg;
}

export interface InstanceListCallbacks {
  onSelect(questionId: string): void;
}

/** Question navigator filtered by the selected Sankey flow. */
export function renderInstanceList(
  container: Element,
  payload: InstanceListPayload,
  selectedQid: string | undefined,
  callbacks: InstanceListCallbacks,
): void {
  clear(container);
  const list = el("ul", { class: "instance-list" });
  for (const row of payload.questions) {
    const item = el(
      "li",
      {
        class: row.question_id === selectedQid ? "instance selected" : "instance",
        "data-qid": row.question_id,
      },
      coverageGlyph(row.glyph_a),
      coverageGlyph(row.glyph_b),
      el("span", { class: "instance-labels" }, `${shortLabel(row.label_a)} -> ${shortLabel(row.label_b)}`),
      el("span", { class: "instance-text" }, row.text || row.question_id),
    );
    item.addEventListener("click", () => callbacks.onSelect(row.question_id));
    list.append(item);
  }
  container.append(
    el("div", { class: "instance-count" }, `${payload.total} question(s)`),
    list,
  );
}
