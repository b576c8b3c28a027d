import { clear, el } from "../dom";
import type { InstancePayload, PerturbationResult, PerturbationRow } from "../types";

export interface PerturbCallbacks {
  onRegenerate(): void;
}

export interface PerturbRenderState {
  curated: string[]; // ordered chunk ids currently toggled on
  busy: boolean;
  result?: PerturbationResult;
}

function verdictWord(v: boolean): string {
  return v ? "correct" : "incorrect";
}

function resultCard(result: PerturbationResult): HTMLElement {
  const unchanged = result.answer_pert === result.answer_orig;
  const badgeText = unchanged
    ? "unchanged"
    : `${verdictWord(result.verdict_orig)} -> ${verdictWord(result.verdict_pert)}`;
  const badgeClass =
    !result.verdict_orig && result.verdict_pert
      ? "verdict-badge flip-good"
      : result.verdict_orig && !result.verdict_pert
        ? "verdict-badge flip-bad"
        : "verdict-badge";
  return el(
    "div",
    { class: "perturb-result", "data-stored-id": result.stored_id },
    el("span", { class: badgeClass, "data-verdict-pert": String(result.verdict_pert) }, badgeText),
    el(
      "div",
      { class: "answer-diff" },
      el("span", { class: "answer-old" }, result.answer_orig || "(empty)"),
      el("span", { class: "arrow" }, " -> "),
      el("span", { class: "answer-new" }, result.answer_pert || "(empty)"),
    ),
    el("span", { class: "context-label" }, result.context_label),
  );
}

function historyList(history: PerturbationRow[]): HTMLElement {
  const list = el("ul", { class: "perturb-history" });
  for (const row of history) {
    list.append(
      el(
        "li",
        { class: "history-item", "data-stored-id": row.stored_id },
        el("span", { class: "history-ctx" }, row.request.context_chunk_ids.join(", ") || "(empty)"),
        el(
          "span",
          { class: "history-verdicts" },
          `${verdictWord(row.result.verdict_orig)} -> ${verdictWord(row.result.verdict_pert)}`,
        ),
      ),
    );
  }
  return list;
}

/**
 * What-if controls for the selected question: shows the curated context
 * assembled from the track toggles, regenerates on demand, and lists prior
 * perturbations of the question.
 */
export function renderPerturbPanel(
  container: Element,
  payload: InstancePayload,
  state: PerturbRenderState,
  callbacks: PerturbCallbacks,
): void {
  clear(container);
  const root = el("div", { class: "perturb-panel" });
  root.append(
    el(
      "div",
      { class: "curated-context" },
      el("span", {}, "curated context: "),
      el("code", { class: "curated-ids" }, state.curated.join(", ") || "(empty)"),
    ),
  );
  const button = el("button", { class: "regenerate-btn" }, state.busy ? "Regenerating..." : "Regenerate") as HTMLButtonElement;
  button.disabled = state.busy;
  button.addEventListener("click", () => callbacks.onRegenerate());
  root.append(button);
  if (state.result) root.append(resultCard(state.result));
  if (payload.history.length) {
    root.append(el("div", { class: "history-head" }, "history"));
    root.append(historyList(payload.history));
  }
  container.append(root);
}
