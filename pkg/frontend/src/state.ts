import type { Metric } from "./types";

// The whole UI selection lives in the URL hash so any view is deep-linkable:
// #sweep=..&metric=mrr&a=..&b=..&from=FP2_..&to=FP3_..&qid=q2&threshold=0.3&ctx=a1:0,a2:0

export interface ViewState {
  sweep?: string;
  metric: Metric;
  a?: string;
  b?: string;
  from?: string;
  to?: string;
  qid?: string;
  threshold: number;
  ctx?: string[];
}

export const DEFAULT_THRESHOLD = 0.3;

export function defaultState(): ViewState {
  return { metric: "accuracy", threshold: DEFAULT_THRESHOLD };
}

export function serializeState(state: ViewState): string {
  const params = new URLSearchParams();
  if (state.sweep) params.set("sweep", state.sweep);
  params.set("metric", state.metric);
  if (state.a) params.set("a", state.a);
  if (state.b) params.set("b", state.b);
  if (state.from) params.set("from", state.from);
  if (state.to) params.set("to", state.to);
  if (state.qid) params.set("qid", state.qid);
  if (state.threshold !== DEFAULT_THRESHOLD) params.set("threshold", String(state.threshold));
  if (state.ctx && state.qid) params.set("ctx", state.ctx.join(","));
  return params.toString();
}

export function parseState(hash: string): ViewState {
  const params = new URLSearchParams(hash.replace(/^#/, ""));
  const state = defaultState();
  state.sweep = params.get("sweep") ?? undefined;
  const metric = params.get("metric");
  if (metric && ["accuracy", "recall", "mrr", "map"].includes(metric)) {
    state.metric = metric as Metric;
  }
  state.a = params.get("a") ?? undefined;
  state.b = params.get("b") ?? undefined;
  const threshold = Number(params.get("threshold"));
  if (Number.isFinite(threshold) && threshold > 0 && threshold <= 1) {
    state.threshold = threshold;
  }
  // flow selection is only meaningful with a config pair selected
  if (state.a && state.b) {
    state.from = params.get("from") ?? undefined;
    state.to = params.get("to") ?? undefined;
    state.qid = params.get("qid") ?? undefined;
  }
  // a curated context is only meaningful with a question selected
  const ctx = params.get("ctx");
  if (state.qid && ctx !== null) {
    state.ctx = ctx === "" ? [] : ctx.split(",");
  }
  return state;
}

export function writeStateToUrl(state: ViewState): void {
  const serialized = serializeState(state);
  if (window.location.hash.replace(/^#/, "") !== serialized) {
    window.location.hash = serialized;
  }
}

export function readStateFromUrl(): ViewState {
  return parseState(window.location.hash);
}
