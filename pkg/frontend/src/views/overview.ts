import { clear, el } from "../dom";
import { METRICS, type Metric, type OverviewPayload } from "../types";

export interface OverviewCallbacks {
  onMetric(metric: Metric): void;
  onSelection(selected: string[]): void;
  onCompare(a: string, b: string): void;
}

function metricOf(payload: OverviewPayload, configId: string): number {
  const config = payload.configs.find((c) => c.config_id === configId);
  if (!config) return 0;
  const m = config.metrics;
  return payload.metric === "recall" ? m.recall_at_k : m[payload.metric];
}

/**
 * Configuration matrix with a global metric bar per configuration (columns,
 * already sorted by the API) and per-option mean bars on the side. Exactly
 * two columns can be selected; picking a third drops the oldest pick.
 */
export function renderOverview(
  container: Element,
  payload: OverviewPayload,
  selected: string[],
  callbacks: OverviewCallbacks,
): void {
  clear(container);
  const root = el("div", { class: "overview" });

  const switcher = el("select", { class: "metric-switch", "aria-label": "metric" });
  for (const metric of METRICS) {
    const option = el("option", { value: metric }, metric);
    if (metric === payload.metric) option.setAttribute("selected", "selected");
    switcher.append(option);
  }
  switcher.addEventListener("change", () => callbacks.onMetric(switcher.value as Metric));

  const compare = el(
    "button",
    { class: "compare-btn" },
    "Compare selected",
  ) as HTMLButtonElement;
  compare.disabled = selected.length !== 2;
  compare.addEventListener("click", () => {
    if (selected.length === 2) callbacks.onCompare(selected[0], selected[1]);
  });
  root.append(el("div", { class: "overview-toolbar" }, switcher, compare));

  // option rows in first-seen order: field order from the aggregates payload
  const optionRows: { field: string; option: string }[] = payload.aggregates.map((a) => ({
    field: a.component_field,
    option: a.option_value,
  }));

  const maxMetric = Math.max(1e-9, ...payload.configs.map((c) => metricOf(payload, c.config_id)));
  const columns = el("div", { class: "config-columns" });
  for (const config of payload.configs) {
    const value = metricOf(payload, config.config_id);
    const bar = el("div", {
      class: "metric-bar",
      "data-value": String(value),
      title: `${payload.metric}=${value}`,
      style: `height:${Math.round((value / maxMetric) * 80)}px`,
    });
    const dots = el("div", { class: "option-dots" });
    for (const row of optionRows) {
      const member = config.options[row.field] === row.option;
      dots.append(
        el("span", {
          class: member ? "dot member" : "dot",
          "data-field": row.field,
          "data-option": row.option,
        }),
      );
    }
    const column = el(
      "div",
      {
        class: selected.includes(config.config_id) ? "config-col selected" : "config-col",
        "data-config-id": config.config_id,
      },
      el("span", { class: "metric-value", "data-value": String(value) }, value.toFixed(3)),
      bar,
      dots,
      el("span", { class: "config-label" }, config.config_id.slice(0, 6)),
    );
    column.addEventListener("click", () => {
      let next = selected.includes(config.config_id)
        ? selected.filter((id) => id !== config.config_id)
        : [...selected, config.config_id];
      if (next.length > 2) next = next.slice(next.length - 2); // oldest pick drops
      callbacks.onSelection(next);
    });
    columns.append(column);
  }

  const aggregates = el("div", { class: "aggregates" });
  const maxAgg = Math.max(1e-9, ...payload.aggregates.map((a) => a.mean_metric));
  for (const agg of payload.aggregates) {
    aggregates.append(
      el(
        "div",
        {
          class: "agg-row",
          "data-field": agg.component_field,
          "data-option": agg.option_value,
          "data-value": String(agg.mean_metric),
          "data-n": String(agg.n_configs),
        },
        el("span", { class: "agg-label" }, `${agg.component_field}=${agg.option_value}`),
        el("div", {
          class: "agg-bar",
          style: `width:${Math.round((agg.mean_metric / maxAgg) * 160)}px`,
        }),
        el("span", { class: "agg-value" }, agg.mean_metric.toFixed(3)),
      ),
    );
  }

  root.append(el("div", { class: "overview-body" }, columns, aggregates));
  container.append(root);
}
