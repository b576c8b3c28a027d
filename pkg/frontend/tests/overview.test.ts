// Pass-through fidelity of the overview: every rendered number is the
// corresponding API field, selection is strictly pairwise.

import { beforeEach, describe, expect, it, vi } from "vitest";

import { renderOverview } from "../src/views/overview";
import type { OverviewPayload } from "../src/types";
import { FIXTURES } from "./stub";

const overview = FIXTURES.overviewAccuracy as unknown as OverviewPayload;
const overviewMrr = FIXTURES.overviewMrr as unknown as OverviewPayload;

function render(
  payload: OverviewPayload,
  selected: string[] = [],
  callbacks = { onMetric: vi.fn(), onSelection: vi.fn(), onCompare: vi.fn() },
) {
  const root = document.createElement("div");
  renderOverview(root, payload, selected, callbacks);
  return { root, callbacks };
}

describe("overview", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders one column per config in API order", () => {
    const { root } = render(overview);
    const ids = [...root.querySelectorAll(".config-col")].map(
      (c) => (c as HTMLElement).dataset.configId,
    );
    expect(ids).toEqual(overview.configs.map((c) => c.config_id));
  });

  it("renders metric values exactly as the API reports them", () => {
    const { root } = render(overview);
    for (const config of overview.configs) {
      const column = root.querySelector(`.config-col[data-config-id="${config.config_id}"]`)!;
      const value = (column.querySelector(".metric-value") as HTMLElement).dataset.value;
      expect(Number(value)).toBe(config.metrics.accuracy);
    }
  });

  it("renders aggregate bars with the exact API means", () => {
    const { root } = render(overview);
    for (const agg of overview.aggregates) {
      const row = root.querySelector(
        `.agg-row[data-field="${agg.component_field}"][data-option="${agg.option_value}"]`,
      ) as HTMLElement;
      expect(row).not.toBeNull();
      expect(Number(row.dataset.value)).toBe(agg.mean_metric);
      expect(Number(row.dataset.n)).toBe(agg.n_configs);
    }
  });

  it("marks option membership per config", () => {
    const { root } = render(overview);
    for (const config of overview.configs) {
      const column = root.querySelector(`.config-col[data-config-id="${config.config_id}"]`)!;
      for (const dot of column.querySelectorAll(".dot")) {
        const element = dot as HTMLElement;
        const member = config.options[element.dataset.field!] === element.dataset.option;
        expect(element.classList.contains("member")).toBe(member);
      }
    }
  });

  it("re-sorting by another metric follows the API order", () => {
    const { root } = render(overviewMrr);
    const ids = [...root.querySelectorAll(".config-col")].map(
      (c) => (c as HTMLElement).dataset.configId,
    );
    expect(ids).toEqual(overviewMrr.configs.map((c) => c.config_id));
    const values = overviewMrr.configs.map((c) => c.metrics.mrr);
    expect([...values].sort((x, y) => y - x)).toEqual(values);
  });

  it("metric switcher fires the callback", () => {
    const { root, callbacks } = render(overview);
    const select = root.querySelector(".metric-switch") as HTMLSelectElement;
    select.value = "mrr";
    select.dispatchEvent(new Event("change"));
    expect(callbacks.onMetric).toHaveBeenCalledWith("mrr");
  });

  it("selecting a third config drops the oldest pick", () => {
    // widen the fixture to three configs to exercise the pairwise policy
    const third = JSON.parse(JSON.stringify(overview.configs[0]));
    third.config_id = "synthetic3rd";
    const widened = { ...overview, configs: [...overview.configs, third] };
    const [c1, c2] = overview.configs.map((c) => c.config_id);
    const { root, callbacks } = render(widened, [c1, c2]);
    (root.querySelector(`.config-col[data-config-id="synthetic3rd"]`) as HTMLElement).click();
    expect(callbacks.onSelection).toHaveBeenCalledWith([c2, "synthetic3rd"]);
  });

  it("compare button enables only with exactly two selections", () => {
    const [c1, c2] = overview.configs.map((c) => c.config_id);
    expect(
      (render(overview, [c1]).root.querySelector(".compare-btn") as HTMLButtonElement).disabled,
    ).toBe(true);
    const { root, callbacks } = render(overview, [c1, c2]);
    const button = root.querySelector(".compare-btn") as HTMLButtonElement;
    expect(button.disabled).toBe(false);
    button.click();
    expect(callbacks.onCompare).toHaveBeenCalledWith(c1, c2);
  });
});
