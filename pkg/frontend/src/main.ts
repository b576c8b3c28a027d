import { ApiClient, ApiError } from "./api";
import { clear, el, showToast } from "./dom";
import {
  defaultState,
  readStateFromUrl,
  writeStateToUrl,
  type ViewState,
} from "./state";
import type { InstancePayload, Metric, PerturbationResult } from "./types";
import { renderInstanceList } from "./views/instances";
import { renderOverview } from "./views/overview";
import { renderPerturbPanel } from "./views/perturb";
import { renderSankey } from "./views/sankey";
import { renderTextPanel } from "./views/textpanel";
import { renderTracks } from "./views/tracks";

interface Panes {
  root: Element;
  overview: Element;
  sankey: Element;
  instances: Element;
  tracks: Element;
  text: Element;
  perturb: Element;
}

export function buildLayout(root: Element): Panes {
  clear(root);
  const overview = el("section", { id: "pane-overview", class: "pane" });
  const sankey = el("section", { id: "pane-sankey", class: "pane" });
  const instances = el("section", { id: "pane-instances", class: "pane" });
  const tracks = el("section", { id: "pane-tracks", class: "pane" });
  const text = el("section", { id: "pane-text", class: "pane" });
  const perturb = el("section", { id: "pane-perturb", class: "pane" });
  root.append(
    el("header", { class: "app-header" }, el("h1", {}, "ragscope")),
    el("div", { class: "row top" }, overview),
    el("div", { class: "row middle" }, sankey, instances),
    el("div", { class: "row bottom" }, tracks, text, perturb),
  );
  return { root, overview, sankey, instances, tracks, text, perturb };
}

export class App {
  state: ViewState = defaultState();
  private instance?: InstancePayload;
  private curated = new Set<string>();
  private selectedChunk?: { side: "a" | "b"; chunkId: string };
  private perturbBusy = false;
  private perturbResult?: PerturbationResult;

  constructor(
    private panes: Panes,
    private api: ApiClient,
  ) {}

  async boot(): Promise<void> {
    this.state = readStateFromUrl();
    if (!this.state.sweep) {
      const sweeps = await this.api.listSweeps();
      if (sweeps.length) this.state.sweep = sweeps[0].sweep_id;
    }
    window.addEventListener("hashchange", () => {
      this.state = readStateFromUrl();
      void this.refresh();
    });
    await this.refresh();
  }

  private sync(): void {
    writeStateToUrl(this.state);
  }

  private async refresh(): Promise<void> {
    if (!this.state.sweep) return;
    await this.renderOverviewPane();
    if (this.state.a && this.state.b) {
      await this.renderComparePanes();
    } else {
      clear(this.panes.sankey);
      clear(this.panes.instances);
      clear(this.panes.tracks);
      clear(this.panes.text);
      clear(this.panes.perturb);
    }
  }

  private async renderOverviewPane(): Promise<void> {
    const payload = await this.api.overview(this.state.sweep!, this.state.metric);
    const selected = [this.state.a, this.state.b].filter(Boolean) as string[];
    renderOverview(this.panes.overview, payload, selected, {
      onMetric: (metric: Metric) => {
        this.state.metric = metric;
        this.sync();
        void this.refresh();
      },
      onSelection: (ids) => {
        [this.state.a, this.state.b] = [ids[0], ids[1]];
        this.state.from = this.state.to = this.state.qid = undefined;
        this.state.ctx = undefined;
        this.sync();
        void this.refresh();
      },
      onCompare: (a, b) => {
        this.state.a = a;
        this.state.b = b;
        this.sync();
        void this.refresh();
      },
    });
  }

  private async renderComparePanes(): Promise<void> {
    const { sweep, a, b } = this.state as Required<Pick<ViewState, "sweep" | "a" | "b">> &
      ViewState;
    try {
      const matrix = await this.api.compare(sweep, a, b);
      renderSankey(this.panes.sankey, matrix, {
        selected:
          this.state.from && this.state.to
            ? { from: this.state.from, to: this.state.to }
            : undefined,
        onSelectFlow: (from, to) => {
          this.state.from = from;
          this.state.to = to;
          this.state.qid = undefined;
          this.state.ctx = undefined;
          this.sync();
          void this.refresh();
        },
      });
      const instances = await this.api.instances(sweep, a, b, this.state.from, this.state.to);
      renderInstanceList(this.panes.instances, instances, this.state.qid, {
        onSelect: (qid) => {
          this.state.qid = qid;
          this.state.ctx = undefined;
          this.sync();
          void this.refresh();
        },
      });
      if (this.state.qid) {
        await this.renderInstancePanes();
      } else {
        clear(this.panes.tracks);
        clear(this.panes.text);
        clear(this.panes.perturb);
      }
    } catch (error) {
      showToast(this.panes.root, error instanceof ApiError ? error.message : String(error));
    }
  }

  private async renderInstancePanes(): Promise<void> {
    const { sweep, a, b, qid } = this.state;
    this.instance = await this.api.instance(sweep!, a!, b!, qid!, this.state.threshold);
    this.curated = new Set(
      this.state.ctx ?? this.instance.a.track.filter((e) => e.in_top_k).map((e) => e.chunk_id),
    );
    this.renderInstanceViews();
  }

  private renderInstanceViews(): void {
    const payload = this.instance;
    if (!payload) return;
    renderTracks(this.panes.tracks, payload, {
      threshold: this.state.threshold,
      curated: this.curated,
      selectedChunk: this.selectedChunk,
    }, {
      onToggleChunk: (chunkId) => {
        if (this.curated.has(chunkId)) this.curated.delete(chunkId);
        else this.curated.add(chunkId);
        this.state.ctx = this.orderedCurated();
        this.sync();
        this.renderInstanceViews();
      },
      onSelectChunk: (side, chunkId) => {
        this.selectedChunk = { side, chunkId };
        this.renderInstanceViews();
      },
      onThreshold: (threshold) => {
        this.state.threshold = threshold;
        this.sync();
        void this.renderInstancePanes();
      },
    });
    const entry =
      this.selectedChunk &&
      payload[this.selectedChunk.side].track.find(
        (e) => e.chunk_id === this.selectedChunk!.chunkId,
      );
    renderTextPanel(this.panes.text, entry || undefined);
    renderPerturbPanel(this.panes.perturb, payload, {
      curated: this.orderedCurated(),
      busy: this.perturbBusy,
      result: this.perturbResult,
    }, {
      onRegenerate: () => void this.regenerate(),
    });
  }

  private orderedCurated(): string[] {
    // keep ranking order for kept chunks so prompts stay deterministic
    return (this.instance?.a.track ?? [])
      .filter((e) => this.curated.has(e.chunk_id))
      .map((e) => e.chunk_id);
  }

  private async regenerate(): Promise<void> {
    const payload = this.instance;
    if (!payload || this.perturbBusy) return;
    this.perturbBusy = true;
    this.renderInstanceViews();
    try {
      this.perturbResult = await this.api.perturb(this.state.sweep!, {
        config_id: payload.a.config_id,
        question_id: payload.question_id,
        context_chunk_ids: this.orderedCurated(),
        allow_empty_context: this.orderedCurated().length === 0,
      });
      // refresh history from the store, keep current selection intact
      this.instance = await this.api.instance(
        this.state.sweep!,
        this.state.a!,
        this.state.b!,
        this.state.qid!,
        this.state.threshold,
      );
    } catch (error) {
      showToast(this.panes.root, error instanceof ApiError ? error.message : String(error));
    } finally {
      this.perturbBusy = false;
      this.renderInstanceViews();
    }
  }
}

export async function start(root: Element): Promise<App> {
  const app = new App(buildLayout(root), new ApiClient(""));
  await app.boot();
  return app;
}

const mount = document.getElementById("app");
if (mount) {
  void start(mount);
}
