// Fetch stub routing API URLs to the committed fixture payloads, which are
// exported verbatim from the backend's HTTP API over the designed store.

import { vi } from "vitest";

import compare from "./fixtures/compare.json";
import instanceQ2 from "./fixtures/instance_q2.json";
import instanceQ7 from "./fixtures/instance_q7.json";
import instancesAll from "./fixtures/instances_all.json";
import instancesFp2Fp3 from "./fixtures/instances_fp2_fp3.json";
import meta from "./fixtures/meta.json";
import overviewAccuracy from "./fixtures/overview_accuracy.json";
import overviewMrr from "./fixtures/overview_mrr.json";
import perturbFlip from "./fixtures/perturb_flip.json";
import sweeps from "./fixtures/sweeps.json";

export const META = meta as { sweep_id: string; a: string; b: string };
export const FIXTURES = {
  compare,
  instanceQ2,
  instanceQ7,
  instancesAll,
  instancesFp2Fp3,
  overviewAccuracy,
  overviewMrr,
  perturbFlip,
  sweeps,
};

function respond(body: unknown, status = 200): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => JSON.parse(JSON.stringify(body)),
  } as unknown as Response;
}

export interface FetchLog {
  calls: { url: string; method: string; body?: unknown }[];
}

/** Install a fixture-backed fetch; returns a log of every request made. */
export function stubApi(options: { failPerturb?: boolean } = {}): FetchLog {
  const log: FetchLog = { calls: [] };
  vi.stubGlobal(
    "fetch",
    vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = String(input);
      const method = init?.method ?? "GET";
      const body = init?.body ? JSON.parse(String(init.body)) : undefined;
      log.calls.push({ url, method, body });
      const u = new URL(url, "http://localhost");
      const path = u.pathname;
      if (method === "POST" && path.endsWith("/perturb")) {
        if (options.failPerturb) {
          return respond({ status: 502, code: "provider_error", message: "backend down" }, 502);
        }
        return respond(perturbFlip);
      }
      if (path === "/api/sweeps") return respond(sweeps);
      if (path.endsWith("/overview")) {
        return respond(u.searchParams.get("metric") === "mrr" ? overviewMrr : overviewAccuracy);
      }
      if (path.endsWith("/compare/instances")) {
        const from = u.searchParams.get("from");
        const to = u.searchParams.get("to");
        if (from === "FP2_MissedTopRanked" && to === "FP3_NotInContext") {
          return respond(instancesFp2Fp3);
        }
        return respond(instancesAll);
      }
      if (path.endsWith("/compare")) return respond(compare);
      if (path.endsWith("/instance")) {
        return respond(u.searchParams.get("qid") === "q7" ? instanceQ7 : instanceQ2);
      }
      if (path === `/api/sweeps/${META.sweep_id}`) return respond({});
      return respond({ status: 404, code: "sweep_not_found", message: url }, 404);
    }),
  );
  return log;
}
