import type {
  InstanceListPayload,
  InstancePayload,
  Metric,
  OverviewPayload,
  PerturbationRequest,
  PerturbationResult,
  SweepSummary,
  TransitionMatrixPayload,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let code = "http_error";
    let message = `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as { code?: string; message?: string };
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      // non-JSON error body; keep defaults
    }
    throw new ApiError(response.status, code, message);
  }
  return (await response.json()) as T;
}

function query(params: Record<string, string | number | undefined>): string {
  const search = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value !== undefined) search.set(key, String(value));
  }
  const s = search.toString();
  return s ? `?${s}` : "";
}

export class ApiClient {
  constructor(private base = "") {}

  listSweeps(): Promise<SweepSummary[]> {
    return request(`${this.base}/api/sweeps`);
  }

  overview(sweepId: string, metric: Metric): Promise<OverviewPayload> {
    return request(`${this.base}/api/sweeps/${sweepId}/overview${query({ metric })}`);
  }

  compare(sweepId: string, a: string, b: string): Promise<TransitionMatrixPayload> {
    return request(`${this.base}/api/sweeps/${sweepId}/compare${query({ a, b })}`);
  }

  instances(
    sweepId: string,
    a: string,
    b: string,
    from?: string,
    to?: string,
  ): Promise<InstanceListPayload> {
    return request(
      `${this.base}/api/sweeps/${sweepId}/compare/instances${query({ a, b, from, to })}`,
    );
  }

  instance(
    sweepId: string,
    a: string,
    b: string,
    qid: string,
    threshold: number,
  ): Promise<InstancePayload> {
    return request(
      `${this.base}/api/sweeps/${sweepId}/instance${query({ a, b, qid, threshold })}`,
    );
  }

  perturb(sweepId: string, body: PerturbationRequest): Promise<PerturbationResult> {
    return request(`${this.base}/api/sweeps/${sweepId}/perturb`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
