/** Typed client for the veil HTTP API.
 *
 * All uncertainty computation happens server-side; this module only
 * validates and types the responses.
 */
import { z } from "zod";

export const AnnotatedRow = z.object({
  values: z.array(z.unknown()),
  col_det: z.array(z.boolean()),
  row_det: z.boolean(),
  marker: z.string(),
});
export type AnnotatedRow = z.infer<typeof AnnotatedRow>;

export const PlanSummary = z.object({
  tables: z.array(z.string()),
  lenses: z.array(z.string()),
});
export type PlanSummary = z.infer<typeof PlanSummary>;

export const QueryResponse = z.object({
  query_id: z.string(),
  columns: z.array(z.string()),
  rows: z.array(AnnotatedRow),
  missing: z.number().int(),
  plan: PlanSummary,
});
export type QueryResponse = z.infer<typeof QueryResponse>;

export const Explanation = z.object({
  kind: z.string(),
  deterministic: z.boolean(),
  reasons: z.array(z.string()),
  confidence: z.number().nullable(),
  variance: z.number().nullable(),
  ci_low: z.unknown(),
  ci_high: z.unknown(),
  bound_low: z.unknown(),
  bound_high: z.unknown(),
  histogram: z.array(z.tuple([z.unknown(), z.number()])),
  examples: z.array(z.unknown()),
  n_samples: z.number().int(),
});
export type Explanation = z.infer<typeof Explanation>;

export interface AcknowledgeRequest {
  lens: string;
  var: string;
  args: unknown[];
  action: "FIX" | "APPROVE";
  value?: unknown;
}

/** One HTTP exchange; implemented by fetch in the browser and by a
 * transcript replayer in tests. */
export interface Transport {
  request(
    method: string,
    path: string,
    opts?: { params?: Record<string, string>; body?: unknown },
  ): Promise<{ status: number; json: unknown }>;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

function detailOf(json: unknown): string {
  if (json && typeof json === "object" && "detail" in json) {
    return String((json as { detail: unknown }).detail);
  }
  return JSON.stringify(json);
}

export class ApiClient {
  constructor(private readonly transport: Transport) {}

  private async call(
    method: string,
    path: string,
    opts?: { params?: Record<string, string>; body?: unknown },
  ): Promise<unknown> {
    const r = await this.transport.request(method, path, opts);
    if (r.status < 200 || r.status >= 300) {
      throw new ApiError(detailOf(r.json), r.status);
    }
    return r.json;
  }

  async query(sql: string, strategy = "inline"): Promise<QueryResponse> {
    const json = await this.call("POST", "/query", {
      body: { sql, strategy },
    });
    return QueryResponse.parse(json);
  }

  async explainCell(
    queryId: string,
    marker: string,
    column: string,
  ): Promise<Explanation> {
    const json = await this.call("GET", "/explain/cell", {
      params: { marker, query_id: queryId, column },
    });
    return Explanation.parse(json);
  }

  async explainRow(queryId: string, marker: string): Promise<Explanation> {
    const json = await this.call("GET", "/explain/row", {
      params: { marker, query_id: queryId },
    });
    return Explanation.parse(json);
  }

  async acknowledge(req: AcknowledgeRequest): Promise<void> {
    await this.call("POST", "/acknowledge", { body: req });
  }
}

/** Browser transport against a running shim service. */
export class FetchTransport implements Transport {
  constructor(private readonly baseUrl: string) {}

  async request(
    method: string,
    path: string,
    opts?: { params?: Record<string, string>; body?: unknown },
  ): Promise<{ status: number; json: unknown }> {
    let url = this.baseUrl + path;
    if (opts?.params) {
      url += "?" + new URLSearchParams(opts.params).toString();
    }
    const r = await fetch(url, {
      method,
      headers:
        opts?.body !== undefined
          ? { "content-type": "application/json" }
          : undefined,
      body: opts?.body !== undefined ? JSON.stringify(opts.body) : undefined,
    });
    return { status: r.status, json: await r.json() };
  }
}
