/** Console state machine: one grid, at most one open explanation panel, and
 * the Fix/Approve feedback loop.
 *
 * Invariant: every Fix or Approve issues exactly one /acknowledge call
 * followed by exactly one /query call (the automatic re-run).
 */
import { ApiClient, ApiError, QueryResponse } from "./api.js";
import { GridView, cellKey, renderResults } from "./grid.js";
import { PanelView, explanationPanel } from "./explain.js";

export interface PanelState {
  view: PanelView;
  marker: string;
  column: string | null; // null: a whole-row explanation
}

export interface ConsoleState {
  grid: GridView | null;
  panel: PanelState | null;
  error: string | null;
  busy: boolean;
}

export class Console {
  private state: ConsoleState = {
    grid: null,
    panel: null,
    error: null,
    busy: false,
  };
  private lastResponse: QueryResponse | null = null;
  private lastSql = "";
  private lastStrategy = "inline";
  private acknowledged = new Set<string>();

  constructor(private readonly api: ApiClient) {}

  getState(): ConsoleState {
    return this.state;
  }

  private fail(e: unknown): void {
    const msg = e instanceof ApiError ? e.message : String(e);
    this.state = { ...this.state, error: msg, busy: false };
  }

  async runQuery(sql: string, strategy = "inline"): Promise<void> {
    // at most one in-flight query
    if (this.state.busy) {
      return;
    }
    this.state = { ...this.state, busy: true, error: null };
    try {
      const resp = await this.api.query(sql, strategy);
      this.lastResponse = resp;
      this.lastSql = sql;
      this.lastStrategy = strategy;
      this.state = {
        grid: renderResults(resp, this.acknowledged),
        panel: null,
        error: null,
        busy: false,
      };
    } catch (e) {
      this.fail(e);
    }
  }

  /** The analyst clicked a highlighted cell. */
  async explainCell(rowIndex: number, column: string): Promise<void> {
    const resp = this.lastResponse;
    if (!resp) {
      return;
    }
    const marker = resp.rows[rowIndex].marker;
    try {
      const x = await this.api.explainCell(resp.query_id, marker, column);
      this.state = {
        ...this.state,
        panel: { view: explanationPanel(x), marker, column },
        error: null,
      };
    } catch (e) {
      if (e instanceof ApiError && e.status === 400) {
        // stale marker: the data moved under us
        this.fail(new Error(`explanation unavailable, re-run the query (${e.message})`));
        return;
      }
      this.fail(e);
    }
  }

  async explainRow(rowIndex: number): Promise<void> {
    const resp = this.lastResponse;
    if (!resp) {
      return;
    }
    const marker = resp.rows[rowIndex].marker;
    try {
      const x = await this.api.explainRow(resp.query_id, marker);
      this.state = {
        ...this.state,
        panel: { view: explanationPanel(x), marker, column: null },
        error: null,
      };
    } catch (e) {
      this.fail(e);
    }
  }

  /** Pin the repair behind one reason to a chosen value, then re-query. */
  async fix(reasonIndex: number, value: unknown): Promise<void> {
    await this.acknowledgeReason(reasonIndex, "FIX", value);
  }

  /** Accept the current best guess behind one reason, then re-query. */
  async approve(reasonIndex: number): Promise<void> {
    await this.acknowledgeReason(reasonIndex, "APPROVE", undefined);
  }

  private async acknowledgeReason(
    reasonIndex: number,
    action: "FIX" | "APPROVE",
    value: unknown,
  ): Promise<void> {
    const panel = this.state.panel;
    if (!panel) {
      return;
    }
    const reason = panel.view.reasons[reasonIndex];
    if (!reason || !reason.target) {
      this.fail(new Error("this reason has no repair to acknowledge"));
      return;
    }
    const { lens, args } = reason.target;
    try {
      await this.api.acknowledge({
        lens,
        var: reason.target.var,
        args,
        action,
        ...(action === "FIX" ? { value } : {}),
      });
    } catch (e) {
      this.fail(e);
      return;
    }
    if (panel.column !== null) {
      this.acknowledged.add(cellKey(panel.marker, panel.column));
    }
    await this.runQuery(this.lastSql, this.lastStrategy);
  }
}
