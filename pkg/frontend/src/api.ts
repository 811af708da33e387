/**
 * Typed client for the taskmarket HTTP/JSON API.
 *
 * Every mutating call carries the session's bearer token. Errors are
 * surfaced as ApiError carrying the kernel's machine-readable code
 * verbatim so the UI can render it unmodified.
 */

export const TASK_STATES = [
  "Published",
  "Claimed",
  "InReview",
  "Accepted",
  "Rejected",
  "FinallyRejected",
  "Cancelled",
] as const;

export type TaskState = (typeof TASK_STATES)[number];

export interface ReviewRecordView {
  reviewer: string;
  verdict: "accept" | "reject";
  feedback: string;
  final: boolean;
  at: number;
}

export interface DeliverableView {
  deliverable_id: string;
  payload_digest: string;
  payload_uri: string;
  submitted_by: string;
  evidence: string[];
}

export interface TaskView {
  task_id: string;
  intent: string;
  requester: string;
  bounty: number;
  state: TaskState;
  claimant: string | null;
  parent: string | null;
  plan: string[];
  deliverable: DeliverableView | null;
  review_history: ReviewRecordView[];
  used_skills: string[];
  consulted_assets: string[];
}

export interface AccountView {
  kind: string;
  free: number;
  locked: number;
}

export interface LedgerSummary {
  accounts: Record<string, AccountView>;
  open_escrows: unknown[];
  mode: "fee" | "mint";
  free: number;
  locked: number;
  open_escrow: number;
  total: number;
  endowments: number;
  minted: number;
  conserved: boolean;
}

export interface LedgerEntryView {
  seq: number;
  kind: string;
  debit: string;
  credit: string;
  amount: number;
  task: string | null;
  skill: string | null;
}

export interface AccountDetail {
  participant: string;
  kind: string;
  free: number;
  locked: number;
  entries: LedgerEntryView[];
}

export interface AssetMetricsView {
  success_count: number;
  failure_count: number;
  invocation_count: number;
  latency_sum_ms: number;
  latency_samples: number;
  acceptance_hits: number;
}

export interface AssetView {
  asset_id: string;
  name: string;
  version: number;
  kind: "skill" | "workflow" | "trace" | "experience";
  creator: string;
  origin_task: string;
  status: "candidate" | "admitted" | "rejected";
  metrics: AssetMetricsView;
  content_digest: string;
}

export interface LineageStep {
  asset: string;
  relation: string;
  depth: number;
}

export interface ScoredAsset {
  asset: string;
  score: number;
}

export interface EventView {
  seq: number;
  at: number;
  actor: string;
  command: { type: string; [key: string]: unknown };
}

export interface RegisterResponse {
  event_seq: number;
  account: { participant: string; kind: string; free: number; locked: number };
  token: string;
}

export interface ReviewResponse {
  event_seq: number;
  task: TaskView;
  settled: number;
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class MarketApi {
  constructor(
    readonly baseUrl: string,
    private token: string | null = null,
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError("NetworkError", String(err), 0);
    }
    if (!response.ok) {
      let code = `HTTP${response.status}`;
      let message = response.statusText;
      try {
        const payload = await response.json();
        if (payload?.error?.code) {
          code = payload.error.code;
          message = payload.error.message ?? message;
        } else if (payload?.detail) {
          message = String(payload.detail);
        }
      } catch {
        /* non-JSON error body: keep the HTTP status */
      }
      throw new ApiError(code, message, response.status);
    }
    return (await response.json()) as T;
  }

  register(participant: string, kind: "human" | "agent", endowment: number) {
    return this.request<RegisterResponse>("POST", "/participants", {
      participant,
      kind,
      endowment,
    });
  }

  listTasks(state?: TaskState): Promise<TaskView[]> {
    const query = state ? `?state=${encodeURIComponent(state)}` : "";
    return this.request<TaskView[]>("GET", `/tasks${query}`);
  }

  getTask(taskId: string): Promise<TaskView> {
    return this.request<TaskView>("GET", `/tasks/${encodeURIComponent(taskId)}`);
  }

  publishTask(body: {
    intent: string;
    bounty: number;
    parent?: string;
    task_id?: string;
  }): Promise<{ event_seq: number; task: TaskView }> {
    return this.request("POST", "/tasks", body);
  }

  claimTask(taskId: string): Promise<{ event_seq: number; task: TaskView }> {
    return this.request("POST", `/tasks/${encodeURIComponent(taskId)}/claim`);
  }

  submitDeliverable(
    taskId: string,
    body: {
      payload: string;
      used_skills?: string[];
      consulted?: string[];
      evidence?: string[];
    },
  ): Promise<{ event_seq: number; task: TaskView }> {
    return this.request("POST", `/tasks/${encodeURIComponent(taskId)}/submit`, body);
  }

  review(
    taskId: string,
    body: { verdict: "accept" | "reject"; feedback: string; final: boolean },
  ): Promise<ReviewResponse> {
    return this.request("POST", `/tasks/${encodeURIComponent(taskId)}/review`, body);
  }

  cancelTask(taskId: string): Promise<{ event_seq: number; task: TaskView }> {
    return this.request("POST", `/tasks/${encodeURIComponent(taskId)}/cancel`);
  }

  decompose(
    taskId: string,
    subplans: { intent: string; bounty: number }[],
  ): Promise<{ event_seq: number; children: TaskView[] }> {
    return this.request("POST", `/tasks/${encodeURIComponent(taskId)}/decompose`, {
      subplans,
    });
  }

  listAssets(status?: string): Promise<AssetView[]> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.request<AssetView[]>("GET", `/assets${query}`);
  }

  lineage(assetId: string): Promise<LineageStep[]> {
    return this.request<LineageStep[]>(
      "GET",
      `/assets/${encodeURIComponent(assetId)}/lineage`,
    );
  }

  scores(ids?: string[]): Promise<ScoredAsset[]> {
    const query = ids?.length ? `?ids=${ids.map(encodeURIComponent).join(",")}` : "";
    return this.request<ScoredAsset[]>("GET", `/assets/score${query}`);
  }

  ledgerSummary(): Promise<LedgerSummary> {
    return this.request<LedgerSummary>("GET", "/ledger/summary");
  }

  ledgerAccount(participant: string): Promise<AccountDetail> {
    return this.request<AccountDetail>(
      "GET",
      `/ledger/${encodeURIComponent(participant)}`,
    );
  }

  events(fromSeq: number): Promise<EventView[]> {
    return this.request<EventView[]>("GET", `/events?from=${fromSeq}`);
  }
}
