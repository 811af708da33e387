/**
 * Console state: one session, cached API responses, and a polling
 * cursor over the kernel event stream.
 *
 * The store never computes economic values; every number it holds came
 * out of an API response unchanged (thin-client rule).
 */

import {
  AccountDetail,
  ApiError,
  AssetView,
  LedgerSummary,
  LineageStep,
  MarketApi,
  ScoredAsset,
  TaskState,
  TaskView,
} from "./api.js";

export type RoleView = "requester" | "solver";

export interface Session {
  participant: string;
  kind: string;
  token: string;
  role: RoleView;
}

export interface BoardFilter {
  state: TaskState | "";
  minBounty: number | null;
  maxBounty: number | null;
  topLevelOnly: boolean;
}

export interface Notice {
  kind: "info" | "error";
  text: string;
}

export class ConsoleStore {
  session: Session | null = null;
  tasks: TaskView[] = [];
  selectedTaskId: string | null = null;
  summary: LedgerSummary | null = null;
  account: AccountDetail | null = null;
  assets: AssetView[] = [];
  scores: ScoredAsset[] = [];
  lineages: Record<string, LineageStep[]> = {};
  filter: BoardFilter = { state: "", minBounty: null, maxBounty: null, topLevelOnly: false };
  notice: Notice | null = null;
  lastSettled: number | null = null;
  private eventCursor = 1;
  private listeners: (() => void)[] = [];

  constructor(readonly api: MarketApi) {}

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  // -- session ------------------------------------------------------------

  async register(participant: string, kind: "human" | "agent", endowment: number) {
    const res = await this.api.register(participant, kind, endowment);
    this.api.setToken(res.token);
    this.session = { participant, kind, token: res.token, role: "requester" };
    await this.refreshAll();
  }

  attachSession(participant: string, kind: string, token: string): void {
    this.api.setToken(token);
    this.session = { participant, kind, token, role: "requester" };
  }

  setRole(role: RoleView): void {
    if (this.session) {
      this.session.role = role;
      this.emit();
    }
  }

  // -- data ---------------------------------------------------------------

  get selectedTask(): TaskView | null {
    return this.tasks.find((t) => t.task_id === this.selectedTaskId) ?? null;
  }

  get freeBalance(): number | null {
    if (!this.session || !this.summary) return null;
    return this.summary.accounts[this.session.participant]?.free ?? null;
  }

  visibleTasks(): TaskView[] {
    return this.tasks.filter((t) => {
      if (this.filter.state && t.state !== this.filter.state) return false;
      if (this.filter.minBounty !== null && t.bounty < this.filter.minBounty) return false;
      if (this.filter.maxBounty !== null && t.bounty > this.filter.maxBounty) return false;
      if (this.filter.topLevelOnly && t.parent !== null) return false;
      return true;
    });
  }

  setFilter(patch: Partial<BoardFilter>): void {
    this.filter = { ...this.filter, ...patch };
    this.emit();
  }

  select(taskId: string | null): void {
    this.selectedTaskId = taskId;
    this.emit();
  }

  setNotice(notice: Notice | null): void {
    this.notice = notice;
    this.emit();
  }

  async refreshAll(): Promise<void> {
    const [tasks, summary, assets] = await Promise.all([
      this.api.listTasks(),
      this.api.ledgerSummary(),
      this.api.listAssets("admitted"),
    ]);
    this.tasks = tasks;
    this.summary = summary;
    this.assets = assets;
    const skills = assets.filter((a) => a.kind === "skill").map((a) => a.asset_id);
    this.scores = skills.length ? await this.api.scores(skills) : [];
    this.lineages = {};
    for (const asset of assets) {
      this.lineages[asset.asset_id] = await this.api.lineage(asset.asset_id);
    }
    if (this.session) {
      this.account = await this.api.ledgerAccount(this.session.participant);
    }
    this.emit();
  }

  /** Poll the event stream; refresh caches only when something new landed. */
  async poll(): Promise<boolean> {
    const events = await this.api.events(this.eventCursor);
    if (events.length === 0) return false;
    this.eventCursor = events[events.length - 1].seq + 1;
    await this.refreshAll();
    return true;
  }

  // -- actions (each surfaces ApiError as an inline notice) ----------------

  async runAction<T>(action: () => Promise<T>): Promise<T | null> {
    try {
      const result = await action();
      this.notice = null;
      await this.refreshAll();
      return result;
    } catch (err) {
      if (err instanceof ApiError) {
        this.setNotice({ kind: "error", text: `${err.code}: ${err.message}` });
        if (err.code === "TaskNotInReview" || err.code === "TaskNotClaimable") {
          await this.refreshAll(); // stale view: the task moved on
        }
        return null;
      }
      throw err;
    }
  }

  async postTask(intent: string, bounty: number): Promise<TaskView | null> {
    if (!intent.trim()) {
      this.setNotice({ kind: "error", text: "intent must not be empty" });
      return null;
    }
    const free = this.freeBalance;
    if (free !== null && bounty > free) {
      this.setNotice({
        kind: "error",
        text: `bounty ${bounty} exceeds your free balance of ${free}`,
      });
      return null;
    }
    const res = await this.runAction(() => this.api.publishTask({ intent, bounty }));
    return res ? res.task : null;
  }

  async claim(taskId: string): Promise<TaskView | null> {
    const res = await this.runAction(() => this.api.claimTask(taskId));
    return res ? res.task : null;
  }

  async submit(taskId: string, payload: string, evidence: string[]): Promise<TaskView | null> {
    const res = await this.runAction(() =>
      this.api.submitDeliverable(taskId, { payload, evidence }),
    );
    return res ? res.task : null;
  }

  async reviewTask(
    taskId: string,
    verdict: "accept" | "reject",
    feedback: string,
    final: boolean,
  ): Promise<number | null> {
    const res = await this.runAction(() =>
      this.api.review(taskId, { verdict, feedback, final }),
    );
    if (res === null) return null;
    this.lastSettled = verdict === "accept" ? res.settled : null;
    if (verdict === "accept") {
      this.setNotice({ kind: "info", text: `settled ${res.settled}` });
    }
    return res.settled;
  }

  async cancel(taskId: string): Promise<TaskView | null> {
    const res = await this.runAction(() => this.api.cancelTask(taskId));
    return res ? res.task : null;
  }
}

/** Breadcrumb like "fork <- derives <- base" out of a lineage response. */
export function lineageBreadcrumb(assetId: string, steps: LineageStep[]): string {
  const parts = [assetId];
  for (const step of steps) {
    parts.push(`<- ${step.relation} <- ${step.asset}`);
  }
  return parts.join(" ");
}
