/**
 * DOM rendering for the console. Plain createElement calls, re-rendered
 * wholesale on every store change; fine at desk scale.
 *
 * State badges render only the seven canonical kernel state names; an
 * unknown state is a bug and renders as "?" so it cannot masquerade.
 */

import { TASK_STATES, TaskView } from "./api.js";
import { ConsoleStore, lineageBreadcrumb } from "./state.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function stateBadge(state: string): HTMLElement {
  const known = (TASK_STATES as readonly string[]).includes(state);
  return el("span", { class: `badge state-${state}`, "data-state": state }, [
    known ? state : "?",
  ]);
}

function taskRow(store: ConsoleStore, task: TaskView): HTMLElement {
  const row = el("tr", { class: "task-row", "data-task": task.task_id }, [
    el("td", {}, [task.task_id]),
    el("td", { class: "intent" }, [task.intent]),
    el("td", { class: "bounty" }, [String(task.bounty)]),
    el("td", {}, [stateBadge(task.state)]),
    el("td", {}, [task.claimant ?? ""]),
    el("td", {}, [task.parent ?? ""]),
  ]);
  row.addEventListener("click", () => store.select(task.task_id));
  return row;
}

function boardPanel(store: ConsoleStore): HTMLElement {
  const filter = store.filter;
  const stateSelect = el("select", { id: "filter-state" }, [
    el("option", { value: "" }, ["any state"]),
    ...TASK_STATES.map((s) =>
      el("option", { value: s, ...(filter.state === s ? { selected: "" } : {}) }, [s]),
    ),
  ]);
  stateSelect.addEventListener("change", () =>
    store.setFilter({ state: stateSelect.value as never }),
  );
  const minBounty = el("input", {
    id: "filter-min",
    type: "number",
    placeholder: "min bounty",
    value: filter.minBounty === null ? "" : String(filter.minBounty),
  });
  minBounty.addEventListener("change", () =>
    store.setFilter({ minBounty: minBounty.value === "" ? null : Number(minBounty.value) }),
  );
  const maxBounty = el("input", {
    id: "filter-max",
    type: "number",
    placeholder: "max bounty",
    value: filter.maxBounty === null ? "" : String(filter.maxBounty),
  });
  maxBounty.addEventListener("change", () =>
    store.setFilter({ maxBounty: maxBounty.value === "" ? null : Number(maxBounty.value) }),
  );
  const topOnly = el("input", { id: "filter-top", type: "checkbox" }) as HTMLInputElement;
  topOnly.checked = filter.topLevelOnly;
  topOnly.addEventListener("change", () =>
    store.setFilter({ topLevelOnly: topOnly.checked }),
  );

  return el("section", { id: "board", class: "panel" }, [
    el("h2", {}, ["Task board"]),
    el("div", { class: "filters" }, [
      stateSelect,
      minBounty,
      maxBounty,
      el("label", {}, [topOnly, "top-level only"]),
    ]),
    el("table", { class: "tasks" }, [
      el("thead", {}, [
        el("tr", {}, [
          el("th", {}, ["id"]),
          el("th", {}, ["intent"]),
          el("th", {}, ["bounty"]),
          el("th", {}, ["state"]),
          el("th", {}, ["claimant"]),
          el("th", {}, ["parent"]),
        ]),
      ]),
      el("tbody", {}, store.visibleTasks().map((t) => taskRow(store, t))),
    ]),
  ]);
}

function postTaskForm(store: ConsoleStore): HTMLElement {
  const intent = el("input", { id: "post-intent", type: "text", placeholder: "what needs doing" });
  const bounty = el("input", { id: "post-bounty", type: "number", value: "0", min: "0" });
  const button = el("button", { id: "post-submit" }, ["Post task"]);
  button.addEventListener("click", () => {
    void store.postTask(intent.value, Number(bounty.value));
  });
  const free = store.freeBalance;
  return el("section", { id: "post-form", class: "panel" }, [
    el("h2", {}, ["Post a task"]),
    el("p", { class: "hint" }, [
      free === null ? "" : `free balance: ${free}`,
    ]),
    intent,
    bounty,
    button,
  ]);
}

function detailPanel(store: ConsoleStore): HTMLElement {
  const task = store.selectedTask;
  if (!task) {
    return el("section", { id: "detail", class: "panel" }, [
      el("h2", {}, ["Task detail"]),
      el("p", { class: "hint" }, ["select a task from the board"]),
    ]);
  }
  const children = store.tasks.filter((t) => t.parent === task.task_id);
  const reviewRows = task.review_history.map((r) =>
    el("li", { class: "review-record" }, [
      `${r.reviewer}: ${r.verdict}${r.final ? " (final)" : ""} at ${r.at}: ${r.feedback}`,
    ]),
  );
  const body: (Node | string)[] = [
    el("h2", {}, [`Task ${task.task_id}`]),
    el("p", { class: "intent" }, [task.intent]),
    el("p", {}, [
      "bounty ",
      el("strong", { id: "detail-bounty" }, [String(task.bounty)]),
      " | state ",
      stateBadge(task.state),
      ` | requester ${task.requester}`,
      task.claimant ? ` | claimant ${task.claimant}` : "",
    ]),
  ];
  if (children.length) {
    body.push(
      el("h3", {}, ["Plan"]),
      el("ul", { class: "plan" }, children.map((c) =>
        el("li", {}, [`${c.task_id} (${c.bounty}) `, stateBadge(c.state)]),
      )),
    );
  }
  if (task.deliverable) {
    body.push(
      el("h3", {}, ["Deliverable"]),
      el("p", { class: "deliverable" }, [
        el("a", {
          id: "deliverable-link",
          href: `${store.api.baseUrl}/blobs/${task.deliverable.payload_digest}`,
        }, [task.deliverable.payload_uri]),
        ` by ${task.deliverable.submitted_by}`,
      ]),
    );
  }
  if (reviewRows.length) {
    body.push(el("h3", {}, ["Review history"]), el("ul", { id: "review-history" }, reviewRows));
  }
  body.push(actionPanel(store, task));
  return el("section", { id: "detail", class: "panel" }, body);
}

function actionPanel(store: ConsoleStore, task: TaskView): HTMLElement {
  const session = store.session;
  if (!session) return el("div", {});
  const actions: (Node | string)[] = [];

  if (session.role === "solver") {
    if (task.state === "Published" || task.state === "Rejected") {
      const claim = el("button", { id: "action-claim" }, ["Claim"]);
      claim.addEventListener("click", () => void store.claim(task.task_id));
      actions.push(claim);
    }
    if (task.state === "Claimed" && task.claimant === session.participant) {
      const payload = el("textarea", { id: "submit-payload", placeholder: "deliverable payload" });
      const submit = el("button", { id: "action-submit" }, ["Submit deliverable"]);
      submit.addEventListener("click", () =>
        void store.submit(task.task_id, payload.value, []),
      );
      actions.push(payload, submit);
    }
  }

  if (session.role === "requester") {
    if (task.state === "InReview" && task.requester === session.participant) {
      const feedback = el("textarea", { id: "review-feedback", placeholder: "feedback" });
      const finalBox = el("input", { id: "review-final", type: "checkbox" }) as HTMLInputElement;
      const accept = el("button", { id: "action-accept" }, ["Accept"]);
      accept.addEventListener("click", () =>
        void store.reviewTask(task.task_id, "accept", feedback.value, false),
      );
      const reject = el("button", { id: "action-reject" }, ["Reject"]);
      reject.addEventListener("click", () =>
        void store.reviewTask(task.task_id, "reject", feedback.value, finalBox.checked),
      );
      actions.push(
        el("h3", {}, ["Review"]),
        feedback,
        el("label", {}, [finalBox, "final"]),
        accept,
        reject,
      );
    }
    if (task.state === "Published" && task.requester === session.participant) {
      const cancel = el("button", { id: "action-cancel" }, ["Cancel task"]);
      cancel.addEventListener("click", () => void store.cancel(task.task_id));
      actions.push(cancel);
    }
  }

  return el("div", { id: "actions", class: "actions" }, actions);
}

function ledgerPanel(store: ConsoleStore): HTMLElement {
  const summary = store.summary;
  const account = store.account;
  const rows = Object.entries(summary?.accounts ?? {}).map(([pid, acc]) =>
    el("tr", {}, [
      el("td", {}, [pid]),
      el("td", { class: "free" }, [String(acc.free)]),
      el("td", { class: "locked" }, [String(acc.locked)]),
    ]),
  );
  const entries = (account?.entries ?? []).slice(-12).map((entry) =>
    el("li", {}, [
      `#${entry.seq} ${entry.kind}: ${entry.debit} -> ${entry.credit} (${entry.amount})`,
    ]),
  );
  return el("section", { id: "ledger", class: "panel" }, [
    el("h2", {}, ["Ledger"]),
    el("p", { id: "ledger-totals" }, [
      summary
        ? `total ${summary.total} = endowments ${summary.endowments}` +
          (summary.minted ? ` + minted ${summary.minted}` : "") +
          (summary.conserved ? " (conserved)" : " (NOT CONSERVED)")
        : "loading",
    ]),
    el("table", { class: "accounts" }, [
      el("thead", {}, [
        el("tr", {}, [
          el("th", {}, ["participant"]),
          el("th", {}, ["free"]),
          el("th", {}, ["locked"]),
        ]),
      ]),
      el("tbody", { id: "ledger-accounts" }, rows),
    ]),
    el("h3", {}, ["Recent entries"]),
    el("ul", { id: "ledger-entries" }, entries),
  ]);
}

function assetsPanel(store: ConsoleStore): HTMLElement {
  const scoreByAsset = new Map(store.scores.map((s) => [s.asset, s.score] as const));
  const rows = store.assets.map((asset) => {
    const crumb = lineageBreadcrumb(asset.asset_id, store.lineages[asset.asset_id] ?? []);
    const score = scoreByAsset.get(asset.asset_id);
    return el("li", { class: "asset", "data-asset": asset.asset_id }, [
      el("strong", {}, [asset.asset_id]),
      ` [${asset.kind}] by ${asset.creator}`,
      ` | invocations ${asset.metrics.invocation_count}`,
      ` (${asset.metrics.success_count} ok)`,
      score === undefined ? "" : ` | score ${score.toFixed(4)}`,
      el("div", { class: "lineage" }, [crumb]),
    ]);
  });
  return el("section", { id: "assets", class: "panel" }, [
    el("h2", {}, ["Assets"]),
    el("ul", { id: "asset-list" }, rows),
  ]);
}

export function render(root: HTMLElement, store: ConsoleStore): void {
  root.replaceChildren();
  const session = store.session;
  const header = el("header", {}, [
    el("h1", {}, ["taskmarket console"]),
    session
      ? el("div", { id: "session" }, [
          `${session.participant} (${session.kind}) as `,
          roleToggle(store),
        ])
      : el("div", { id: "session" }, ["no session"]),
  ]);
  const notice = store.notice
    ? el("div", { id: "notice", class: `notice ${store.notice.kind}` }, [store.notice.text])
    : el("div", { id: "notice", class: "notice empty" });
  root.append(header, notice);
  if (!session) {
    root.append(registerForm(store));
    return;
  }
  const main = el("main", {}, [
    el("div", { class: "column" }, [
      ...(session.role === "requester" ? [postTaskForm(store)] : []),
      boardPanel(store),
    ]),
    el("div", { class: "column" }, [detailPanel(store), ledgerPanel(store), assetsPanel(store)]),
  ]);
  root.append(main);
}

function roleToggle(store: ConsoleStore): HTMLElement {
  const select = el("select", { id: "role-toggle" }, [
    el("option", { value: "requester" }, ["requester"]),
    el("option", { value: "solver" }, ["solver"]),
  ]) as HTMLSelectElement;
  select.value = store.session?.role ?? "requester";
  select.addEventListener("change", () =>
    store.setRole(select.value === "solver" ? "solver" : "requester"),
  );
  return select;
}

function registerForm(store: ConsoleStore): HTMLElement {
  const name = el("input", { id: "register-name", type: "text", placeholder: "participant id" });
  const kind = el("select", { id: "register-kind" }, [
    el("option", { value: "human" }, ["human"]),
    el("option", { value: "agent" }, ["agent"]),
  ]) as HTMLSelectElement;
  const endowment = el("input", { id: "register-endowment", type: "number", value: "0" });
  const button = el("button", { id: "register-submit" }, ["Join"]);
  button.addEventListener("click", () => {
    void store
      .register(
        name.value,
        kind.value === "agent" ? "agent" : "human",
        Number(endowment.value),
      )
      .catch((err) =>
        store.setNotice({ kind: "error", text: String(err?.code ?? err) }),
      );
  });
  return el("section", { id: "register", class: "panel" }, [
    el("h2", {}, ["Join the marketplace"]),
    name,
    kind,
    endowment,
    button,
  ]);
}
