// @vitest-environment jsdom
/**
 * End-to-end smoke against a real service process.
 *
 * Spawns the Python server, mounts two console sessions in a headless
 * DOM, and drives them through the form elements exactly as a user
 * would: session A posts a 50-credit task, session B claims and submits,
 * session A accepts. The UI must then show "settled 50", an Accepted
 * state badge, and ledger totals identical to GET /ledger/summary.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ConsoleApp } from "../src/app.js";

const PORT = 8493;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let dataDir = "";

async function waitFor(
  check: () => boolean | Promise<boolean>,
  what: string,
  timeoutMs = 10_000,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (await check()) return;
    await new Promise((r) => setTimeout(r, 60));
  }
  throw new Error(`timed out waiting for ${what}`);
}

function click(root: HTMLElement, selector: string): void {
  const node = root.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`no element ${selector}`);
  node.click();
}

function fill(root: HTMLElement, selector: string, value: string): void {
  const node = root.querySelector<HTMLInputElement | HTMLTextAreaElement>(selector);
  if (!node) throw new Error(`no element ${selector}`);
  node.value = value;
}

async function mountSession(
  participant: string,
  kind: "human" | "agent",
  endowment: number,
): Promise<{ app: ConsoleApp; root: HTMLElement }> {
  const root = document.createElement("div");
  document.body.append(root);
  const app = new ConsoleApp(root, BASE, 3_600_000); // poll manually in the test
  await app.start();
  fill(root, "#register-name", participant);
  const kindSelect = root.querySelector<HTMLSelectElement>("#register-kind");
  kindSelect!.value = kind;
  fill(root, "#register-endowment", String(endowment));
  click(root, "#register-submit");
  await waitFor(() => app.store.session !== null, `${participant} session`);
  return { app, root };
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "taskmarket-e2e-"));
  server = spawn(
    "python3",
    ["-m", "taskmarket.server", "--data-dir", dataDir, "--bind", `127.0.0.1:${PORT}`],
    { stdio: "ignore" },
  );
  await waitFor(async () => {
    try {
      const res = await fetch(`${BASE}/ledger/summary`);
      return res.ok;
    } catch {
      return false;
    }
  }, "server readiness", 20_000);
}, 30_000);

afterAll(() => {
  server?.kill();
  if (dataDir) rmSync(dataDir, { recursive: true, force: true });
});

describe("console e2e", () => {
  it("posts, claims, submits, accepts, and reconciles the ledger", async () => {
    const requester = await mountSession("poster", "human", 100);
    const solver = await mountSession("worker", "agent", 0);

    // session A posts a 50-credit task through the form
    fill(requester.root, "#post-intent", "assemble the launch page");
    fill(requester.root, "#post-bounty", "50");
    click(requester.root, "#post-submit");
    await waitFor(
      () => requester.app.store.tasks.some((t) => t.state === "Published"),
      "published task",
    );
    const taskId = requester.app.store.tasks[0].task_id;

    // session B flips to solver view, sees the task after a poll, claims it
    const roleToggle = solver.root.querySelector<HTMLSelectElement>("#role-toggle")!;
    roleToggle.value = "solver";
    roleToggle.dispatchEvent(new Event("change"));
    await solver.app.store.poll();
    click(solver.root, `[data-task="${taskId}"]`);
    await waitFor(
      () => solver.root.querySelector("#action-claim") !== null,
      "claim button",
    );
    click(solver.root, "#action-claim");
    await waitFor(
      () => solver.app.store.selectedTask?.state === "Claimed",
      "claimed state",
    );

    fill(solver.root, "#submit-payload", "the finished launch page");
    click(solver.root, "#action-submit");
    await waitFor(
      () => solver.app.store.selectedTask?.state === "InReview",
      "in-review state",
    );

    // session A polls, opens the task, and accepts from the review panel
    await requester.app.store.poll();
    click(requester.root, `[data-task="${taskId}"]`);
    await waitFor(
      () => requester.root.querySelector("#action-accept") !== null,
      "review panel",
    );
    fill(requester.root, "#review-feedback", "exactly what we needed");
    click(requester.root, "#action-accept");
    await waitFor(
      () => requester.app.store.lastSettled !== null,
      "settlement response",
    );

    // the UI displays "settled 50" and the Accepted state
    const notice = requester.root.querySelector("#notice")!.textContent;
    expect(notice).toContain("settled 50");
    const badge = requester.root.querySelector('#detail [data-state]');
    expect(badge?.getAttribute("data-state")).toBe("Accepted");

    // ledger panel equals GET /ledger/summary, verbatim
    const wire = await (await fetch(`${BASE}/ledger/summary`)).json();
    expect(requester.app.store.summary).toEqual(wire);
    expect(wire.accounts.poster.free).toBe(50);
    expect(wire.accounts.worker.free).toBe(50);
    expect(wire.conserved).toBe(true);
    const totalsText = requester.root.querySelector("#ledger-totals")!.textContent!;
    expect(totalsText).toContain(`total ${wire.total} = endowments ${wire.endowments}`);
    const freeCells = Array.from(
      requester.root.querySelectorAll("#ledger-accounts .free"),
    ).map((n) => n.textContent);
    expect(freeCells).toEqual(
      Object.values(wire.accounts).map((a) => String((a as { free: number }).free)),
    );

    // solver view converges to the same state after its next poll
    await solver.app.store.poll();
    expect(solver.app.store.selectedTask?.state).toBe("Accepted");

    requester.app.stop();
    solver.app.stop();
  }, 30_000);

  it("rejects over-balance postings inline without creating a task", async () => {
    const session = await mountSession("smallfry", "human", 5);
    fill(session.root, "#post-intent", "champagne wishes");
    fill(session.root, "#post-bounty", "500");
    click(session.root, "#post-submit");
    await waitFor(
      () => session.app.store.notice?.kind === "error",
      "inline error",
    );
    expect(session.root.querySelector("#notice")!.textContent).toContain(
      "free balance",
    );
    const before = session.app.store.tasks.length;
    await session.app.store.poll();
    expect(session.app.store.tasks.length).toBe(before);
    session.app.stop();
  }, 20_000);
});
