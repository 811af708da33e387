/**
 * Console application: binds a ConsoleStore to a root element and keeps
 * the board fresh by polling the kernel event stream.
 */

import { MarketApi } from "./api.js";
import { ConsoleStore } from "./state.js";
import { render } from "./views.js";

export class ConsoleApp {
  readonly store: ConsoleStore;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    readonly root: HTMLElement,
    apiBase: string,
    readonly pollIntervalMs = 1500,
  ) {
    this.store = new ConsoleStore(new MarketApi(apiBase));
    this.store.subscribe(() => render(this.root, this.store));
  }

  async start(): Promise<void> {
    render(this.root, this.store);
    this.timer = setInterval(() => {
      void this.store.poll().catch(() => {
        /* transient poll failures surface on the next action */
      });
    }, this.pollIntervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
