// Controller: wires the gateway client to the DOM, owns polling, paging and
// the single-in-flight-decision rule.

import { GatewayClient, GatewayError } from "./api.js";
import { nextPollDelay, paginate, sortQueue } from "./model.js";
import type { ItemDetail, QueueItem } from "./types.js";
import { renderBanner, renderDetail, renderQueue } from "./views.js";

export class ConsoleApp {
  private items: QueueItem[] = [];
  private page = 0;
  private current: ItemDetail | null = null;
  private decisionInFlight = false;
  private pollFailures = 0;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private root: HTMLElement,
    private client: GatewayClient,
    private moderatorId: string,
  ) {
    root.addEventListener("click", (event) => this.onClick(event));
  }

  async start(): Promise<void> {
    await this.refreshQueue();
    this.schedulePoll();
  }

  private schedulePoll(): void {
    if (this.pollTimer !== null) clearTimeout(this.pollTimer);
    this.pollTimer = setTimeout(async () => {
      if (this.current === null) await this.refreshQueue();
      this.schedulePoll();
    }, nextPollDelay(this.pollFailures));
  }

  async refreshQueue(): Promise<void> {
    try {
      const payload = await this.client.loadQueue("pending");
      this.items = sortQueue(payload.items);
      this.pollFailures = 0;
      if (this.current === null) this.renderQueuePage();
    } catch (error) {
      this.pollFailures += 1;
      if (this.current === null) {
        this.root.innerHTML = renderBanner(describe(error));
      }
    }
  }

  private renderQueuePage(): void {
    const page = paginate(this.items, this.page);
    this.page = page.page;
    this.root.innerHTML = `<h1>Review queue</h1>` + renderQueue(page, Date.now() / 1000);
  }

  async openItem(itemId: string): Promise<void> {
    try {
      const detail = await this.client.getItem(itemId);
      const overlays = await this.client.overlays(itemId);
      this.current = detail;
      const frameUrls = detail.frames.map((_, k) => this.client.frameUrl(itemId, k));
      this.root.innerHTML = renderDetail(detail, overlays.frames, frameUrls);
    } catch (error) {
      this.current = null;
      this.root.innerHTML = renderBanner(describe(error));
    }
  }

  async decide(decision: "confirm" | "override"): Promise<void> {
    if (this.current === null || this.decisionInFlight) return;
    const itemId = this.current.item_id;
    this.decisionInFlight = true;
    this.setActionButtons(false);
    try {
      await this.client.submitDecision(itemId, decision, this.moderatorId);
      await this.openItem(itemId); // server state is the only truth shown
    } catch (error) {
      if (error instanceof GatewayError && error.status === 409) {
        await this.openItem(itemId); // decided elsewhere; show fresh state
      } else {
        this.setActionButtons(true); // network trouble: keep the draft usable
      }
    } finally {
      this.decisionInFlight = false;
    }
  }

  private setActionButtons(enabled: boolean): void {
    for (const button of this.root.querySelectorAll<HTMLButtonElement>(
      ".actions button",
    )) {
      button.disabled = !enabled;
    }
  }

  private async onClick(event: Event): Promise<void> {
    const target = event.target as HTMLElement;
    const action = target.dataset.action;
    if (action === "retry") {
      await this.refreshQueue();
      return;
    }
    if (action === "back") {
      this.current = null;
      this.renderQueuePage();
      await this.refreshQueue();
      return;
    }
    if (action === "prev" || action === "next") {
      this.page += action === "next" ? 1 : -1;
      this.renderQueuePage();
      return;
    }
    if (action === "confirm" || action === "override") {
      await this.decide(action);
      return;
    }
    const row = target.closest<HTMLElement>("tr[data-item]");
    if (row?.dataset.item) {
      await this.openItem(row.dataset.item);
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof GatewayError) {
    return `gateway error ${error.status} (${error.code}): ${error.message}`;
  }
  return `service unreachable: ${String(error)}`;
}
