/**
 * The reviewer's inbox: pending approval steps this user is qualified to
 * decide. Approving or rejecting signs the decision locally (challenge proof
 * plus review signature) and calls the API; a CONFLICT from a racing
 * reviewer refreshes the list without recording anything.
 */

import { ApiClient, ApiError, InboxItem } from "../api.js";
import { fenToYuan } from "../format.js";
import { reviewPayment } from "../flows.js";
import { LocalSigner } from "../signer.js";

export class WorkbenchController {
  items: InboxItem[] = [];
  lastNotice = "";

  constructor(
    private readonly api: ApiClient,
    private readonly signer: LocalSigner,
    private readonly root: HTMLElement,
  ) {}

  async refresh(): Promise<void> {
    this.items = (await this.api.inbox()).items;
    this.render();
  }

  async decide(paymentId: string, stepIndex: number, verdict: "approve" | "reject"):
      Promise<string> {
    try {
      const state = await reviewPayment(this.api, this.signer, paymentId, stepIndex, verdict);
      this.lastNotice = `${paymentId}: ${verdict} recorded, payment is ${state}`;
    } catch (error) {
      if (error instanceof ApiError && error.code === "CONFLICT") {
        this.lastNotice = `${paymentId}: another reviewer decided first`;
      } else {
        this.lastNotice = error instanceof Error ? error.message : String(error);
        await this.refresh();
        throw error;
      }
    }
    await this.refresh();
    return this.lastNotice;
  }

  render(): void {
    this.root.innerHTML = "";
    const heading = document.createElement("h2");
    heading.textContent = `Workbench — ${this.items.length} pending`;
    this.root.append(heading);

    if (this.lastNotice) {
      const notice = document.createElement("p");
      notice.className = "notice";
      notice.textContent = this.lastNotice;
      this.root.append(notice);
    }

    const list = document.createElement("ul");
    list.className = "inbox";
    for (const item of this.items) {
      const entry = document.createElement("li");
      entry.dataset.paymentId = item.payment_id;
      const summary = document.createElement("span");
      summary.textContent =
        `${item.payment_id} · ${item.scenario} [${item.mode}] · ` +
        `¥ ${fenToYuan(item.amount)} · step ${item.step_index} · ` +
        `waiting ${item.age_ticks} ticks`;
      const approve = document.createElement("button");
      approve.textContent = "Approve";
      approve.dataset.action = "approve";
      approve.onclick = () => void this.decide(item.payment_id, item.step_index, "approve");
      const reject = document.createElement("button");
      reject.textContent = "Reject";
      reject.dataset.action = "reject";
      reject.onclick = () => void this.decide(item.payment_id, item.step_index, "reject");
      entry.append(summary, approve, reject);
      list.append(entry);
    }
    this.root.append(list);
  }
}
