/**
 * Payment application wizard: scenario and mode selection, split-plan and
 * wage-roster editors, and exact client-side conservation checks that run
 * before anything is signed or sent. Submit stays disabled until the draft
 * validates.
 */

import { ApiClient } from "../api.js";
import { Json } from "../canonical.js";
import { attachPlan, createPayment, planProblem, rosterProblem, submitPayment,
         PlanEntry, RosterEntry } from "../flows.js";
import { LocalSigner } from "../signer.js";

export const SCENARIOS = [
  "SupplierMaterialPayment",
  "SubcontractPayment",
  "ProjectAdvancePayment",
  "ProjectProgressPayment",
  "ProjectFinalPayment",
  "BuilderWages",
  "DailyReimbursement",
  "StaffLoan",
] as const;

export const MODES = ["Application", "Authorized", "Penetrating"] as const;

export interface WizardDraft {
  paymentId: string;
  contractId: string;
  projectId: string;
  scenario: string;
  mode: string;
  amount: number;
  plan: PlanEntry[];
  roster: RosterEntry[];
  payee: { beneficiary: string; account: Json } | null;
  approvalChain: Json;
  configHash: string;
}

export class WizardController {
  error: string | null = null;
  submitted = false;

  constructor(
    private readonly api: ApiClient,
    private readonly signer: LocalSigner,
    readonly draft: WizardDraft,
  ) {}

  needsRoster(): boolean {
    return this.draft.scenario === "BuilderWages";
  }

  needsPlan(): boolean {
    return !this.needsRoster() && this.draft.mode === "Penetrating";
  }

  /** Inline validation; never touches the network. */
  validate(): string | null {
    const d = this.draft;
    if (!Number.isInteger(d.amount) || d.amount <= 0) {
      return "amount must be a positive integer of fen";
    }
    if (this.needsRoster()) {
      return rosterProblem(d.roster, d.amount);
    }
    if (this.needsPlan()) {
      if (!d.plan.length) return "a penetrating payment needs a split plan";
      return planProblem(d.plan, d.amount);
    }
    return null;
  }

  canSubmit(): boolean {
    return !this.submitted && this.validate() === null;
  }

  /** Create, attach the plan/roster, and submit for review — or refuse
   * locally with an inline error before any API call. */
  async submit(): Promise<void> {
    this.error = this.validate();
    if (this.error !== null) {
      throw new Error(this.error);
    }
    const d = this.draft;
    await createPayment(this.api, this.signer, {
      paymentId: d.paymentId,
      contractId: d.contractId,
      projectId: d.projectId,
      scenario: d.scenario,
      mode: d.mode,
      amount: d.amount,
      payee: d.payee,
    });
    if (this.needsRoster()) {
      await attachPlan(this.api, this.signer, d.paymentId, null, d.roster);
    } else if (this.needsPlan()) {
      await attachPlan(this.api, this.signer, d.paymentId, d.plan, null);
    }
    await submitPayment(this.api, this.signer, d.paymentId, d.approvalChain, d.configHash);
    this.submitted = true;
  }

  render(root: HTMLElement): void {
    root.innerHTML = "";
    const heading = document.createElement("h2");
    heading.textContent = "New payment application";
    root.append(heading);

    const meta = document.createElement("p");
    meta.textContent =
      `${this.draft.scenario} [${this.draft.mode}] on ${this.draft.contractId} — ` +
      `${this.draft.amount} fen`;
    root.append(meta);

    const problem = this.validate();
    if (problem) {
      const error = document.createElement("p");
      error.className = "error";
      error.dataset.role = "inline-error";
      error.textContent = problem;
      root.append(error);
    }

    const submit = document.createElement("button");
    submit.textContent = this.submitted ? "Submitted" : "Sign and submit";
    submit.dataset.action = "submit";
    submit.disabled = !this.canSubmit();
    submit.onclick = () => void this.submit();
    root.append(submit);
  }
}
