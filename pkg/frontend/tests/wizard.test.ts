/** Payment wizard: local validation fences, then a real submission. */

import { beforeAll, afterAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { planProblem, rosterProblem } from "../src/flows.js";
import { WizardController, WizardDraft } from "../src/views/wizard.js";
import {
  Backend, approvalStep, fixtureSigner, loginAs, startBackend,
} from "./helpers.js";

let backend: Backend;

beforeAll(async () => {
  backend = await startBackend(1);
}, 60_000);

afterAll(() => backend?.stop());

function draft(partial: Partial<WizardDraft>): WizardDraft {
  return {
    paymentId: "PMT-WIZ-0",
    contractId: "C-100",
    projectId: "P-001",
    scenario: "ProjectProgressPayment",
    mode: "Application",
    amount: 5_000_000,
    plan: [],
    roster: [],
    payee: null,
    approvalChain: [],
    configHash: "",
    ...partial,
  };
}

const account = (holder: string, n: string) => ({
  bank_id: "INSTANT", account_number: n, holder, kind: "Personal",
});

describe("inline validation (no network)", () => {
  it("flags a roster that does not sum to the amount", () => {
    const problem = rosterProblem(
      [
        { worker_id: "W-001", account: account("W-001", "66000157"), amount: 3_000_000 },
        { worker_id: "W-002", account: account("W-002", "66000254"), amount: 2_500_000 },
        { worker_id: "W-003", account: account("W-003", "66000351"), amount: 4_500_000 },
      ],
      9_000_000,
    );
    expect(problem).toMatch(/totals 10000000/);
  });

  it("accepts a conserved roster", () => {
    const problem = rosterProblem(
      [{ worker_id: "W-001", account: account("W-001", "66000157"), amount: 100 }],
      100,
    );
    expect(problem).toBeNull();
  });

  it("flags fixed-only plans that cannot absorb the amount", () => {
    const problem = planProblem(
      [{ beneficiary: "SUB-001", account: account("SUB-001", "33000160"),
         claim: { kind: "fixed", amount: 1_000, priority: 1 } }],
      5_000,
    );
    expect(problem).toMatch(/absorb only 1000/);
  });

  it("keeps submit disabled for a penetrating payment without a plan", () => {
    const api = new ApiClient(backend.base, () => {
      throw new Error("the wizard must not call the API while invalid");
    });
    const controller = new WizardController(
      api, null as never, draft({ mode: "Penetrating", plan: [] }),
    );
    expect(controller.canSubmit()).toBe(false);

    const root = document.createElement("main");
    controller.render(root);
    const button = root.querySelector<HTMLButtonElement>('[data-action="submit"]')!;
    expect(button.disabled).toBe(true);
    const error = root.querySelector('[data-role="inline-error"]')!;
    expect(error.textContent).toMatch(/split plan/);
  });

  it("shows the roster mismatch inline before any API call", async () => {
    let called = false;
    const api = new ApiClient(backend.base, (async () => {
      called = true;
      throw new Error("no network expected");
    }) as unknown as typeof fetch);
    const controller = new WizardController(
      api, null as never,
      draft({
        scenario: "BuilderWages",
        amount: 9_000_000,
        roster: [
          { worker_id: "W-001", account: account("W-001", "66000157"), amount: 3_000_000 },
          { worker_id: "W-002", account: account("W-002", "66000254"), amount: 2_500_000 },
          { worker_id: "W-003", account: account("W-003", "66000351"), amount: 4_500_000 },
        ],
      }),
    );
    await expect(controller.submit()).rejects.toThrow(/totals/);
    expect(called).toBe(false);
    expect(controller.error).toMatch(/totals 10000000/);
  });
});

describe("submission against the live backend", () => {
  it("creates, attaches nothing, submits, and lands InReview", async () => {
    const api = await loginAs(backend.base, "gc-fin");
    const signer = await fixtureSigner("gc-fin");
    const controller = new WizardController(
      api, signer,
      draft({
        paymentId: "PMT-WIZ-1",
        approvalChain: [approvalStep(0, "org", "OWN-001"), approvalStep(1, "government", null)],
        configHash: await backend.configHash(),
      }),
    );
    expect(controller.canSubmit()).toBe(true);
    await controller.submit();
    expect(controller.submitted).toBe(true);

    const listed = await api.payments({ state: "InReview" });
    const ids = listed.payments.map((p) => p["payment_id"]);
    expect(ids).toContain("PMT-WIZ-1");
  }, 30_000);
});
