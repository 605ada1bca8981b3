/**
 * Client-side operation flows: build payloads, sign locally, call the API.
 * These mirror the transaction shapes the ledger expects; nothing here ever
 * sees a private key (the signer keeps it) or trusts the server to sign.
 */

import { ApiClient } from "./api.js";
import { Json } from "./canonical.js";
import {
  LocalSigner,
  reviewDecisionDigest,
  reviewOpDigest,
  submitOpDigest,
} from "./signer.js";

export interface PlanEntry {
  beneficiary: string;
  account: Json;
  claim: { kind: "fixed"; amount: number; priority: number } | { kind: "weighted"; weight: number };
}

export interface RosterEntry {
  worker_id: string;
  name?: string;
  account: Json;
  amount: number;
}

export async function createPayment(
  api: ApiClient, signer: LocalSigner,
  args: {
    paymentId: string; contractId: string; projectId: string;
    scenario: string; mode: string; amount: number;
    payee?: { beneficiary: string; account: Json } | null;
  },
): Promise<void> {
  const { tick, core_height } = await api.time();
  const payload: Json = {
    type: "PaymentCreated",
    tick,
    core_height,
    payment_id: args.paymentId,
    contract_id: args.contractId,
    project_id: args.projectId,
    scenario: args.scenario,
    mode: args.mode,
    amount: args.amount,
    payee: (args.payee ?? null) as Json,
  };
  await api.postEnvelope("/v1/payments", await signer.signTx(payload));
}

export async function attachPlan(
  api: ApiClient, signer: LocalSigner, paymentId: string,
  plan: PlanEntry[] | null, roster: RosterEntry[] | null,
): Promise<void> {
  const { tick, core_height } = await api.time();
  const payload: Json = {
    type: "SplitPlanCommitted",
    tick,
    core_height,
    payment_id: paymentId,
    plan: plan as unknown as Json,
    roster: roster as unknown as Json,
  };
  await api.postEnvelope(`/v1/payments/${paymentId}/plan`, await signer.signTx(payload));
}

export async function submitPayment(
  api: ApiClient, signer: LocalSigner, paymentId: string,
  approvalChain: Json, configHash: string,
): Promise<void> {
  const opDigest = await submitOpDigest(paymentId);
  const challenge = await api.issueChallenge(opDigest);
  const proof: Json = {
    nonce: challenge.nonce,
    issued_tick: challenge.issued_tick,
    operation_digest: opDigest,
    signature: await signer.signChallenge(challenge.nonce, opDigest),
  };
  const { tick, core_height } = await api.time();
  const payload: Json = {
    type: "PaymentSubmitted",
    tick,
    core_height,
    payment_id: paymentId,
    approval_chain: approvalChain,
    config_hash: configHash,
    challenge_proof: proof,
  };
  await api.postEnvelope(`/v1/payments/${paymentId}/submit`, await signer.signTx(payload));
}

export async function reviewPayment(
  api: ApiClient, signer: LocalSigner,
  paymentId: string, stepIndex: number, verdict: "approve" | "reject",
): Promise<string | undefined> {
  const opDigest = await reviewOpDigest(paymentId, stepIndex, verdict);
  const challenge = await api.issueChallenge(opDigest);
  const proof: Json = {
    nonce: challenge.nonce,
    issued_tick: challenge.issued_tick,
    operation_digest: opDigest,
    signature: await signer.signChallenge(challenge.nonce, opDigest),
  };
  const decision = await signer.signDigestHex(
    await reviewDecisionDigest(paymentId, stepIndex, verdict),
  );
  const { tick, core_height } = await api.time();
  const payload: Json = {
    type: "PaymentReviewed",
    tick,
    core_height,
    payment_id: paymentId,
    step_index: stepIndex,
    verdict,
    signature: decision,
    challenge_proof: proof,
  };
  const out = await api.postEnvelope(
    `/v1/payments/${paymentId}/review`, await signer.signTx(payload),
  );
  return out.state;
}

/** Exact client-side conservation checks, run before anything hits the API. */
export function rosterProblem(roster: RosterEntry[], amount: number): string | null {
  if (!roster.length) return "the roster is empty";
  let total = 0;
  for (const entry of roster) {
    if (!Number.isInteger(entry.amount) || entry.amount <= 0) {
      return `${entry.worker_id || "entry"}: amount must be a positive integer of fen`;
    }
    total += entry.amount;
  }
  if (total !== amount) {
    return `roster totals ${total} fen but the application is for ${amount} fen`;
  }
  return null;
}

export function planProblem(plan: PlanEntry[], amount: number): string | null {
  if (!plan.length) return "the split plan is empty";
  const priorities = new Set<number>();
  let fixedTotal = 0;
  let hasWeighted = false;
  for (const entry of plan) {
    if (!entry.beneficiary) return "every entry needs a beneficiary";
    if (entry.claim.kind === "fixed") {
      if (!Number.isInteger(entry.claim.amount) || entry.claim.amount <= 0) {
        return `${entry.beneficiary}: fixed claim must be a positive integer of fen`;
      }
      if (priorities.has(entry.claim.priority)) {
        return "fixed claim priorities must be unique";
      }
      priorities.add(entry.claim.priority);
      fixedTotal += entry.claim.amount;
    } else {
      if (!Number.isInteger(entry.claim.weight) || entry.claim.weight <= 0) {
        return `${entry.beneficiary}: weight must be a positive integer`;
      }
      hasWeighted = true;
    }
  }
  if (!hasWeighted && fixedTotal < amount) {
    return `fixed claims absorb only ${fixedTotal} of ${amount} fen and nothing takes the rest`;
  }
  return null;
}
