"""End-to-end scenario driver.

Runs one payment through its whole life against a seeded deployment, with
scripted variations: the happy path to Confirmed, a reviewer rejection, a
stage-gate refusal, a self-approval attempt, a stale challenge, and a
partial failure with re-release.  Each run returns a transcript of every
transition with transaction ids; any invariant breach flips ok to False.

The full catalog (all scenario x mode combinations plus the scripted
variants) is what the functional acceptance criterion counts.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from .bankgate.banks import BATCH_BANK_SETTLE_TICKS
from .errors import DomainError
from .fixtures import fixture_wallet, org_account, staff_account, wage_roster, wage_total
from .harness import Deployment
from .keys import operation_digest
from .ledger.chain import CORE_CHAIN_ID
from .rules import review_digest, review_op_digest, submit_op_digest

SCENARIO_BINDINGS: Dict[str, dict] = {
    "SupplierMaterialPayment": {"contract": "C-300", "amount": 8_000_000},
    "SubcontractPayment": {"contract": "C-200", "amount": 12_000_000},
    "ProjectAdvancePayment": {"contract": "C-100", "amount": 20_000_000},
    "ProjectProgressPayment": {"contract": "C-100", "amount": 10_000_000},
    "ProjectFinalPayment": {"contract": "C-600", "amount": 15_000_000},
    "BuilderWages": {"contract": "C-400", "amount": wage_total()},
    "DailyReimbursement": {
        "contract": "C-200", "amount": 250_000,
        "initiator_org": "SUB-001", "payee": "STAFF-SUB-1",
    },
    "StaffLoan": {
        "contract": "C-300", "amount": 500_000,
        "initiator_org": "SUP-001", "payee": "STAFF-SUP-1",
    },
}

# Contract C-500 sits on P-002, still at FeasibilityStudy: no scenario may
# start there, which is what the stage-gate script exercises.
STAGE_GATE_CONTRACT = "C-500"

ORG_USERS = {
    "GOV-001": ["gov-rev", "gov-admin"],
    "OWN-001": ["own-fin", "own-admin"],
    "GC-001": ["gc-fin", "gc-pm", "gc-admin"],
    "SUB-001": ["sub-fin", "sub-admin"],
    "SUP-001": ["sup-fin", "sup-admin"],
    "LAB-001": ["lab-fin", "lab-admin"],
}

SCRIPTS = (
    "happy",
    "reject",
    "stage-gate",
    "self-approval",
    "stale-challenge",
    "partial-fail-retry",
)


def breakout_plan() -> List[dict]:
    """Demo penetrating split: one prioritized fixed claim, two weighted."""
    return [
        {
            "beneficiary": "LAB-001",
            "account": org_account("LAB-001"),
            "claim": {"kind": "fixed", "amount": 2_000_000, "priority": 1},
        },
        {
            "beneficiary": "SUB-001",
            "account": org_account("SUB-001"),
            "claim": {"kind": "weighted", "weight": 2},
        },
        {
            "beneficiary": "SUP-001",
            "account": org_account("SUP-001"),
            "claim": {"kind": "weighted", "weight": 1},
        },
    ]


class ScenarioRunner:
    def __init__(self, deployment: Deployment):
        self.d = deployment
        self.wallet = fixture_wallet()

    # -- helpers ------------------------------------------------------------------

    def next_payment_id(self) -> str:
        count = 0
        for chain_id in self.d.network.chain_ids():
            if chain_id == CORE_CHAIN_ID:
                continue
            state = self.d.network.chain(chain_id).state
            count += sum(1 for k in state.keys() if k.startswith("payment/"))
        return f"PMT-{count + 1:04d}"

    def initiator_for(self, scenario: str, mode: str) -> Tuple[str, str]:
        binding = SCENARIO_BINDINGS[scenario]
        contract = self.d.registry.contract(binding["contract"])
        if "initiator_org" in binding:
            org = binding["initiator_org"]
        elif mode == "Application":
            org = contract["party_b"]
        else:
            org = contract["party_a"]
        return ORG_USERS[org][0], org

    def reviewer_for(self, step: dict, initiator: str) -> str:
        if step["kind"] == "government":
            return next(u for u in ORG_USERS["GOV-001"] if u != initiator)
        return next(u for u in ORG_USERS[step["org_id"]] if u != initiator)

    def _challenge(self, user: str, op_digest: str) -> dict:
        issued = self.d.challenges.issue(user, op_digest)
        return self.wallet.challenge_proof(user, issued, op_digest)

    def _submit(self, payment_id: str, actor: str) -> dict:
        proof = self._challenge(actor, submit_op_digest(payment_id))
        return self.d.payments.submit_payment(
            payment_id, actor, self.wallet.signer(actor), proof
        )

    def _review(self, payment_id: str, step_index: int, verdict: str, actor: str) -> dict:
        proof = self._challenge(actor, review_op_digest(payment_id, step_index, verdict))
        signature = self.wallet.sign_digest(
            actor, review_digest(payment_id, step_index, verdict)
        )
        return self.d.payments.review_payment(
            payment_id, step_index, verdict, signature, actor,
            self.wallet.signer(actor), proof,
        )

    def _create(self, payment_id: str, scenario: str, mode: str,
                contract_id: Optional[str] = None) -> str:
        binding = SCENARIO_BINDINGS[scenario]
        actor, _ = self.initiator_for(scenario, mode)
        payee = None
        if "payee" in binding:
            payee = {
                "beneficiary": binding["payee"],
                "account": staff_account(binding["payee"]),
            }
        self.d.payments.create_payment(
            payment_id, contract_id or binding["contract"], scenario, mode,
            binding["amount"], actor, self.wallet.signer(actor), payee=payee,
        )
        return actor

    def _attach(self, payment_id: str, scenario: str, mode: str, actor: str) -> None:
        if scenario == "BuilderWages":
            self.d.payments.attach_roster(
                payment_id, wage_roster(), actor, self.wallet.signer(actor)
            )
        elif mode == "Penetrating":
            self.d.payments.attach_plan(
                payment_id, breakout_plan(), actor, self.wallet.signer(actor)
            )

    def _approve_all(self, payment_id: str, initiator: str, transcript: List[dict],
                     reject_at: Optional[int] = None) -> str:
        payment = self.d.payments.payment(payment_id)
        while payment["state"] == "InReview":
            index = payment["current_step"]
            step = payment["approval_chain"][index]
            reviewer = self.reviewer_for(step, initiator)
            verdict = "reject" if reject_at == index else "approve"
            out = self._review(payment_id, index, verdict, reviewer)
            transcript.append(
                {"op": f"review[{index}]:{verdict}", "by": reviewer,
                 "tx_id": out["tx_id"], "state": out["state"]}
            )
            if verdict == "reject":
                return out["state"]
            payment = self.d.payments.payment(payment_id)
        return payment["state"]

    def _settle(self, payment_id: str, transcript: List[dict], rounds: int = 8) -> str:
        state = self.d.payments.payment(payment_id)["state"]
        for _ in range(rounds):
            if state not in ("Queued", "Disbursing"):
                break
            out = self.d.payments.poll_and_apply(payment_id)
            if out["changed"]:
                transcript.append({"op": "bank-results", "state": out["state"]})
            state = out["state"]
            if state in ("Queued", "Disbursing"):
                self.d.clock.advance(BATCH_BANK_SETTLE_TICKS)
        return state

    # -- scripts -------------------------------------------------------------------

    def run(self, scenario: str, mode: str, script: str = "happy") -> dict:
        if scenario not in SCENARIO_BINDINGS:
            raise DomainError(f"unknown scenario {scenario}")
        if script not in SCRIPTS:
            raise DomainError(f"unknown script {script}")
        payment_id = self.next_payment_id()
        transcript: List[dict] = []
        record = {
            "scenario": scenario, "mode": mode, "script": script,
            "payment_id": payment_id, "steps": transcript, "ok": False,
        }
        try:
            runner = {
                "happy": self._script_happy,
                "reject": self._script_reject,
                "stage-gate": self._script_stage_gate,
                "self-approval": self._script_self_approval,
                "stale-challenge": self._script_stale_challenge,
                "partial-fail-retry": self._script_partial_fail,
            }[script]
            runner(payment_id, scenario, mode, transcript)
            record["ok"] = True
        except DomainError as exc:
            record["error"] = exc.to_dict()
        except AssertionError as exc:
            record["error"] = {"code": "INVARIANT_BREACH", "message": str(exc)}
        self.d.anchor_all_due()
        return record

    def _script_happy(self, payment_id, scenario, mode, transcript):
        actor = self._create(payment_id, scenario, mode)
        transcript.append({"op": "create", "by": actor, "state": "Draft"})
        self._attach(payment_id, scenario, mode, actor)
        self._submit(payment_id, actor)
        transcript.append({"op": "submit", "state": "InReview"})
        state = self._approve_all(payment_id, actor, transcript)
        assert state == "Approved", f"expected Approved, got {state}"
        release = self.d.payments.release_to_bank(payment_id)
        transcript.append(
            {"op": "release", "batch_id": release["batch"]["batch_id"],
             "instructions": len(release["batch"]["instructions"]),
             "accepted": release["ack"]["accepted_count"]}
        )
        state = self._settle(payment_id, transcript)
        assert state == "Confirmed", f"expected Confirmed, got {state}"
        payment = self.d.payments.payment(payment_id)
        total = sum(i["amount"] for i in payment["instructions"])
        assert total == payment["amount"], "instruction amounts do not conserve"
        if scenario == "BuilderWages":
            assert all(
                i["account"]["kind"] == "Personal" for i in payment["instructions"]
            ), "wages must credit personal accounts"
        transcript.append({"op": "confirmed", "state": state})

    def _script_reject(self, payment_id, scenario, mode, transcript):
        actor = self._create(payment_id, scenario, mode)
        transcript.append({"op": "create", "by": actor, "state": "Draft"})
        self._attach(payment_id, scenario, mode, actor)
        self._submit(payment_id, actor)
        transcript.append({"op": "submit", "state": "InReview"})
        state = self._approve_all(payment_id, actor, transcript, reject_at=0)
        assert state == "Rejected", f"expected Rejected, got {state}"
        payment = self.d.payments.payment(payment_id)
        assert payment["instructions"] == [], "rejected payment produced instructions"
        transcript.append({"op": "rejected", "state": state})

    def _script_stage_gate(self, payment_id, scenario, mode, transcript):
        try:
            self._create(payment_id, scenario, mode, contract_id=STAGE_GATE_CONTRACT)
        except DomainError as exc:
            assert exc.code == "STAGE_MISMATCH", f"expected STAGE_MISMATCH, got {exc.code}"
            transcript.append({"op": "create", "refused": exc.code})
            return
        raise AssertionError("creation succeeded at a gated stage")

    def _script_self_approval(self, payment_id, scenario, mode, transcript):
        actor = self._create(payment_id, scenario, mode)
        self._attach(payment_id, scenario, mode, actor)
        self._submit(payment_id, actor)
        transcript.append({"op": "submit", "state": "InReview"})
        try:
            self._review(payment_id, 0, "approve", actor)
        except DomainError as exc:
            assert exc.code == "SELF_APPROVAL", f"expected SELF_APPROVAL, got {exc.code}"
            transcript.append({"op": "review[0]", "refused": exc.code})
            return
        raise AssertionError("initiator approved their own payment")

    def _script_stale_challenge(self, payment_id, scenario, mode, transcript):
        actor = self._create(payment_id, scenario, mode)
        self._attach(payment_id, scenario, mode, actor)
        op_digest = submit_op_digest(payment_id)
        issued = self.d.challenges.issue(actor, op_digest)
        proof = self.wallet.challenge_proof(actor, issued, op_digest)
        self.d.clock.advance(self.d.network.config.challenge_ttl + 1)
        try:
            self.d.payments.submit_payment(
                payment_id, actor, self.wallet.signer(actor), proof
            )
        except DomainError as exc:
            assert exc.code == "CHALLENGE_FAILED", f"expected CHALLENGE_FAILED, got {exc.code}"
            transcript.append({"op": "submit", "refused": exc.code})
            return
        raise AssertionError("stale challenge was accepted")

    def _script_partial_fail(self, payment_id, scenario, mode, transcript):
        actor = self._create(payment_id, scenario, mode)
        self._attach(payment_id, scenario, mode, actor)
        self._submit(payment_id, actor)
        state = self._approve_all(payment_id, actor, transcript)
        assert state == "Approved"
        payment = self.d.payments.payment(payment_id)
        debit_bank = self.d.registry.org(payment["payer_org"])["accounts"][0]["bank_id"]
        victim = self._pick_victim_account(payment_id, scenario)
        self.d.banks[debit_bank].bounce_once.add(victim)
        release = self.d.payments.release_to_bank(payment_id)
        transcript.append({"op": "release", "accepted": release["ack"]["accepted_count"]})
        state = self._settle(payment_id, transcript)
        assert state == "PartiallyFailed", f"expected PartiallyFailed, got {state}"
        failed = self.d.payments.payment(payment_id)["failed_instrs"]
        assert failed, "partial failure recorded no failed instructions"
        transcript.append({"op": "partial-failure", "failed": len(failed)})
        retry = self.d.payments.release_to_bank(payment_id)
        transcript.append({"op": "re-release", "accepted": retry["ack"]["accepted_count"]})
        state = self._settle(payment_id, transcript)
        assert state == "Confirmed", f"expected Confirmed after retry, got {state}"
        transcript.append({"op": "confirmed", "state": state})

    def _pick_victim_account(self, payment_id: str, scenario: str) -> str:
        payment = self.d.payments.payment(payment_id)
        from . import rules

        view = self.d.network.registry_view()
        entries = rules.expected_instructions(payment, view)
        return entries[0]["account"]["account_number"]

    # -- the catalog ------------------------------------------------------------------

    def catalog(self) -> List[Tuple[str, str, str]]:
        cases: List[Tuple[str, str, str]] = []
        for scenario, mode in self.d.approval_config.combos():
            cases.append((scenario, mode, "happy"))
        for scenario, mode in self.d.approval_config.combos():
            cases.append((scenario, mode, "reject"))
        for scenario in SCENARIO_BINDINGS:
            mode = self.d.approval_config.allowed_modes(scenario)[0]
            cases.append((scenario, mode, "stage-gate"))
            cases.append((scenario, mode, "self-approval"))
            cases.append((scenario, mode, "stale-challenge"))
        cases.append(("BuilderWages", "Penetrating", "partial-fail-retry"))
        cases.append(("DailyReimbursement", "Application", "partial-fail-retry"))
        return cases

    def run_catalog(self) -> dict:
        transcripts = [self.run(s, m, script) for s, m, script in self.catalog()]
        self.d.datahub.ingest()
        return {
            "cases": len(transcripts),
            "passed": sum(1 for t in transcripts if t["ok"]),
            "failed": sum(1 for t in transcripts if not t["ok"]),
            "transcripts": transcripts,
        }
