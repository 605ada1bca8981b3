"""Payment workflow service.

Drives a payment application through its life: Draft -> InReview (approval
steps in order) -> Approved -> Queued -> Disbursing -> Confirmed, with
Rejected and PartiallyFailed as the unhappy paths.  Client-side signatures
and challenge proofs travel in; this service never holds user keys.  The
platform's own identity signs exactly two payload kinds: disbursement
issuance (the deterministic consequence of a completed approval chain) and
recorded bank results.
"""

from __future__ import annotations

from typing import Callable, List, Optional, Tuple

from .. import events as ev
from .. import rules
from ..errors import (
    ApprovalChainBroken,
    ChallengeFailed,
    MissingPlan,
    UnknownPayment,
    WrongState,
    error_for_code,
)
from ..ledger.chain import CORE_CHAIN_ID, build_tx, payment_chain_id
from ..ledger.network import LedgerNetwork

Signer = Callable[[bytes], str]


class PaymentService:
    def __init__(self, network: LedgerNetwork, clock, challenge_service,
                 gateway, system_user: str, system_signer: Signer):
        self.network = network
        self.clock = clock
        self.challenges = challenge_service
        self.gateway = gateway
        self.system_user = system_user
        self.system_signer = system_signer
        self._chain_of_payment = {}

    # -- plumbing ---------------------------------------------------------------

    def locate(self, payment_id: str) -> Tuple[str, dict]:
        """(chain_id, payment record) for a payment anywhere in the system."""
        cached = self._chain_of_payment.get(payment_id)
        if cached is not None:
            record = self.network.chain(cached).state.get(f"payment/{payment_id}")
            if record is not None:
                return cached, record
        for chain_id in self.network.chain_ids():
            if chain_id == CORE_CHAIN_ID:
                continue
            record = self.network.chain(chain_id).state.get(f"payment/{payment_id}")
            if record is not None:
                self._chain_of_payment[payment_id] = chain_id
                return chain_id, record
        raise UnknownPayment(f"payment {payment_id} unknown")

    def _commit(self, chain_id: str, payload: dict, actor: str, signer: Signer) -> dict:
        tx = build_tx(payload, actor, signer)
        return self.submit_envelope(chain_id, tx)

    def submit_envelope(self, chain_id: str, tx: dict) -> dict:
        result = self.network.submit_and_commit(chain_id, tx)
        if not result.applied:
            raise error_for_code(result.error, f"transaction rejected: {result.error}")
        return {"tx_id": tx["tx_id"], "height": self.network.chain(chain_id).tip}

    def _core_height(self) -> int:
        return self.network.core.tip

    # -- lifecycle ---------------------------------------------------------------

    def create_payment(self, payment_id: str, contract_id: str, scenario: str, mode: str,
                       amount: int, actor: str, signer: Signer,
                       payee: Optional[dict] = None) -> dict:
        contract = self.network.core.state.get(f"contract/{contract_id}")
        if contract is None:
            raise error_for_code("UNKNOWN_CONTRACT", f"contract {contract_id} unknown")
        project_id = contract["project_id"]
        chain_id = payment_chain_id(project_id)
        payload = ev.payment_created(
            self.clock.tick(), self._core_height(), payment_id, contract_id,
            project_id, scenario, mode, amount, payee=payee,
        )
        out = self._commit(chain_id, payload, actor, signer)
        self._chain_of_payment[payment_id] = chain_id
        return out

    def attach_plan(self, payment_id: str, plan: List[dict], actor: str, signer: Signer) -> dict:
        chain_id, _ = self.locate(payment_id)
        payload = ev.split_plan_committed(
            self.clock.tick(), self._core_height(), payment_id, plan=plan
        )
        return self._commit(chain_id, payload, actor, signer)

    def attach_roster(self, payment_id: str, roster: List[dict], actor: str, signer: Signer) -> dict:
        chain_id, _ = self.locate(payment_id)
        payload = ev.split_plan_committed(
            self.clock.tick(), self._core_height(), payment_id, roster=roster
        )
        return self._commit(chain_id, payload, actor, signer)

    def submit_payment(self, payment_id: str, actor: str, signer: Signer,
                       challenge_proof: dict) -> dict:
        chain_id, payment = self.locate(payment_id)
        # Live freshness/single-use gate; the recorded proof is re-checked
        # deterministically by the transition function.
        if not self.challenges.verify_and_consume(actor, challenge_proof):
            raise ChallengeFailed("challenge verification failed")
        view = self.network.registry_view()
        contract = view.contract(payment["contract_id"])
        user = view.user(actor)
        config = self.network.approval_config
        chain = rules.resolve_approval_chain(
            config, payment["scenario"], payment["mode"], contract,
            (user or {}).get("org_id"),
        )
        payload = ev.payment_submitted(
            self.clock.tick(), self._core_height(), payment_id, chain,
            config.config_hash, challenge_proof,
        )
        return self._commit(chain_id, payload, actor, signer)

    def review_payment(self, payment_id: str, step_index: int, verdict: str,
                       review_signature: str, actor: str, signer: Signer,
                       challenge_proof: dict) -> dict:
        chain_id, _ = self.locate(payment_id)
        if not self.challenges.verify_and_consume(actor, challenge_proof):
            raise ChallengeFailed("challenge verification failed")
        payload = ev.payment_reviewed(
            self.clock.tick(), self._core_height(), payment_id, step_index,
            verdict, review_signature, challenge_proof,
        )
        out = self._commit(chain_id, payload, actor, signer)
        out["state"] = self.payment(payment_id)["state"]
        return out

    def release_to_bank(self, payment_id: str) -> dict:
        """Turn a completed approval chain into a bank batch; nothing else can."""
        chain_id, payment = self.locate(payment_id)
        if payment["state"] not in ("Approved", "PartiallyFailed"):
            raise WrongState(f"payment is {payment['state']}, not releasable")
        ordinal = payment["release_count"]
        view = self.network.registry_view()
        if ordinal == 0:
            entries = rules.expected_instructions(payment, view)
            instructions = [
                {
                    "instr_id": rules.instruction_id(
                        payment_id, e["account"]["account_number"], i
                    ),
                    "ordinal": i,
                    "beneficiary": e["beneficiary"],
                    "account": e["account"],
                    "amount": e["amount"],
                    "purpose": f"{payment['scenario']}/{payment_id}",
                }
                for i, e in enumerate(entries)
            ]
        else:
            failed = set(payment["failed_instrs"])
            instructions = [i for i in payment["instructions"] if i["instr_id"] in failed]
        debit = view.first_account(payment["payer_org"])
        if debit is None:
            raise error_for_code("NO_ACCOUNT", f"payer {payment['payer_org']} has no account")
        batch_id = rules.batch_id_for(payment_id, ordinal)
        payload = ev.disbursement_issued(
            self.clock.tick(), self._core_height(), payment_id, ordinal,
            batch_id, debit["bank_id"], debit, instructions,
        )
        self._commit(chain_id, payload, self.system_user, self.system_signer)
        batch = {
            "batch_id": batch_id,
            "bank_id": debit["bank_id"],
            "debit_account": debit,
            "instructions": instructions,
        }
        ack = self.gateway.submit_batch(debit["bank_id"], batch)
        return {"batch": batch, "ack": ack}

    def poll_and_apply(self, payment_id: str) -> dict:
        """Poll the bank for the active batch and record any status changes."""
        chain_id, payment = self.locate(payment_id)
        if payment["state"] not in ("Queued", "Disbursing"):
            return {"state": payment["state"], "changed": False}
        ordinal = payment["release_count"] - 1
        batch_id = rules.batch_id_for(payment_id, ordinal)
        view = self.network.registry_view()
        debit = view.first_account(payment["payer_org"])
        statuses = self.gateway.poll_batch(debit["bank_id"], batch_id)
        live = {
            row["instr_id"]: row["status"] for row in statuses
        }
        recorded = payment["instr_status"]
        changed = any(recorded.get(instr) != status for instr, status in live.items())
        if not changed:
            return {"state": payment["state"], "changed": False}
        payload = ev.disbursement_result(
            self.clock.tick(), self._core_height(), payment_id, ordinal, statuses
        )
        self._commit(chain_id, payload, self.system_user, self.system_signer)
        return {"state": self.payment(payment_id)["state"], "changed": True}

    # -- reads --------------------------------------------------------------------

    def payment(self, payment_id: str) -> dict:
        _, record = self.locate(payment_id)
        return record

    def payments_on(self, chain_id: str) -> List[dict]:
        chain = self.network.chain(chain_id)
        out = []
        for key in sorted(chain.state.keys()):
            if key.startswith("payment/"):
                record = chain.state.get(key)
                record["payment_id"] = key.split("/", 1)[1]
                out.append(record)
        return out
