"""Supply-chain registry: organizations, projects, contracts.

A thin service over the core chain: builds payloads, has callers sign them,
submits, and translates rejected transactions back into typed errors.  All
reads come from committed state; nothing here bypasses the ledger.
"""

from __future__ import annotations

from typing import Callable, List, Optional

from . import events as ev
from .errors import (
    DomainError,
    PaymentsInFlight,
    UnknownContract,
    UnknownOrg,
    UnknownProject,
    error_for_code,
)
from .ledger.chain import CORE_CHAIN_ID, build_tx
from .ledger.network import LedgerNetwork

Signer = Callable[[bytes], str]


class RegistryService:
    def __init__(self, network: LedgerNetwork, clock):
        self.network = network
        self.clock = clock

    # -- write path -------------------------------------------------------------

    def _commit(self, payload: dict, actor: str, signer: Signer) -> dict:
        tx = build_tx(payload, actor, signer)
        return self.submit_envelope(tx)

    def submit_envelope(self, tx: dict) -> dict:
        result = self.network.submit_and_commit(CORE_CHAIN_ID, tx)
        if not result.applied:
            raise error_for_code(result.error, f"transaction rejected: {result.error}")
        return {"tx_id": tx["tx_id"], "height": self.network.core.tip}

    def register_org(self, org_id: str, name: str, role: str, admin_user: str,
                     actor: str, signer: Signer) -> dict:
        payload = ev.org_registered(self.clock.tick(), org_id, name, role, admin_user)
        return self._commit(payload, actor, signer)

    def set_bank_account(self, org_id: str, account: dict, actor: str, signer: Signer) -> dict:
        payload = ev.bank_account_set(self.clock.tick(), org_id, account)
        return self._commit(payload, actor, signer)

    def register_user_key(self, user_id: str, org_id: Optional[str], role: str,
                          public_key: str, key_version: int, signer: Signer) -> dict:
        payload = ev.user_key_registered(
            self.clock.tick(), user_id, org_id, role, public_key, key_version
        )
        return self._commit(payload, user_id, signer)

    def create_project(self, project_id: str, name: str, owner_org: str, budget_total: int,
                       actor: str, signer: Signer) -> dict:
        payload = ev.project_created(self.clock.tick(), project_id, name, owner_org, budget_total)
        return self._commit(payload, actor, signer)

    def advance_stage(self, project_id: str, actor: str, signer: Signer) -> str:
        project = self.project(project_id)
        current = project["stage"]
        to_stage = ev.next_stage(current)
        payload = ev.project_stage_advanced(
            self.clock.tick(), project_id, current, to_stage or current
        )
        self._commit(payload, actor, signer)
        return to_stage or current

    def create_contract(self, contract_id: str, project_id: str, party_a: str, party_b: str,
                        amount: int, actor: str, signer: Signer,
                        parent: Optional[str] = None,
                        attachments: Optional[List[str]] = None) -> dict:
        payload = ev.contract_created(
            self.clock.tick(), contract_id, project_id, party_a, party_b, amount,
            parent=parent, attachments=attachments,
        )
        return self._commit(payload, actor, signer)

    def review_contract(self, contract_id: str, verdict: str, actor: str, signer: Signer) -> str:
        payload = ev.contract_reviewed(self.clock.tick(), contract_id, verdict)
        self._commit(payload, actor, signer)
        return self.contract(contract_id)["status"]

    def amend_contract(self, contract_id: str, changes: dict, actor: str, signer: Signer,
                       submit_for_review: bool = False) -> dict:
        payload = ev.contract_amended(
            self.clock.tick(), contract_id, changes, submit_for_review=submit_for_review
        )
        return self._commit(payload, actor, signer)

    def void_contract(self, contract_id: str, actor: str, signer: Signer) -> dict:
        if self.contract(contract_id) is None:
            raise UnknownContract(f"contract {contract_id} unknown")
        blocking = self._in_flight_payments(contract_id)
        if blocking:
            raise PaymentsInFlight(
                f"contract {contract_id} has in-flight payments", detail=blocking
            )
        payload = ev.contract_voided(self.clock.tick(), contract_id)
        return self._commit(payload, actor, signer)

    def _in_flight_payments(self, contract_id: str) -> List[str]:
        found = []
        for chain_id in self.network.chain_ids():
            if chain_id == CORE_CHAIN_ID:
                continue
            chain = self.network.chain(chain_id)
            for key in chain.state.keys():
                if not key.startswith("payment/"):
                    continue
                payment = chain.state.peek(key)
                if (
                    payment["contract_id"] == contract_id
                    and payment["state"] in ev.IN_FLIGHT_STATES
                ):
                    found.append(key.split("/", 1)[1])
        return sorted(found)

    # -- read path ----------------------------------------------------------------

    def org(self, org_id: str) -> Optional[dict]:
        return self.network.core.state.get(f"org/{org_id}")

    def orgs(self, role: Optional[str] = None) -> List[dict]:
        out = []
        state = self.network.core.state
        for key in sorted(state.keys()):
            if key.startswith("org/"):
                org = state.get(key)
                org["org_id"] = key.split("/", 1)[1]
                if role is None or org["role"] == role:
                    out.append(org)
        return out

    def user(self, user_id: str) -> Optional[dict]:
        return self.network.core.state.get(f"user/{user_id}")

    def project(self, project_id: str) -> dict:
        project = self.network.core.state.get(f"project/{project_id}")
        if project is None:
            raise UnknownProject(f"project {project_id} unknown")
        return project

    def projects(self) -> List[dict]:
        out = []
        state = self.network.core.state
        for key in sorted(state.keys()):
            if key.startswith("project/"):
                record = state.get(key)
                record["project_id"] = key.split("/", 1)[1]
                out.append(record)
        return out

    def contract(self, contract_id: str) -> Optional[dict]:
        return self.network.core.state.get(f"contract/{contract_id}")

    def contracts(self, project_id: Optional[str] = None) -> List[dict]:
        out = []
        state = self.network.core.state
        for key in sorted(state.keys()):
            if key.startswith("contract/"):
                record = state.get(key)
                record["contract_id"] = key.split("/", 1)[1]
                if project_id is None or record["project_id"] == project_id:
                    out.append(record)
        return out
