"""Deterministic demo fixture.

Seeds a fresh deployment with the standing cast used by scenario runs and
the acceptance suite: six organizations, their users and bank accounts,
three projects at different lifecycle stages, and an approved contract tree
under the head contract.  Every identifier, key and amount is a fixed
constant derived from FIXTURE_SEED, so two machines seeding independently
produce byte-identical chains.
"""

from __future__ import annotations

from typing import Dict, List

from .amounts import make_account_number
from .errors import StoreNotEmpty
from .harness import PLATFORM_USER, Deployment
from .wallet import Wallet

FIXTURE_SEED = "xafund-demo-1"

ORGS = [
    # (org_id, name, role, admin_user, bank_id, account_prefix)
    ("GOV-001", "District Supervision Bureau", "Government", "gov-admin", "INSTANT", "900001"),
    ("OWN-001", "City Development Co.", "Owner", "own-admin", "INSTANT", "110001"),
    ("GC-001", "BuildRight Construction Group", "GeneralContractor", "gc-admin", "BATCH", "220001"),
    ("SUB-001", "Steelworks Engineering Co.", "Subcontractor", "sub-admin", "FLAKY", "330001"),
    ("SUP-001", "Northgate Concrete Supply", "Supplier", "sup-admin", "INSTANT", "440001"),
    ("LAB-001", "Skyline Labor Services", "LaborCompany", "lab-admin", "BATCH", "550001"),
]

USERS = [
    # (user_id, org_id, role)
    ("gov-admin", "GOV-001", "Admin"),
    ("gov-rev", "GOV-001", "Staff"),
    ("own-admin", "OWN-001", "Admin"),
    ("own-fin", "OWN-001", "Finance"),
    ("gc-admin", "GC-001", "Admin"),
    ("gc-fin", "GC-001", "Finance"),
    ("gc-pm", "GC-001", "Staff"),
    ("sub-admin", "SUB-001", "Admin"),
    ("sub-fin", "SUB-001", "Finance"),
    ("sup-admin", "SUP-001", "Admin"),
    ("sup-fin", "SUP-001", "Finance"),
    ("lab-admin", "LAB-001", "Admin"),
    ("lab-fin", "LAB-001", "Finance"),
]

PROJECTS = [
    # (project_id, name, budget_fen, advances) — stages move forward only
    ("P-001", "Riverside Plaza Phase I", 100_000_000, 3),   # -> Construction
    ("P-002", "Harbor Road Upgrade", 50_000_000, 0),        # -> FeasibilityStudy
    ("P-003", "Old Town Bridge Retrofit", 80_000_000, 4),   # -> Completion
]

CONTRACTS = [
    # (contract_id, project, party_a, party_b, amount, parent, reviewer)
    ("C-100", "P-001", "OWN-001", "GC-001", 100_000_000, None, "own-fin"),
    ("C-200", "P-001", "GC-001", "SUB-001", 40_000_000, "C-100", "gc-fin"),
    ("C-300", "P-001", "GC-001", "SUP-001", 30_000_000, "C-100", "gc-fin"),
    ("C-400", "P-001", "GC-001", "LAB-001", 20_000_000, "C-100", "gov-rev"),
    ("C-500", "P-002", "OWN-001", "GC-001", 50_000_000, None, "own-fin"),
    ("C-600", "P-003", "OWN-001", "GC-001", 80_000_000, None, "own-fin"),
]

WORKERS = [
    # (worker_id, name, bank_id, account_prefix, wage_fen)
    ("W-001", "Zhang Wei", "INSTANT", "660001", 3_000_000),
    ("W-002", "Li Na", "BATCH", "660002", 2_500_000),
    ("W-003", "Wang Fang", "FLAKY", "660003", 4_500_000),
]

STAFF = [
    # (staff_id, org_id, bank_id, account_prefix) — payees for internal scenarios
    ("STAFF-SUB-1", "SUB-001", "INSTANT", "770001"),
    ("STAFF-SUP-1", "SUP-001", "INSTANT", "770002"),
]


def org_account(org_id: str) -> dict:
    for oid, _, _, _, bank_id, prefix in ORGS:
        if oid == org_id:
            return {
                "bank_id": bank_id,
                "account_number": make_account_number(prefix),
                "holder": org_id,
                "kind": "Corporate",
            }
    raise KeyError(org_id)


def worker_account(worker_id: str) -> dict:
    for wid, _, bank_id, prefix, _ in WORKERS:
        if wid == worker_id:
            return {
                "bank_id": bank_id,
                "account_number": make_account_number(prefix),
                "holder": worker_id,
                "kind": "Personal",
            }
    raise KeyError(worker_id)


def staff_account(staff_id: str) -> dict:
    for sid, _, bank_id, prefix in STAFF:
        if sid == staff_id:
            return {
                "bank_id": bank_id,
                "account_number": make_account_number(prefix),
                "holder": staff_id,
                "kind": "Personal",
            }
    raise KeyError(staff_id)


def wage_roster() -> List[dict]:
    return [
        {"worker_id": wid, "name": name, "account": worker_account(wid), "amount": wage}
        for wid, name, _, _, wage in WORKERS
    ]


def wage_total() -> int:
    return sum(w[4] for w in WORKERS)


def fixture_wallet() -> Wallet:
    wallet = Wallet()
    for user_id, _, _ in USERS:
        wallet.derive(user_id, FIXTURE_SEED)
    return wallet


def seed_demo(deployment: Deployment) -> Dict:
    """Populate a fresh deployment. Raises StoreNotEmpty if anything besides
    the platform identity is already on the core chain."""
    state = deployment.network.core.state
    for key in state.keys():
        if key.startswith(("org/", "project/", "contract/")):
            raise StoreNotEmpty("the store already holds fixture data")

    wallet = fixture_wallet()
    registry = deployment.registry
    sys_signer = deployment.platform_signer

    for org_id, name, role, admin, _, _ in ORGS:
        registry.register_org(org_id, name, role, admin, PLATFORM_USER, sys_signer)
    for user_id, org_id, role in USERS:
        registry.register_user_key(
            user_id, org_id, role, wallet.public_key(user_id), 1, wallet.signer(user_id)
        )
        deployment.set_credential(user_id, f"{user_id}-pass")
    for org_id, _, _, admin, _, _ in ORGS:
        registry.set_bank_account(org_id, org_account(org_id), admin, wallet.signer(admin))

    for project_id, name, budget, advances in PROJECTS:
        registry.create_project(project_id, name, "OWN-001", budget, PLATFORM_USER, sys_signer)
        for _ in range(advances):
            registry.advance_stage(project_id, PLATFORM_USER, sys_signer)

    for contract_id, project_id, party_a, party_b, amount, parent, reviewer in CONTRACTS:
        creator = next(admin for oid, _, _, admin, _, _ in ORGS if oid == party_a)
        registry.create_contract(
            contract_id, project_id, party_a, party_b, amount,
            creator, wallet.signer(creator), parent=parent,
        )
        registry.amend_contract(
            contract_id, {}, creator, wallet.signer(creator), submit_for_review=True
        )
        registry.review_contract(contract_id, "approve", reviewer, wallet.signer(reviewer))

    deployment.datahub.ingest()
    core = deployment.network.core
    return {
        "orgs": [o[0] for o in ORGS],
        "users": [u[0] for u in USERS],
        "projects": [p[0] for p in PROJECTS],
        "contracts": [c[0] for c in CONTRACTS],
        "workers": [w[0] for w in WORKERS],
        "core_tip": core.tip,
        "state_roots": {
            chain_id: deployment.network.chain(chain_id).roots[-1]
            if deployment.network.chain(chain_id).tip >= 0
            else None
            for chain_id in deployment.network.chain_ids()
        },
    }
