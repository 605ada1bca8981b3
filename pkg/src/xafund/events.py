"""Domain event payloads.

Every state change in the system is one of these tagged payloads wrapped in
a signed transaction envelope.  Payload fields worth calling out:

* ``tick`` — the logical timestamp; duplicated into the envelope so the
  whole stored record is covered by the transaction id (the envelope copy
  must equal the payload copy).
* ``core_height`` — present on payment-chain payloads only; pins which
  committed core-chain state the transaction was validated against, so a
  payment chain replays identically no matter how far the core chain has
  moved since.

Builders here are shared by the services, the CLI wallet and the tests; the
TypeScript client mirrors the same shapes.
"""

from __future__ import annotations

from typing import Optional

# Core-chain events
ORG_REGISTERED = "OrgRegistered"
BANK_ACCOUNT_SET = "BankAccountSet"
USER_KEY_REGISTERED = "UserKeyRegistered"
PROJECT_CREATED = "ProjectCreated"
PROJECT_STAGE_ADVANCED = "ProjectStageAdvanced"
CONTRACT_CREATED = "ContractCreated"
CONTRACT_REVIEWED = "ContractReviewed"
CONTRACT_AMENDED = "ContractAmended"
CONTRACT_VOIDED = "ContractVoided"
ANCHOR_CHECKPOINT = "AnchorCheckpoint"

# Payment-chain events
PAYMENT_CREATED = "PaymentCreated"
SPLIT_PLAN_COMMITTED = "SplitPlanCommitted"
PAYMENT_SUBMITTED = "PaymentSubmitted"
PAYMENT_REVIEWED = "PaymentReviewed"
DISBURSEMENT_ISSUED = "DisbursementIssued"
DISBURSEMENT_RESULT = "DisbursementResult"

CORE_EVENTS = {
    ORG_REGISTERED,
    BANK_ACCOUNT_SET,
    USER_KEY_REGISTERED,
    PROJECT_CREATED,
    PROJECT_STAGE_ADVANCED,
    CONTRACT_CREATED,
    CONTRACT_REVIEWED,
    CONTRACT_AMENDED,
    CONTRACT_VOIDED,
    ANCHOR_CHECKPOINT,
}

PAYMENT_EVENTS = {
    PAYMENT_CREATED,
    SPLIT_PLAN_COMMITTED,
    PAYMENT_SUBMITTED,
    PAYMENT_REVIEWED,
    DISBURSEMENT_ISSUED,
    DISBURSEMENT_RESULT,
}

ALL_EVENTS = CORE_EVENTS | PAYMENT_EVENTS

# Enum vocabularies ----------------------------------------------------------

ORG_ROLES = (
    "Government",
    "Owner",
    "GeneralContractor",
    "Subcontractor",
    "Supplier",
    "LaborCompany",
)

USER_ROLES = ("System", "Admin", "Finance", "Staff")

PROJECT_STAGES = (
    "FeasibilityStudy",
    "InitialDesign",
    "Budget",
    "Construction",
    "Completion",
)

CONTRACT_STATUSES = ("Draft", "UnderReview", "Active", "Voided")

SCENARIOS = (
    "SupplierMaterialPayment",
    "SubcontractPayment",
    "ProjectAdvancePayment",
    "ProjectProgressPayment",
    "ProjectFinalPayment",
    "BuilderWages",
    "DailyReimbursement",
    "StaffLoan",
)

MODES = ("Application", "Authorized", "Penetrating")

PAYMENT_STATES = (
    "Draft",
    "Submitted",
    "InReview",
    "Approved",
    "Queued",
    "Disbursing",
    "Confirmed",
    "PartiallyFailed",
    "Rejected",
)

# In-flight payment states block voiding of the contract they reference.
IN_FLIGHT_STATES = {
    "Submitted",
    "InReview",
    "Approved",
    "Queued",
    "Disbursing",
    "PartiallyFailed",
}

TERMINAL_STATES = {"Confirmed", "Rejected"}

ACCOUNT_KINDS = ("Corporate", "Personal")

BANK_STATUSES = ("Accepted", "Settled", "Returned")


def next_stage(stage: str) -> Optional[str]:
    i = PROJECT_STAGES.index(stage)
    if i + 1 >= len(PROJECT_STAGES):
        return None
    return PROJECT_STAGES[i + 1]


# Payload builders ------------------------------------------------------------


def org_registered(tick, org_id, name, role, admin_user):
    return {
        "type": ORG_REGISTERED,
        "tick": tick,
        "org_id": org_id,
        "name": name,
        "role": role,
        "admin_user": admin_user,
    }


def bank_account_set(tick, org_id, account):
    return {"type": BANK_ACCOUNT_SET, "tick": tick, "org_id": org_id, "account": account}


def user_key_registered(tick, user_id, org_id, role, public_key, key_version):
    return {
        "type": USER_KEY_REGISTERED,
        "tick": tick,
        "user_id": user_id,
        "org_id": org_id,
        "role": role,
        "public_key": public_key,
        "key_version": key_version,
    }


def project_created(tick, project_id, name, owner_org, budget_total):
    return {
        "type": PROJECT_CREATED,
        "tick": tick,
        "project_id": project_id,
        "name": name,
        "owner_org": owner_org,
        "budget_total": budget_total,
    }


def project_stage_advanced(tick, project_id, from_stage, to_stage):
    return {
        "type": PROJECT_STAGE_ADVANCED,
        "tick": tick,
        "project_id": project_id,
        "from_stage": from_stage,
        "to_stage": to_stage,
    }


def contract_created(
    tick, contract_id, project_id, party_a, party_b, amount, parent=None, attachments=None
):
    return {
        "type": CONTRACT_CREATED,
        "tick": tick,
        "contract_id": contract_id,
        "project_id": project_id,
        "party_a": party_a,
        "party_b": party_b,
        "amount": amount,
        "parent_contract": parent,
        "attachments": attachments or [],
    }


def contract_reviewed(tick, contract_id, verdict):
    return {"type": CONTRACT_REVIEWED, "tick": tick, "contract_id": contract_id, "verdict": verdict}


def contract_amended(tick, contract_id, changes, submit_for_review=False):
    return {
        "type": CONTRACT_AMENDED,
        "tick": tick,
        "contract_id": contract_id,
        "changes": changes,
        "submit_for_review": submit_for_review,
    }


def contract_voided(tick, contract_id):
    return {"type": CONTRACT_VOIDED, "tick": tick, "contract_id": contract_id}


def anchor_checkpoint(tick, payment_chain, anchored_height, header_digest):
    return {
        "type": ANCHOR_CHECKPOINT,
        "tick": tick,
        "payment_chain": payment_chain,
        "anchored_height": anchored_height,
        "header_digest": header_digest,
    }


def payment_created(
    tick, core_height, payment_id, contract_id, project_id, scenario, mode, amount, payee=None
):
    return {
        "type": PAYMENT_CREATED,
        "tick": tick,
        "core_height": core_height,
        "payment_id": payment_id,
        "contract_id": contract_id,
        "project_id": project_id,
        "scenario": scenario,
        "mode": mode,
        "amount": amount,
        "payee": payee,
    }


def split_plan_committed(tick, core_height, payment_id, plan=None, roster=None):
    return {
        "type": SPLIT_PLAN_COMMITTED,
        "tick": tick,
        "core_height": core_height,
        "payment_id": payment_id,
        "plan": plan,
        "roster": roster,
    }


def payment_submitted(
    tick, core_height, payment_id, approval_chain, config_hash, challenge_proof
):
    return {
        "type": PAYMENT_SUBMITTED,
        "tick": tick,
        "core_height": core_height,
        "payment_id": payment_id,
        "approval_chain": approval_chain,
        "config_hash": config_hash,
        "challenge_proof": challenge_proof,
    }


def payment_reviewed(
    tick, core_height, payment_id, step_index, verdict, signature, challenge_proof
):
    return {
        "type": PAYMENT_REVIEWED,
        "tick": tick,
        "core_height": core_height,
        "payment_id": payment_id,
        "step_index": step_index,
        "verdict": verdict,
        "signature": signature,
        "challenge_proof": challenge_proof,
    }


def disbursement_issued(
    tick, core_height, payment_id, release_ordinal, batch_id, bank_id, debit_account, instructions
):
    return {
        "type": DISBURSEMENT_ISSUED,
        "tick": tick,
        "core_height": core_height,
        "payment_id": payment_id,
        "release_ordinal": release_ordinal,
        "batch_id": batch_id,
        "bank_id": bank_id,
        "debit_account": debit_account,
        "instructions": instructions,
    }


def disbursement_result(tick, core_height, payment_id, release_ordinal, results):
    return {
        "type": DISBURSEMENT_RESULT,
        "tick": tick,
        "core_height": core_height,
        "payment_id": payment_id,
        "release_ordinal": release_ordinal,
        "results": results,
    }
