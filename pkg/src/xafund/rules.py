"""The on-chain state transition function.

Every committed transaction is applied through ``apply_tx``.  A transaction
that violates a rule raises a DomainError; the ledger records it as rejected
and leaves state untouched, which is what makes optimistic concurrency work:
the first transition to commit wins, a stale one becomes a deterministic
no-op with a CONFLICT code instead of corrupting state.

Payment-chain transactions resolve registry facts (keys, orgs, contracts,
project stages) through a read-only view of the core chain pinned at the
``core_height`` recorded in the payload, so replays do not depend on how far
the core chain has advanced since.
"""

from __future__ import annotations

from typing import Callable, List, Optional

from . import events as ev
from .canonical import digest_of, is_hex_digest
from .errors import (
    AlreadyCompleted,
    ApprovalChainBroken,
    BadAmount,
    BadBudget,
    BadChecksum,
    BadSignature,
    ChallengeFailed,
    ContractNotActive,
    DomainError,
    DuplicateOrg,
    Forbidden,
    MissingPlan,
    NoAccount,
    NotOrgAdmin,
    ParentCapExceeded,
    ParentNotActive,
    RosterSumMismatch,
    SelfApproval,
    StageMismatch,
    StaleState,
    UnknownContract,
    UnknownInstruction,
    UnknownOrg,
    UnknownPayment,
    UnknownProject,
    UnknownUser,
    ValidationFailed,
    WrongRole,
    WrongState,
)
from .fundflow.split import compute_split, validate_plan
from .keys import challenge_message, verify_signature
from .amounts import mod97_valid


class RegistryView:
    """Read-only lens over core-chain state at one height."""

    def __init__(self, state):
        self._state = state

    def get(self, key: str, default=None):
        return self._state.get(key, default)

    def user(self, user_id: str) -> Optional[dict]:
        return self.get(f"user/{user_id}")

    def org(self, org_id: str) -> Optional[dict]:
        return self.get(f"org/{org_id}")

    def project(self, project_id: str) -> Optional[dict]:
        return self.get(f"project/{project_id}")

    def contract(self, contract_id: str) -> Optional[dict]:
        return self.get(f"contract/{contract_id}")

    def active_key(self, user_id: str) -> Optional[str]:
        user = self.user(user_id)
        if not user:
            return None
        version = user["active_version"]
        for entry in user["keys"]:
            if entry["version"] == version:
                return entry["public_key"]
        return None

    def is_system(self, user_id: str) -> bool:
        user = self.user(user_id)
        return bool(user and user["role"] == "System")

    def is_government(self, user_id: str) -> bool:
        user = self.user(user_id)
        if not user or not user.get("org_id"):
            return False
        org = self.org(user["org_id"])
        return bool(org and org["role"] == "Government")

    def member_of(self, user_id: str, org_id: str) -> bool:
        user = self.user(user_id)
        return bool(user and user.get("org_id") == org_id)

    def first_account(self, org_id: str) -> Optional[dict]:
        org = self.org(org_id)
        if not org or not org.get("accounts"):
            return None
        return org["accounts"][0]

    def contracts_under(self, parent_id: str) -> List[dict]:
        out = []
        for key in sorted(self._state.keys()):
            if not key.startswith("contract/"):
                continue
            contract = self._state.peek(key)
            if contract.get("parent_contract") == parent_id:
                out.append(contract)
        return out


class TxContext:
    """Everything the transition function may consult besides chain state."""

    def __init__(
        self,
        chain_id: str,
        is_core: bool,
        project_id: Optional[str],
        core_view_at: Callable[[int], RegistryView],
        approval_config,
        anchor_interval: int,
        core_tip: Callable[[], int],
    ):
        self.chain_id = chain_id
        self.is_core = is_core
        self.project_id = project_id
        self.core_view_at = core_view_at
        self.approval_config = approval_config
        self.anchor_interval = anchor_interval
        self.core_tip = core_tip


# ---------------------------------------------------------------------------
# helpers


def review_digest(payment_id: str, step_index: int, verdict: str) -> str:
    """Digest an approver signs when deciding a step."""
    return digest_of(["review", payment_id, step_index, verdict])


def submit_op_digest(payment_id: str) -> str:
    return digest_of(["op", "submit-payment", payment_id])


def review_op_digest(payment_id: str, step_index: int, verdict: str) -> str:
    return digest_of(["op", "review-payment", payment_id, step_index, verdict])


def instruction_id(payment_id: str, account_number: str, ordinal: int) -> str:
    return digest_of([payment_id, account_number, ordinal])


def batch_id_for(payment_id: str, release_ordinal: int) -> str:
    return digest_of(["batch", payment_id, release_ordinal])


def _require(condition: bool, error: DomainError) -> None:
    if not condition:
        raise error


def _valid_account_shape(account) -> bool:
    return (
        isinstance(account, dict)
        and isinstance(account.get("bank_id"), str)
        and bool(account.get("bank_id"))
        and mod97_valid(account.get("account_number", ""))
        and isinstance(account.get("holder"), str)
        and account.get("kind") in ev.ACCOUNT_KINDS
    )


def initiator_org_for(scenario: str, mode: str, contract: dict, actor_org: str) -> Optional[str]:
    """Which org must the payment's creator belong to.

    party_a is the paying side of a contract; party_b the receiving side.
    Application mode starts from a payee-side request, the other two start
    from the payer.  Internal scenarios (reimbursement, staff loan) are
    initiated by the spending org itself, which must be a contract party.
    """
    if scenario in ("DailyReimbursement", "StaffLoan"):
        if actor_org in (contract["party_a"], contract["party_b"]):
            return actor_org
        return None
    if mode == "Application":
        return contract["party_b"]
    return contract["party_a"]


def resolve_approval_chain(
    config, scenario: str, mode: str, contract: dict, initiator_org: str
) -> List[dict]:
    """Turn configured step scopes into concrete review steps."""
    counterparty = (
        contract["party_b"] if initiator_org == contract["party_a"] else contract["party_a"]
    )
    steps = []
    for index, scope in enumerate(config.step_scopes(scenario, mode)):
        if scope["scope"] == "government":
            resolved = {"kind": "government", "org_id": None}
        elif scope["scope"] == "counterparty":
            resolved = {"kind": "org", "org_id": counterparty}
        else:
            resolved = {"kind": "org", "org_id": initiator_org}
        steps.append(
            {
                "step_index": index,
                "kind": resolved["kind"],
                "org_id": resolved["org_id"],
                "decided_by": None,
                "verdict": None,
                "signature": None,
                "decided_tick": None,
                "core_height": None,
            }
        )
    return steps


def _verify_challenge_on_chain(state, view: RegistryView, initiator: str,
                               proof, expected_digest: str, tick: int, ttl: int = 120) -> None:
    """Challenge rules that replay deterministically: binding, freshness
    relative to the payload tick, single use via an on-chain nonce record,
    and a verifying signature."""
    if not isinstance(proof, dict):
        raise ChallengeFailed("challenge proof missing")
    nonce = proof.get("nonce")
    issued = proof.get("issued_tick")
    op_digest = proof.get("operation_digest")
    signature = proof.get("signature")
    if not (isinstance(nonce, str) and isinstance(op_digest, str) and isinstance(signature, str)):
        raise ChallengeFailed("malformed challenge proof")
    if not isinstance(issued, int):
        raise ChallengeFailed("malformed challenge proof")
    if op_digest != expected_digest:
        raise ChallengeFailed("challenge bound to a different operation")
    if not (0 <= tick - issued <= ttl):
        raise ChallengeFailed("challenge expired")
    if state.has(f"nonce/{nonce}"):
        raise ChallengeFailed("challenge nonce already used")
    key = view.active_key(initiator)
    if key is None:
        raise ChallengeFailed("initiator has no registered key")
    try:
        message = challenge_message(nonce, op_digest)
    except ValueError:
        raise ChallengeFailed("malformed challenge nonce")
    if not verify_signature(key, message, signature):
        raise ChallengeFailed("challenge signature does not verify")
    state.put(f"nonce/{nonce}", {"user": initiator, "tick": tick})


# ---------------------------------------------------------------------------
# dispatch


def apply_tx(state, tx: dict, ctx: TxContext) -> None:
    payload = tx["payload"]
    kind = payload.get("type")
    if ctx.is_core:
        _require(kind in ev.CORE_EVENTS, ValidationFailed(f"{kind} not valid on the core chain"))
    else:
        _require(
            kind in ev.PAYMENT_EVENTS,
            ValidationFailed(f"{kind} not valid on a payment chain"),
        )
    handler = _HANDLERS[kind]
    handler(state, tx, ctx)


# ---- core chain -------------------------------------------------------------


def _view_of(state) -> RegistryView:
    return RegistryView(state)


def _apply_user_key_registered(state, tx, ctx):
    p = tx["payload"]
    user_id = p.get("user_id")
    _require(isinstance(user_id, str) and bool(user_id), ValidationFailed("missing user id"))
    _require(tx["initiator"] == user_id, Forbidden("key registration must be initiated by the user"))
    _require(p.get("role") in ev.USER_ROLES, ValidationFailed("unknown user role"))
    _require(is_hex_digest(p.get("public_key")) or _is_hex(p.get("public_key"), 64),
             ValidationFailed("public key must be 32 bytes hex"))
    org_id = p.get("org_id")
    if p["role"] != "System":
        _require(org_id is not None, ValidationFailed("non-system users need an org"))
    if org_id is not None:
        _require(_view_of(state).org(org_id) is not None, UnknownOrg(f"org {org_id} not registered"))
    existing = state.get(f"user/{user_id}")
    if existing is None:
        _require(p.get("key_version") == 1, ValidationFailed("first key must be version 1"))
        record = {
            "org_id": org_id,
            "role": p["role"],
            "keys": [{"version": 1, "public_key": p["public_key"]}],
            "active_version": 1,
        }
    else:
        _require(
            p.get("key_version") == existing["active_version"] + 1,
            StaleState("key rotation must advance the version by one"),
        )
        _require(p["role"] == existing["role"] and org_id == existing["org_id"],
                 ValidationFailed("rotation cannot change role or org"))
        record = existing
        record["keys"].append({"version": p["key_version"], "public_key": p["public_key"]})
        record["active_version"] = p["key_version"]
    state.put(f"user/{user_id}", record)


def _is_hex(value, length) -> bool:
    if not isinstance(value, str) or len(value) != length:
        return False
    try:
        bytes.fromhex(value)
        return True
    except ValueError:
        return False


def _apply_org_registered(state, tx, ctx):
    p = tx["payload"]
    view = _view_of(state)
    _require(view.is_system(tx["initiator"]), Forbidden("org registration needs a system user"))
    org_id = p.get("org_id")
    _require(isinstance(org_id, str) and bool(org_id), ValidationFailed("missing org id"))
    _require(not state.has(f"org/{org_id}"), DuplicateOrg(f"org {org_id} already registered"))
    _require(isinstance(p.get("name"), str) and bool(p["name"]), ValidationFailed("org name empty"))
    _require(p.get("role") in ev.ORG_ROLES, ValidationFailed("unknown org role"))
    _require(isinstance(p.get("admin_user"), str) and bool(p["admin_user"]),
             ValidationFailed("org needs an admin user id"))
    state.put(
        f"org/{org_id}",
        {
            "name": p["name"],
            "role": p["role"],
            "admin_user": p["admin_user"],
            "accounts": [],
        },
    )


def _apply_bank_account_set(state, tx, ctx):
    p = tx["payload"]
    org = state.get(f"org/{p.get('org_id')}")
    _require(org is not None, UnknownOrg(f"org {p.get('org_id')} not registered"))
    _require(tx["initiator"] == org["admin_user"],
             NotOrgAdmin("only the org administrator maintains bank accounts"))
    account = p.get("account")
    _require(isinstance(account, dict), ValidationFailed("missing account"))
    _require(mod97_valid(account.get("account_number", "")),
             BadChecksum("account number fails the mod-97 checksum"))
    _require(_valid_account_shape(account), ValidationFailed("malformed bank account"))
    accounts = [
        a
        for a in org["accounts"]
        if not (
            a["bank_id"] == account["bank_id"]
            and a["account_number"] == account["account_number"]
        )
    ]
    accounts.append(account)
    org["accounts"] = accounts
    state.put(f"org/{p['org_id']}", org)


def _apply_project_created(state, tx, ctx):
    p = tx["payload"]
    view = _view_of(state)
    _require(view.is_system(tx["initiator"]), Forbidden("project creation needs a system user"))
    project_id = p.get("project_id")
    _require(isinstance(project_id, str) and bool(project_id), ValidationFailed("missing project id"))
    _require(not state.has(f"project/{project_id}"),
             ValidationFailed(f"project {project_id} already exists"))
    budget = p.get("budget_total")
    _require(isinstance(budget, int) and budget > 0, BadBudget("budget must be positive fen"))
    owner = view.org(p.get("owner_org"))
    _require(owner is not None, UnknownOrg(f"owner org {p.get('owner_org')} not registered"))
    _require(owner["role"] == "Owner", ValidationFailed("owner_org must have the Owner role"))
    state.put(
        f"project/{project_id}",
        {
            "name": p.get("name") or project_id,
            "owner_org": p["owner_org"],
            "budget_total": budget,
            "stage": "FeasibilityStudy",
            "created_tick": p["tick"],
        },
    )


def _apply_project_stage_advanced(state, tx, ctx):
    p = tx["payload"]
    view = _view_of(state)
    _require(view.is_system(tx["initiator"]), Forbidden("stage advance needs a system user"))
    project = state.get(f"project/{p.get('project_id')}")
    _require(project is not None, UnknownProject(f"project {p.get('project_id')} unknown"))
    _require(project["stage"] != "Completion", AlreadyCompleted("project already completed"))
    _require(project["stage"] == p.get("from_stage"), StaleState("project stage moved"))
    expected = ev.next_stage(project["stage"])
    _require(p.get("to_stage") == expected, ValidationFailed("stages advance one at a time"))
    project["stage"] = expected
    state.put(f"project/{p['project_id']}", project)


def _apply_contract_created(state, tx, ctx):
    p = tx["payload"]
    view = _view_of(state)
    contract_id = p.get("contract_id")
    _require(isinstance(contract_id, str) and bool(contract_id), ValidationFailed("missing contract id"))
    _require(not state.has(f"contract/{contract_id}"),
             ValidationFailed(f"contract {contract_id} already exists"))
    for party in (p.get("party_a"), p.get("party_b")):
        _require(view.org(party) is not None, UnknownOrg(f"party {party} not registered"))
    _require(p["party_a"] != p["party_b"], ValidationFailed("a contract needs two distinct parties"))
    _require(view.project(p.get("project_id")) is not None,
             UnknownProject(f"project {p.get('project_id')} unknown"))
    amount = p.get("amount")
    _require(isinstance(amount, int) and amount > 0, BadAmount("contract amount must be positive"))
    _require(
        view.is_system(tx["initiator"]) or view.member_of(tx["initiator"], p["party_a"]),
        Forbidden("contracts are created by party_a or a system user"),
    )
    parent_id = p.get("parent_contract")
    if parent_id is not None:
        parent = view.contract(parent_id)
        _require(parent is not None, UnknownContract(f"parent {parent_id} unknown"))
        _require(parent["status"] == "Active", ParentNotActive("parent contract is not active"))
        _require(parent["project_id"] == p["project_id"],
                 ValidationFailed("child contract must stay in the parent's project"))
        committed = sum(
            c["amount"] for c in view.contracts_under(parent_id) if c["status"] != "Voided"
        )
        _require(
            committed + amount <= parent["amount"],
            ParentCapExceeded(
                f"children would total {committed + amount} over parent cap {parent['amount']}"
            ),
        )
    attachments = p.get("attachments") or []
    _require(all(is_hex_digest(a) for a in attachments),
             ValidationFailed("attachments must be content digests"))
    state.put(
        f"contract/{contract_id}",
        {
            "project_id": p["project_id"],
            "party_a": p["party_a"],
            "party_b": p["party_b"],
            "amount": amount,
            "status": "Draft",
            "parent_contract": parent_id,
            "attachments": attachments,
            "created_tick": p["tick"],
        },
    )


def _apply_contract_reviewed(state, tx, ctx):
    p = tx["payload"]
    view = _view_of(state)
    contract = state.get(f"contract/{p.get('contract_id')}")
    _require(contract is not None, UnknownContract(f"contract {p.get('contract_id')} unknown"))
    _require(contract["status"] == "UnderReview", WrongState("contract is not under review"))
    _require(
        view.member_of(tx["initiator"], contract["party_a"]) or view.is_government(tx["initiator"]),
        Forbidden("contract review belongs to party_a or government"),
    )
    verdict = p.get("verdict")
    _require(verdict in ("approve", "reject"), ValidationFailed("verdict must be approve or reject"))
    contract["status"] = "Active" if verdict == "approve" else "Draft"
    state.put(f"contract/{p['contract_id']}", contract)


def _apply_contract_amended(state, tx, ctx):
    p = tx["payload"]
    view = _view_of(state)
    contract = state.get(f"contract/{p.get('contract_id')}")
    _require(contract is not None, UnknownContract(f"contract {p.get('contract_id')} unknown"))
    _require(contract["status"] == "Draft", WrongState("only draft contracts can be amended"))
    _require(
        view.is_system(tx["initiator"]) or view.member_of(tx["initiator"], contract["party_a"]),
        Forbidden("amendments belong to party_a"),
    )
    changes = p.get("changes") or {}
    _require(isinstance(changes, dict), ValidationFailed("changes must be an object"))
    _require(set(changes) <= {"amount", "attachments"}, ValidationFailed("unknown amendment fields"))
    if "amount" in changes:
        amount = changes["amount"]
        _require(isinstance(amount, int) and amount > 0, BadAmount("amount must be positive"))
        parent_id = contract.get("parent_contract")
        if parent_id is not None:
            parent = view.contract(parent_id)
            committed = sum(
                c["amount"]
                for c in view.contracts_under(parent_id)
                if c["status"] != "Voided" and c is not None
            ) - contract["amount"]
            _require(committed + amount <= parent["amount"],
                     ParentCapExceeded("amended amount exceeds parent cap"))
        contract["amount"] = amount
    if "attachments" in changes:
        attachments = changes["attachments"] or []
        _require(all(is_hex_digest(a) for a in attachments),
                 ValidationFailed("attachments must be content digests"))
        contract["attachments"] = attachments
    if p.get("submit_for_review"):
        contract["status"] = "UnderReview"
    state.put(f"contract/{p['contract_id']}", contract)


def _apply_contract_voided(state, tx, ctx):
    p = tx["payload"]
    view = _view_of(state)
    contract = state.get(f"contract/{p.get('contract_id')}")
    _require(contract is not None, UnknownContract(f"contract {p.get('contract_id')} unknown"))
    _require(contract["status"] != "Voided", WrongState("contract already voided"))
    _require(
        view.is_system(tx["initiator"])
        or view.member_of(tx["initiator"], contract["party_a"])
        or view.is_government(tx["initiator"]),
        Forbidden("voiding belongs to party_a, government, or system"),
    )
    contract["status"] = "Voided"
    state.put(f"contract/{p['contract_id']}", contract)


def _apply_anchor_checkpoint(state, tx, ctx):
    p = tx["payload"]
    view = _view_of(state)
    _require(view.is_system(tx["initiator"]), Forbidden("anchoring is a system operation"))
    chain_id = p.get("payment_chain")
    _require(isinstance(chain_id, str) and chain_id.startswith("pay-"),
             ValidationFailed("anchors reference payment chains"))
    height = p.get("anchored_height")
    interval = ctx.anchor_interval
    _require(isinstance(height, int) and height > 0 and height % interval == 0,
             ValidationFailed(f"anchored height must be a positive multiple of {interval}"))
    _require(is_hex_digest(p.get("header_digest")), ValidationFailed("malformed header digest"))
    record = state.get(f"anchor/{chain_id}", {"last": 0, "digests": {}})
    _require(height > record["last"], StaleState("anchors advance monotonically"))
    record["last"] = height
    record["digests"][str(height)] = p["header_digest"]
    state.put(f"anchor/{chain_id}", record)


# ---- payment chain -----------------------------------------------------------


def _core_view(ctx, payload) -> RegistryView:
    height = payload.get("core_height")
    if not isinstance(height, int) or height < 0 or height > ctx.core_tip():
        raise ValidationFailed("core_height outside the committed core chain")
    return ctx.core_view_at(height)


def _payment(state, payment_id) -> dict:
    payment = state.get(f"payment/{payment_id}")
    if payment is None:
        raise UnknownPayment(f"payment {payment_id} unknown")
    return payment


def _apply_payment_created(state, tx, ctx):
    p = tx["payload"]
    view = _core_view(ctx, p)
    payment_id = p.get("payment_id")
    _require(isinstance(payment_id, str) and bool(payment_id), ValidationFailed("missing payment id"))
    _require(not state.has(f"payment/{payment_id}"),
             ValidationFailed(f"payment {payment_id} already exists"))
    _require(p.get("scenario") in ev.SCENARIOS, ValidationFailed("unknown scenario"))
    _require(p.get("mode") in ev.MODES, ValidationFailed("unknown mode"))
    config = ctx.approval_config
    _require(p["mode"] in config.allowed_modes(p["scenario"]),
             ValidationFailed(f"{p['scenario']} does not support mode {p['mode']}"))
    amount = p.get("amount")
    _require(isinstance(amount, int) and amount > 0, BadAmount("payment amount must be positive"))
    contract = view.contract(p.get("contract_id"))
    _require(contract is not None, UnknownContract(f"contract {p.get('contract_id')} unknown"))
    _require(contract["status"] == "Active", ContractNotActive("contract is not active"))
    _require(contract["project_id"] == p.get("project_id") == ctx.project_id,
             ValidationFailed("payment must live on its project's chain"))
    project = view.project(p["project_id"])
    _require(project is not None, UnknownProject("project unknown"))
    _require(project["stage"] in config.allowed_stages(p["scenario"]),
             StageMismatch(
                 f"{p['scenario']} not allowed at stage {project['stage']}"
             ))
    actor = view.user(tx["initiator"])
    _require(actor is not None, UnknownUser(f"user {tx['initiator']} unknown"))
    expected_org = initiator_org_for(p["scenario"], p["mode"], contract, actor.get("org_id"))
    _require(expected_org is not None and actor.get("org_id") == expected_org,
             Forbidden("initiator does not belong to the initiating org for this scenario"))
    payee = p.get("payee")
    if p["scenario"] in ("DailyReimbursement", "StaffLoan"):
        _require(isinstance(payee, dict), ValidationFailed("internal scenarios need a payee"))
        _require(isinstance(payee.get("beneficiary"), str) and bool(payee["beneficiary"]),
                 ValidationFailed("payee needs a beneficiary id"))
        account = payee.get("account")
        _require(_valid_account_shape(account), BadChecksum("payee account invalid"))
        _require(account["kind"] == "Personal",
                 ValidationFailed("internal scenarios pay personal accounts"))
        payer_org = actor["org_id"]
    else:
        _require(payee is None, ValidationFailed("payee only applies to internal scenarios"))
        payer_org = contract["party_a"]
    state.put(
        f"payment/{payment_id}",
        {
            "contract_id": p["contract_id"],
            "project_id": p["project_id"],
            "scenario": p["scenario"],
            "mode": p["mode"],
            "amount": amount,
            "state": "Draft",
            "initiator": tx["initiator"],
            "payer_org": payer_org,
            "payee": payee,
            "split_plan": None,
            "wage_roster": None,
            "approval_chain": [],
            "current_step": None,
            "config_hash": None,
            "instructions": [],
            "instr_status": {},
            "release_count": 0,
            "failed_instrs": [],
            "created_tick": p["tick"],
            "submitted_tick": None,
            "approved_tick": None,
            "finished_tick": None,
        },
    )


def _apply_split_plan_committed(state, tx, ctx):
    p = tx["payload"]
    payment = _payment(state, p.get("payment_id"))
    _require(payment["state"] == "Draft", WrongState("plans attach to draft payments"))
    _require(tx["initiator"] == payment["initiator"], Forbidden("only the initiator attaches plans"))
    plan, roster = p.get("plan"), p.get("roster")
    if payment["scenario"] == "BuilderWages":
        _require(plan is None, ValidationFailed("wage payments carry a roster, not a plan"))
        _require(isinstance(roster, list) and roster, ValidationFailed("missing wage roster"))
        total = 0
        for i, entry in enumerate(roster):
            _require(isinstance(entry, dict), ValidationFailed(f"roster entry {i} malformed"))
            _require(isinstance(entry.get("worker_id"), str) and bool(entry["worker_id"]),
                     ValidationFailed(f"roster entry {i} needs a worker id"))
            account = entry.get("account")
            _require(_valid_account_shape(account), BadChecksum(f"roster entry {i} account invalid"))
            _require(account["kind"] == "Personal",
                     ValidationFailed("wages go to personal accounts only"))
            amount = entry.get("amount")
            _require(isinstance(amount, int) and amount > 0,
                     BadAmount(f"roster entry {i} amount invalid"))
            total += amount
        _require(total == payment["amount"],
                 RosterSumMismatch(f"roster totals {total}, payment is {payment['amount']}"))
        payment["wage_roster"] = roster
    else:
        _require(roster is None, ValidationFailed("rosters are for wage payments"))
        _require(payment["mode"] == "Penetrating",
                 ValidationFailed("split plans apply to penetrating payments"))
        _require(isinstance(plan, list), ValidationFailed("missing split plan"))
        validate_plan(plan)
        compute_split(plan, payment["amount"])  # raises if the plan cannot absorb the amount
        payment["split_plan"] = plan
    state.put(f"payment/{p['payment_id']}", payment)


def _apply_payment_submitted(state, tx, ctx):
    p = tx["payload"]
    view = _core_view(ctx, p)
    payment = _payment(state, p.get("payment_id"))
    _require(payment["state"] == "Draft", WrongState("only draft payments can be submitted"))
    _require(tx["initiator"] == payment["initiator"], Forbidden("only the initiator submits"))
    if payment["scenario"] == "BuilderWages":
        _require(payment["wage_roster"] is not None, MissingPlan("wage roster not attached"))
    elif payment["mode"] == "Penetrating":
        _require(payment["split_plan"] is not None, MissingPlan("split plan not attached"))
    config = ctx.approval_config
    _require(p.get("config_hash") == config.config_hash,
             ValidationFailed("submission references an unknown approval configuration"))
    contract = view.contract(payment["contract_id"])
    _require(contract is not None, UnknownContract("contract unknown at referenced height"))
    actor = view.user(tx["initiator"])
    expected_chain = resolve_approval_chain(
        config, payment["scenario"], payment["mode"], contract, actor["org_id"]
    )
    declared = p.get("approval_chain")
    _require(
        isinstance(declared, list)
        and [
            {k: s.get(k) for k in ("step_index", "kind", "org_id")} for s in declared
        ]
        == [
            {k: s[k] for k in ("step_index", "kind", "org_id")} for s in expected_chain
        ],
        ValidationFailed("declared approval chain does not match configuration"),
    )
    _verify_challenge_on_chain(
        state, view, tx["initiator"], p.get("challenge_proof"),
        submit_op_digest(p["payment_id"]), p["tick"],
    )
    payment["approval_chain"] = expected_chain
    payment["current_step"] = 0
    payment["config_hash"] = p["config_hash"]
    payment["state"] = "InReview"
    payment["submitted_tick"] = p["tick"]
    state.put(f"payment/{p['payment_id']}", payment)


def _apply_payment_reviewed(state, tx, ctx):
    p = tx["payload"]
    view = _core_view(ctx, p)
    payment = _payment(state, p.get("payment_id"))
    _require(payment["state"] == "InReview", WrongState("payment is not in review"))
    step_index = p.get("step_index")
    _require(step_index == payment["current_step"], StaleState("another decision won this step"))
    step = payment["approval_chain"][step_index]
    _require(tx["initiator"] != payment["initiator"],
             SelfApproval("initiators never decide their own payments"))
    actor = view.user(tx["initiator"])
    _require(actor is not None, UnknownUser("reviewer unknown"))
    if step["kind"] == "government":
        _require(view.is_government(tx["initiator"]),
                 WrongRole("this step needs a government reviewer"))
    else:
        _require(actor.get("org_id") == step["org_id"],
                 WrongRole(f"this step belongs to {step['org_id']}"))
    verdict = p.get("verdict")
    _require(verdict in ("approve", "reject"), ValidationFailed("verdict must be approve or reject"))
    signature = p.get("signature")
    key = view.active_key(tx["initiator"])
    message = bytes.fromhex(review_digest(p["payment_id"], step_index, verdict))
    _require(isinstance(signature, str) and key is not None
             and verify_signature(key, message, signature),
             BadSignature("review signature does not verify"))
    _verify_challenge_on_chain(
        state, view, tx["initiator"], p.get("challenge_proof"),
        review_op_digest(p["payment_id"], step_index, verdict), p["tick"],
    )
    step.update(
        decided_by=tx["initiator"],
        verdict=verdict,
        signature=signature,
        decided_tick=p["tick"],
        core_height=p["core_height"],
    )
    if verdict == "reject":
        payment["state"] = "Rejected"
        payment["finished_tick"] = p["tick"]
    elif step_index + 1 < len(payment["approval_chain"]):
        payment["current_step"] = step_index + 1
    else:
        payment["state"] = "Approved"
        payment["current_step"] = None
        payment["approved_tick"] = p["tick"]
    state.put(f"payment/{p['payment_id']}", payment)


def expected_instructions(payment: dict, view: RegistryView) -> List[dict]:
    """The only disbursement content an approved payment can produce."""
    scenario = payment["scenario"]
    if scenario == "BuilderWages":
        entries = [
            {"beneficiary": r["worker_id"], "account": r["account"], "amount": r["amount"]}
            for r in payment["wage_roster"]
        ]
    elif payment["mode"] == "Penetrating":
        entries = compute_split(payment["split_plan"], payment["amount"])
    elif scenario in ("DailyReimbursement", "StaffLoan"):
        payee = payment["payee"]
        entries = [
            {
                "beneficiary": payee["beneficiary"],
                "account": payee["account"],
                "amount": payment["amount"],
            }
        ]
    else:
        contract = view.contract(payment["contract_id"])
        payee_org = (
            contract["party_b"]
            if payment["payer_org"] == contract["party_a"]
            else contract["party_a"]
        )
        account = view.first_account(payee_org)
        if account is None:
            raise NoAccount(f"org {payee_org} has no bank account on record")
        entries = [{"beneficiary": payee_org, "account": account, "amount": payment["amount"]}]
    return entries


def _apply_disbursement_issued(state, tx, ctx):
    p = tx["payload"]
    view = _core_view(ctx, p)
    payment = _payment(state, p.get("payment_id"))
    _require(view.is_system(tx["initiator"]),
             Forbidden("disbursement issuance is a platform operation"))
    ordinal = p.get("release_ordinal")
    _require(isinstance(ordinal, int) and ordinal == payment["release_count"],
             StaleState("release ordinal out of sequence"))
    if ordinal == 0:
        _require(payment["state"] == "Approved", WrongState("payment is not approved"))
    else:
        _require(payment["state"] == "PartiallyFailed",
                 WrongState("re-release only applies to partially failed payments"))

    # Re-verify the whole approval chain from recorded state; never trust memory.
    chain = payment["approval_chain"]
    _require(bool(chain), ApprovalChainBroken("no approval chain recorded"))
    for step in chain:
        _require(step.get("verdict") == "approve", ApprovalChainBroken("undecided or rejected step"))
        decided_by = step.get("decided_by")
        _require(isinstance(decided_by, str) and decided_by != payment["initiator"],
                 ApprovalChainBroken("decided_by violates separation of duties"))
        step_view = ctx.core_view_at(step["core_height"]) if isinstance(
            step.get("core_height"), int
        ) else None
        key = step_view.active_key(decided_by) if step_view else None
        message = bytes.fromhex(
            review_digest(p["payment_id"], step["step_index"], step["verdict"])
        )
        _require(
            key is not None
            and isinstance(step.get("signature"), str)
            and verify_signature(key, message, step["signature"]),
            ApprovalChainBroken(f"step {step['step_index']} signature does not verify"),
        )

    # Instructions must be exactly the deterministic consequence of state.
    if ordinal == 0:
        expected = expected_instructions(payment, view)
    else:
        failed = set(payment["failed_instrs"])
        expected = [
            {k: i[k] for k in ("beneficiary", "account", "amount")}
            for i in payment["instructions"]
            if i["instr_id"] in failed
        ]
    declared = p.get("instructions")
    _require(isinstance(declared, list) and declared, ValidationFailed("no instructions declared"))
    if ordinal == 0:
        expected_full = [
            {
                "instr_id": instruction_id(
                    p["payment_id"], e["account"]["account_number"], i
                ),
                "ordinal": i,
                "beneficiary": e["beneficiary"],
                "account": e["account"],
                "amount": e["amount"],
                "purpose": f"{payment['scenario']}/{p['payment_id']}",
            }
            for i, e in enumerate(expected)
        ]
    else:
        failed = set(payment["failed_instrs"])
        expected_full = [i for i in payment["instructions"] if i["instr_id"] in failed]
    _require(declared == expected_full,
             ValidationFailed("declared instructions are not the deterministic consequence"))
    _require(p.get("batch_id") == batch_id_for(p["payment_id"], ordinal),
             ValidationFailed("batch id must derive from the payment and ordinal"))

    debit = p.get("debit_account")
    payer_account = view.first_account(payment["payer_org"])
    if payer_account is None:
        raise NoAccount(f"payer org {payment['payer_org']} has no bank account")
    _require(debit == payer_account, ValidationFailed("debit account must be the payer's account"))
    _require(p.get("bank_id") == payer_account["bank_id"],
             ValidationFailed("batch goes to the debit account's bank"))

    if ordinal == 0:
        total = sum(i["amount"] for i in expected_full)
        _require(total == payment["amount"],
                 ValidationFailed("instructions do not conserve the approved amount"))
        payment["instructions"] = expected_full
    for instr in expected_full:
        payment["instr_status"][instr["instr_id"]] = "Issued"
    payment["release_count"] = ordinal + 1
    payment["failed_instrs"] = []
    payment["state"] = "Queued"
    state.put(f"payment/{p['payment_id']}", payment)


def _apply_disbursement_result(state, tx, ctx):
    p = tx["payload"]
    view = _core_view(ctx, p)
    payment = _payment(state, p.get("payment_id"))
    _require(view.is_system(tx["initiator"]),
             Forbidden("bank results are recorded by the platform"))
    _require(payment["state"] in ("Queued", "Disbursing"),
             WrongState("payment is not awaiting bank results"))
    ordinal = p.get("release_ordinal")
    _require(isinstance(ordinal, int) and ordinal == payment["release_count"] - 1,
             StaleState("results reference a superseded release"))
    results = p.get("results")
    _require(isinstance(results, list) and results, ValidationFailed("empty result set"))
    known = {i["instr_id"] for i in payment["instructions"]}
    statuses = payment["instr_status"]
    for row in results:
        _require(isinstance(row, dict), ValidationFailed("malformed result row"))
        instr_id = row.get("instr_id")
        _require(instr_id in known, UnknownInstruction(f"result for foreign instruction {instr_id}"))
        status = row.get("status")
        _require(status in ev.BANK_STATUSES, ValidationFailed(f"unknown bank status {status}"))
        if status == "Returned":
            _require(isinstance(row.get("reason"), str) and bool(row["reason"]),
                     ValidationFailed("returned instructions need a reason"))
        current = statuses.get(instr_id)
        if current == "Settled":
            _require(status == "Settled", ValidationFailed("settled instructions are final"))
            continue
        statuses[instr_id] = status

    terminal = {"Settled", "Returned"}
    all_states = [statuses.get(i["instr_id"]) for i in payment["instructions"]]
    if all(s == "Settled" for s in all_states):
        payment["state"] = "Confirmed"
        payment["finished_tick"] = p["tick"]
        payment["failed_instrs"] = []
    elif all(s in terminal for s in all_states):
        payment["state"] = "PartiallyFailed"
        payment["failed_instrs"] = sorted(
            i["instr_id"] for i in payment["instructions"] if statuses.get(i["instr_id"]) == "Returned"
        )
    else:
        payment["state"] = "Disbursing"
    state.put(f"payment/{p['payment_id']}", payment)


_HANDLERS = {
    ev.USER_KEY_REGISTERED: _apply_user_key_registered,
    ev.ORG_REGISTERED: _apply_org_registered,
    ev.BANK_ACCOUNT_SET: _apply_bank_account_set,
    ev.PROJECT_CREATED: _apply_project_created,
    ev.PROJECT_STAGE_ADVANCED: _apply_project_stage_advanced,
    ev.CONTRACT_CREATED: _apply_contract_created,
    ev.CONTRACT_REVIEWED: _apply_contract_reviewed,
    ev.CONTRACT_AMENDED: _apply_contract_amended,
    ev.CONTRACT_VOIDED: _apply_contract_voided,
    ev.ANCHOR_CHECKPOINT: _apply_anchor_checkpoint,
    ev.PAYMENT_CREATED: _apply_payment_created,
    ev.SPLIT_PLAN_COMMITTED: _apply_split_plan_committed,
    ev.PAYMENT_SUBMITTED: _apply_payment_submitted,
    ev.PAYMENT_REVIEWED: _apply_payment_reviewed,
    ev.DISBURSEMENT_ISSUED: _apply_disbursement_issued,
    ev.DISBURSEMENT_RESULT: _apply_disbursement_result,
}
