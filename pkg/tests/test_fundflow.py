"""Payment workflow: gating, approvals, release, results."""

import pytest

from xafund.errors import (
    ApprovalChainBroken,
    BadAmount,
    ChallengeFailed,
    ContractNotActive,
    Forbidden,
    MissingPlan,
    NoAccount,
    RosterSumMismatch,
    SelfApproval,
    StageMismatch,
    StaleState,
    UnknownInstruction,
    ValidationFailed,
    WrongRole,
    WrongState,
)
from xafund.fixtures import wage_roster
from xafund.harness import PLATFORM_USER
from xafund.rules import review_digest, review_op_digest, submit_op_digest
from xafund.scenarios import breakout_plan


def test_progress_payment_on_construction_is_draft(runner, seeded):
    pid = runner.next_payment_id()
    runner._create(pid, "ProjectProgressPayment", "Application")
    assert seeded.payments.payment(pid)["state"] == "Draft"


def test_final_payment_requires_completion(runner):
    # C-100 sits on P-001, still at Construction
    from xafund.scenarios import SCENARIO_BINDINGS

    with pytest.raises(StageMismatch):
        runner.d.payments.create_payment(
            "PMT-X", "C-100", "ProjectFinalPayment", "Application",
            1_000_000, "gc-fin", runner.wallet.signer("gc-fin"),
        )


def test_zero_amount_refused(runner):
    with pytest.raises(BadAmount):
        runner.d.payments.create_payment(
            "PMT-X", "C-100", "ProjectProgressPayment", "Application",
            0, "gc-fin", runner.wallet.signer("gc-fin"),
        )


def test_payment_on_inactive_contract(runner, seeded, wallet):
    seeded.registry.create_contract(
        "C-DRAFT", "P-001", "GC-001", "SUP-001", 1_000_000,
        "gc-admin", wallet.signer("gc-admin"),
    )
    with pytest.raises(ContractNotActive):
        seeded.payments.create_payment(
            "PMT-X", "C-DRAFT", "SupplierMaterialPayment", "Application",
            1_000, "sup-fin", wallet.signer("sup-fin"),
        )


def test_initiator_must_belong_to_initiating_org(runner):
    # Application mode on the supply contract starts payee-side (SUP-001)
    with pytest.raises(Forbidden):
        runner.d.payments.create_payment(
            "PMT-X", "C-300", "SupplierMaterialPayment", "Application",
            1_000_000, "gc-fin", runner.wallet.signer("gc-fin"),
        )


def test_roster_sum_mismatch(runner, seeded):
    pid = runner.next_payment_id()
    seeded.payments.create_payment(
        pid, "C-400", "BuilderWages", "Application", 9_000_000,
        "lab-fin", runner.wallet.signer("lab-fin"),
    )
    with pytest.raises(RosterSumMismatch):
        seeded.payments.attach_roster(
            pid, wage_roster(), "lab-fin", runner.wallet.signer("lab-fin")
        )


def test_attach_after_submit_is_wrong_state(runner, seeded):
    pid = runner.next_payment_id()
    actor = runner._create(pid, "ProjectProgressPayment", "Penetrating")
    runner._attach(pid, "ProjectProgressPayment", "Penetrating", actor)
    runner._submit(pid, actor)
    with pytest.raises(WrongState):
        seeded.payments.attach_plan(pid, breakout_plan(), actor, runner.wallet.signer(actor))


def test_penetrating_submit_without_plan(runner):
    pid = runner.next_payment_id()
    actor = runner._create(pid, "ProjectProgressPayment", "Penetrating")
    with pytest.raises(MissingPlan):
        runner._submit(pid, actor)


def test_stale_challenge_rejected(runner, seeded):
    pid = runner.next_payment_id()
    actor = runner._create(pid, "ProjectProgressPayment", "Application")
    op = submit_op_digest(pid)
    issued = seeded.challenges.issue(actor, op)
    proof = runner.wallet.challenge_proof(actor, issued, op)
    seeded.clock.advance(seeded.network.config.challenge_ttl + 1)
    with pytest.raises(ChallengeFailed):
        seeded.payments.submit_payment(pid, actor, runner.wallet.signer(actor), proof)


def test_challenge_reuse_rejected(runner, seeded):
    pid = runner.next_payment_id()
    actor = runner._create(pid, "ProjectProgressPayment", "Application")
    op = submit_op_digest(pid)
    issued = seeded.challenges.issue(actor, op)
    proof = runner.wallet.challenge_proof(actor, issued, op)
    seeded.payments.submit_payment(pid, actor, runner.wallet.signer(actor), proof)
    pid2 = runner.next_payment_id()
    actor2 = runner._create(pid2, "ProjectProgressPayment", "Application")
    with pytest.raises(ChallengeFailed):
        seeded.payments.submit_payment(pid2, actor2, runner.wallet.signer(actor2), proof)


def test_review_role_and_order(runner, seeded):
    pid = runner.next_payment_id()
    actor = runner._create(pid, "ProjectProgressPayment", "Application")
    runner._submit(pid, actor)

    with pytest.raises(SelfApproval):
        runner._review(pid, 0, "approve", actor)
    with pytest.raises(WrongRole):
        runner._review(pid, 0, "approve", "sup-fin")  # step 0 belongs to OWN-001
    out = runner._review(pid, 0, "approve", "own-fin")
    assert out["state"] == "InReview"
    with pytest.raises(WrongRole):
        runner._review(pid, 1, "approve", "gc-pm")  # final step needs government
    out = runner._review(pid, 1, "approve", "gov-rev")
    assert out["state"] == "Approved"


def test_concurrent_review_conflict(runner, seeded):
    pid = runner.next_payment_id()
    actor = runner._create(pid, "ProjectProgressPayment", "Application")
    runner._submit(pid, actor)
    runner._review(pid, 0, "approve", "own-fin")
    # own-admin raced for step 0 and lost: the chain already moved to step 1
    with pytest.raises(StaleState):
        runner._review(pid, 0, "approve", "own-admin")


def test_reject_is_terminal(runner, seeded):
    pid = runner.next_payment_id()
    actor = runner._create(pid, "ProjectProgressPayment", "Application")
    runner._submit(pid, actor)
    out = runner._review(pid, 0, "reject", "own-fin")
    assert out["state"] == "Rejected"
    with pytest.raises(WrongState):
        runner._review(pid, 0, "approve", "own-fin")
    with pytest.raises(WrongState):
        seeded.payments.release_to_bank(pid)
    assert seeded.payments.payment(pid)["instructions"] == []


def test_release_requires_approval(runner, seeded):
    pid = runner.next_payment_id()
    actor = runner._create(pid, "ProjectProgressPayment", "Application")
    runner._submit(pid, actor)
    with pytest.raises(WrongState):
        seeded.payments.release_to_bank(pid)


def test_release_reverifies_approval_signatures(runner, seeded):
    pid = runner.next_payment_id()
    actor = runner._create(pid, "ProjectProgressPayment", "Application")
    runner._submit(pid, actor)
    runner._approve_all(pid, actor, [])
    chain_id, record = seeded.payments.locate(pid)
    record["approval_chain"][0]["signature"] = "00" * 64
    seeded.network.chain(chain_id).state.put(f"payment/{pid}", record)
    with pytest.raises(ApprovalChainBroken):
        seeded.payments.release_to_bank(pid)


def test_release_needs_beneficiary_account(runner, seeded, wallet):
    # a counterparty org with no bank account on record cannot be paid
    seeded.registry.register_org(
        "BARE-001", "No Account Org", "Supplier", "bare-admin",
        PLATFORM_USER, seeded.platform_signer,
    )
    seeded.registry.create_contract(
        "C-BARE", "P-001", "GC-001", "BARE-001", 1_000_000,
        "gc-admin", wallet.signer("gc-admin"),
    )
    from xafund import rules

    payment = {
        "scenario": "SupplierMaterialPayment", "mode": "Authorized",
        "payer_org": "GC-001", "contract_id": "C-BARE", "amount": 500_000,
        "payee": None, "split_plan": None, "wage_roster": None,
    }
    with pytest.raises(NoAccount):
        rules.expected_instructions(payment, seeded.network.registry_view())


def test_partial_failure_and_retry(runner, seeded):
    out = runner.run("BuilderWages", "Penetrating", "partial-fail-retry")
    assert out["ok"], out
    pid = out["payment_id"]
    payment = seeded.payments.payment(pid)
    assert payment["state"] == "Confirmed"
    assert payment["release_count"] == 2
    assert sum(i["amount"] for i in payment["instructions"]) == payment["amount"]
    # bank ledger never double-debits, even across the retry
    rows = seeded.banks["BATCH"].ledger_rows()
    ids = [r["instr_id"] for r in rows]
    assert len(ids) == len(set(ids))


def test_foreign_instruction_result_rejected(runner, seeded):
    out = runner.run("ProjectProgressPayment", "Application", "happy")
    pid = out["payment_id"]
    from xafund import events as ev
    from xafund.ledger.chain import build_tx

    chain_id, record = seeded.payments.locate(pid)
    payload = ev.disbursement_result(
        seeded.clock.tick(), seeded.network.core.tip, pid, 0,
        [{"instr_id": "ff" * 32, "status": "Settled"}],
    )
    tx = build_tx(payload, PLATFORM_USER, seeded.platform_signer)
    result = seeded.network.submit_and_commit(chain_id, tx)
    assert not result.applied
    # Confirmed payments take no further results at all
    assert result.error == "WRONG_STATE"


def test_wage_roster_rejects_corporate_accounts(runner, seeded):
    pid = runner.next_payment_id()
    seeded.payments.create_payment(
        pid, "C-400", "BuilderWages", "Application", 1_000,
        "lab-fin", runner.wallet.signer("lab-fin"),
    )
    roster = [
        {
            "worker_id": "W-009",
            "account": {
                "bank_id": "INSTANT",
                "account_number": wage_roster()[0]["account"]["account_number"],
                "holder": "W-009",
                "kind": "Corporate",
            },
            "amount": 1_000,
        }
    ]
    with pytest.raises(ValidationFailed):
        seeded.payments.attach_roster(pid, roster, "lab-fin", runner.wallet.signer("lab-fin"))


def test_unknown_instruction_while_disbursing(runner, seeded):
    # park a BATCH-settled payment in Queued, then feed it a foreign result
    pid = runner.next_payment_id()
    actor = runner._create(pid, "SubcontractPayment", "Authorized")
    runner._submit(pid, actor)
    runner._approve_all(pid, actor, [])
    seeded.payments.release_to_bank(pid)
    assert seeded.payments.payment(pid)["state"] == "Queued"
    from xafund import events as ev
    from xafund.ledger.chain import build_tx

    chain_id, _ = seeded.payments.locate(pid)
    payload = ev.disbursement_result(
        seeded.clock.tick(), seeded.network.core.tip, pid, 0,
        [{"instr_id": "ee" * 32, "status": "Settled"}],
    )
    tx = build_tx(payload, PLATFORM_USER, seeded.platform_signer)
    result = seeded.network.submit_and_commit(chain_id, tx)
    assert not result.applied
    assert result.error == "UNKNOWN_INSTRUCTION"
