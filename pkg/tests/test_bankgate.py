"""Bank adaptation layer: idempotency, caps, quirks, normalization."""

import threading

import pytest

from xafund.amounts import make_account_number
from xafund.bankgate.banks import BATCH_BANK_SETTLE_TICKS, BatchBank, FlakyBank, InstantBank, MockBank
from xafund.bankgate.gateway import BankGateway
from xafund.clock import LogicalClock
from xafund.errors import (
    DuplicateBatchDifferentContent,
    RetriesExhausted,
    TransientBankError,
    UnknownBank,
    UnknownBatch,
    ValidationFailed,
)


@pytest.fixture
def env(tmp_path):
    clock = LogicalClock()
    gateway = BankGateway(clock)
    banks = {
        "INSTANT": InstantBank("INSTANT", clock, str(tmp_path / "INSTANT.jsonl")),
        "BATCH": BatchBank("BATCH", clock, str(tmp_path / "BATCH.jsonl")),
        "FLAKY": FlakyBank("FLAKY", clock, str(tmp_path / "FLAKY.jsonl")),
    }
    for bank in banks.values():
        gateway.register(bank)
    return clock, gateway, banks


def make_batch(batch_id, count, start=0, amount=1_000):
    return {
        "batch_id": batch_id,
        "bank_id": "X",
        "debit_account": {"bank_id": "X", "account_number": make_account_number("5000"),
                          "holder": "payer", "kind": "Corporate"},
        "instructions": [
            {
                "instr_id": f"{start + i:064x}",
                "ordinal": i,
                "beneficiary": f"org-{i}",
                "account": {
                    "bank_id": "X",
                    "account_number": make_account_number(f"7{start + i:05d}"),
                    "holder": f"org-{i}",
                    "kind": "Corporate",
                },
                "amount": amount + i,
                "purpose": "test",
            }
            for i in range(count)
        ],
    }


def test_instant_settles_immediately(env):
    clock, gateway, banks = env
    ack = gateway.submit_batch("INSTANT", make_batch("b1", 3))
    assert ack["accepted_count"] == 3 and ack["rejected"] == []
    statuses = gateway.poll_batch("INSTANT", "b1")
    assert [s["status"] for s in statuses] == ["Settled"] * 3


def test_resubmit_is_idempotent(env):
    clock, gateway, banks = env
    batch = make_batch("b1", 5)
    first = gateway.submit_batch("INSTANT", batch)
    rows_before = banks["INSTANT"].ledger_rows()
    second = gateway.submit_batch("INSTANT", batch)
    assert {k: second[k] for k in ("batch_id", "accepted_count", "rejected")} == {
        k: first[k] for k in ("batch_id", "accepted_count", "rejected")
    }
    assert banks["INSTANT"].ledger_rows() == rows_before


def test_same_batch_id_different_content(env):
    clock, gateway, banks = env
    gateway.submit_batch("INSTANT", make_batch("b1", 2))
    altered = make_batch("b1", 2)
    altered["instructions"][0]["amount"] += 1
    with pytest.raises(DuplicateBatchDifferentContent):
        gateway.submit_batch("INSTANT", altered)


def test_cap_splitting_covers_all_150(env):
    clock, gateway, banks = env
    batch = make_batch("big", 150)
    ack = gateway.submit_batch("BATCH", batch)
    assert ack["sub_batches"] == 2  # ceil(150/100) by count partitioning
    assert ack["accepted_count"] == 150
    statuses = gateway.poll_batch("BATCH", "big")
    assert len(statuses) == 150
    # split transparency: same multiset of (credit account, amount) pairs
    sent = sorted(
        (i["account"]["account_number"], i["amount"]) for i in batch["instructions"]
    )
    seen = sorted(
        (i["account"]["account_number"], i["amount"])
        for record in banks["BATCH"]._batches.values()
        for i in record["instructions"].values()
    )
    assert seen == sent


def test_batch_bank_settles_after_three_ticks(env):
    clock, gateway, banks = env
    gateway.submit_batch("BATCH", make_batch("b1", 4))
    assert [s["status"] for s in gateway.poll_batch("BATCH", "b1")] == ["Accepted"] * 4
    clock.advance(BATCH_BANK_SETTLE_TICKS - 1)
    assert [s["status"] for s in gateway.poll_batch("BATCH", "b1")] == ["Accepted"] * 4
    clock.advance(1)
    statuses = gateway.poll_batch("BATCH", "b1")
    assert [s["status"] for s in statuses] == ["Settled"] * 4
    assert len(banks["BATCH"].ledger_rows()) == 4


def test_flaky_retry_succeeds_on_third_attempt(env):
    clock, gateway, banks = env
    banks["FLAKY"].fail_next = 2
    with pytest.raises(TransientBankError):
        gateway.submit_batch("FLAKY", make_batch("b1", 2))
    ack = gateway.retry_transient("FLAKY", "b1")
    assert ack["accepted_count"] == 2
    assert banks["FLAKY"].submit_attempts == 3


def test_flaky_retries_exhausted_after_five_attempts(env):
    clock, gateway, banks = env
    banks["FLAKY"].fail_next = 99
    with pytest.raises(TransientBankError):
        gateway.submit_batch("FLAKY", make_batch("b1", 1))
    with pytest.raises(RetriesExhausted):
        gateway.retry_transient("FLAKY", "b1")
    assert banks["FLAKY"].submit_attempts == 5


def test_retry_on_settled_batch_is_noop(env):
    clock, gateway, banks = env
    gateway.submit_batch("FLAKY", make_batch("b1", 2))
    rows = banks["FLAKY"].ledger_rows()
    ack = gateway.retry_transient("FLAKY", "b1")
    assert ack["accepted_count"] == 2
    assert banks["FLAKY"].ledger_rows() == rows


def test_flaky_strict_account_validation(env):
    clock, gateway, banks = env
    batch = make_batch("b1", 3)
    batch["instructions"][1]["account"]["account_number"] = "1234567890"  # bad checksum
    ack = gateway.submit_batch("FLAKY", batch)
    assert ack["accepted_count"] == 2
    assert ack["rejected"][0]["reason"] == "ACCT_INVALID"
    statuses = {s["instr_id"]: s for s in gateway.poll_batch("FLAKY", "b1")}
    bad = batch["instructions"][1]["instr_id"]
    assert statuses[bad]["status"] == "Returned"
    assert statuses[bad]["reason"] == "ACCT_INVALID"
    assert all(s["status"] == "Settled" for i, s in statuses.items() if i != bad)


def test_normalization_totality(env):
    clock, gateway, banks = env
    shared = {"Accepted", "Settled", "Returned"}
    for bank in banks.values():
        mapping = bank.native_status_map()
        assert set(mapping.values()) <= shared
        assert {bank.native_accepted, bank.native_settled, bank.native_returned} == set(mapping)

    class WeirdBank(MockBank):
        def native_status_map(self):
            return {}  # forgets every mapping

    weird = WeirdBank("WEIRD", clock, str(banks["INSTANT"].ledger_path) + ".weird")
    gateway.register(weird)
    gateway.submit_batch("WEIRD", make_batch("w1", 1))
    with pytest.raises(ValidationFailed):
        gateway.poll_batch("WEIRD", "w1")


def test_unknown_bank_and_batch(env):
    clock, gateway, banks = env
    with pytest.raises(UnknownBank):
        gateway.submit_batch("NOPE", make_batch("b1", 1))
    with pytest.raises(UnknownBatch):
        gateway.poll_batch("INSTANT", "never-submitted")
    with pytest.raises(UnknownBatch):
        gateway.retry_transient("INSTANT", "never-submitted")


def test_concurrent_submissions_never_double_debit(env):
    clock, gateway, banks = env
    batch = make_batch("race", 40)
    errors = []

    def hammer():
        try:
            gateway.submit_batch("INSTANT", batch)
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=hammer) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    rows = banks["INSTANT"].ledger_rows()
    ids = [r["instr_id"] for r in rows]
    assert len(ids) == 40
    assert len(set(ids)) == 40
