"""Three deliberately quirky mock banks.

INSTANT   settles every valid instruction the moment a batch is accepted.
BATCH     caps sub-batches at 100 instructions and settles a sub-batch three
          ticks after acceptance; until then instructions sit queued.
FLAKY     fails whole submissions while a scripted fault counter is armed,
          validates accounts strictly (bad checksum bounces the instruction)
          and settles survivors immediately.

Every bank enforces at-most-once debiting per instruction id on its own
internal ledger (an inspectable JSONL file), no matter how often a batch is
resubmitted or retried.
"""

from __future__ import annotations

import json
import os
import threading
from typing import Dict, List, Optional

from ..amounts import mod97_valid
from ..canonical import digest_of
from . import wire

BATCH_BANK_CAP = 100
BATCH_BANK_SETTLE_TICKS = 3


class MockBank:
    """Base bank: idempotent batch intake plus a debit-once ledger."""

    native_accepted = "ACCEPTED"
    native_settled = "SETTLED"
    native_returned = "RETURNED"

    intake_cap: Optional[int] = None  # max instructions per submission

    def __init__(self, bank_id: str, clock, ledger_path: str):
        self.bank_id = bank_id
        self.clock = clock
        self.ledger_path = ledger_path
        self.bounce_once: set = set()  # account numbers to refuse exactly once
        self._batches: Dict[str, dict] = {}
        self._debited: set = set()
        self._lock = threading.Lock()
        os.makedirs(os.path.dirname(ledger_path), exist_ok=True)
        open(ledger_path, "a").close()

    # -- channel -------------------------------------------------------------

    def handle(self, request_text: str) -> str:
        try:
            request = wire.decode(request_text)
        except json.JSONDecodeError:
            return wire.error_response("BAD_REQUEST", "undecodable message")
        kind = request.get("kind")
        if kind == "submit_batch":
            return self._handle_submit(request.get("batch") or {})
        if kind == "poll_batch":
            return self._handle_poll(request.get("batch_id"))
        return wire.error_response("BAD_REQUEST", f"unknown message kind {kind}")

    # -- submission ------------------------------------------------------------

    def _handle_submit(self, batch: dict) -> str:
        batch_id = batch.get("batch_id")
        instructions = batch.get("instructions") or []
        if not batch_id or not instructions:
            return wire.error_response("BAD_REQUEST", "batch needs an id and instructions")
        if self.intake_cap is not None and len(instructions) > self.intake_cap:
            return wire.error_response(
                "BATCH_TOO_LARGE", f"this bank takes at most {self.intake_cap} instructions"
            )
        content_hash = digest_of(
            [[i.get("instr_id"), i.get("amount"), i.get("account", {}).get("account_number")]
             for i in instructions]
        )
        with self._lock:
            known = self._batches.get(batch_id)
            if known is not None:
                if known["content_hash"] != content_hash:
                    return wire.error_response(
                        "DUPLICATE_BATCH_DIFFERENT_CONTENT",
                        "batch id reused with different content",
                    )
                return wire.encode(known["ack"])
            fault = self._pre_submit_fault()
            if fault is not None:
                return fault
            record = {
                "content_hash": content_hash,
                "submit_tick": self.clock.now,
                "statuses": {},
                "reasons": {},
                "instructions": {i["instr_id"]: i for i in instructions},
            }
            rejected = []
            for instr in instructions:
                status, reason = self._admit(instr)
                record["statuses"][instr["instr_id"]] = status
                if reason:
                    record["reasons"][instr["instr_id"]] = reason
                if status == self.native_returned:
                    rejected.append({"instr_id": instr["instr_id"], "reason": reason})
            self._plan_settlement(record)
            ack = {
                "kind": "submit_ack",
                "batch_id": batch_id,
                "accepted_count": len(instructions) - len(rejected),
                "rejected": rejected,
            }
            record["ack"] = ack
            self._batches[batch_id] = record
            self._settle_due(record)
            return wire.encode(ack)

    def _pre_submit_fault(self) -> Optional[str]:
        return None

    def _admit(self, instr: dict) -> tuple:
        """(native status, reason) on intake; default accepts everything
        except accounts scripted to bounce once."""
        number = (instr.get("account") or {}).get("account_number")
        if number in self.bounce_once:
            self.bounce_once.discard(number)
            return self.native_returned, "ACCT_CLOSED"
        return self.native_accepted, None

    def _plan_settlement(self, record: dict) -> None:
        """Default: settle everything accepted immediately."""
        record["settle_at"] = {
            instr_id: self.clock.now
            for instr_id, status in record["statuses"].items()
            if status == self.native_accepted
        }

    # -- polling ---------------------------------------------------------------

    def _handle_poll(self, batch_id: Optional[str]) -> str:
        with self._lock:
            record = self._batches.get(batch_id)
            if record is None:
                return wire.error_response("UNKNOWN_BATCH", f"batch {batch_id} unknown")
            self._settle_due(record)
            statuses = []
            for instr_id in record["instructions"]:
                row = {"instr_id": instr_id, "status": record["statuses"][instr_id]}
                reason = record["reasons"].get(instr_id)
                if reason:
                    row["reason"] = reason
                statuses.append(row)
            return wire.encode(
                {"kind": "batch_status", "batch_id": batch_id, "statuses": statuses}
            )

    def _settle_due(self, record: dict) -> None:
        now = self.clock.now
        for instr_id, due in record.get("settle_at", {}).items():
            if record["statuses"][instr_id] == self.native_accepted and now >= due:
                self._debit(record["instructions"][instr_id])
                record["statuses"][instr_id] = self.native_settled

    # -- ledger ------------------------------------------------------------------

    def _debit(self, instr: dict) -> None:
        if instr["instr_id"] in self._debited:
            return
        self._debited.add(instr["instr_id"])
        with open(self.ledger_path, "a", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "instr_id": instr["instr_id"],
                        "account": instr["account"]["account_number"],
                        "amount": instr["amount"],
                        "tick": self.clock.now,
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    def ledger_rows(self) -> List[dict]:
        rows = []
        with open(self.ledger_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
        return rows

    def native_status_map(self) -> Dict[str, str]:
        return {
            self.native_accepted: "Accepted",
            self.native_settled: "Settled",
            self.native_returned: "Returned",
        }


class InstantBank(MockBank):
    native_accepted = "RECEIVED"
    native_settled = "PAID"
    native_returned = "REFUSED"


class BatchBank(MockBank):
    """Caps submissions at 100 instructions and settles them 3 ticks later."""

    native_accepted = "QUEUED"
    native_settled = "DONE"
    native_returned = "KICKED"
    intake_cap = BATCH_BANK_CAP

    def _plan_settlement(self, record: dict) -> None:
        settle_tick = record["submit_tick"] + BATCH_BANK_SETTLE_TICKS
        record["settle_at"] = {
            instr_id: settle_tick
            for instr_id, status in record["statuses"].items()
            if status == self.native_accepted
        }


class FlakyBank(MockBank):
    native_accepted = "HOLD"
    native_settled = "OK"
    native_returned = "BOUNCED"

    def __init__(self, bank_id: str, clock, ledger_path: str):
        super().__init__(bank_id, clock, ledger_path)
        self.fail_next = 0  # scripted transient faults
        self.submit_attempts = 0

    def _pre_submit_fault(self) -> Optional[str]:
        self.submit_attempts += 1
        if self.fail_next > 0:
            self.fail_next -= 1
            return wire.error_response("TEMPORARY_FAILURE", "simulated outage, retry later")
        return None

    def _admit(self, instr: dict) -> tuple:
        account = instr.get("account") or {}
        if not mod97_valid(account.get("account_number", "")):
            return self.native_returned, "ACCT_INVALID"
        return super()._admit(instr)
