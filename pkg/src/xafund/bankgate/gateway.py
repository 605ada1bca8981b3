"""The payment adaptation layer: one interface over heterogeneous banks.

The gateway speaks the wire protocol to whichever mock bank a batch is bound
for, normalizes native statuses to the shared enum, transparently splits
batches for banks with intake caps, serializes operations per batch id, and
owns the bounded-retry policy for transient faults.
"""

from __future__ import annotations

import threading
from typing import Dict, List, Optional

from ..errors import (
    DuplicateBatchDifferentContent,
    RetriesExhausted,
    TransientBankError,
    UnknownBank,
    UnknownBatch,
    ValidationFailed,
)
from . import wire
from .banks import MockBank

MAX_SUBMIT_ATTEMPTS = 5


class BankGateway:
    def __init__(self, clock):
        self.clock = clock
        self._banks: Dict[str, MockBank] = {}
        self._batch_locks: Dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        # batch_id -> {"bank_id", "parts": [(sub_batch_id, request_text)]}
        self._submissions: Dict[str, dict] = {}

    def register(self, bank: MockBank) -> MockBank:
        self._banks[bank.bank_id] = bank
        return bank

    def bank(self, bank_id: str) -> MockBank:
        bank = self._banks.get(bank_id)
        if bank is None:
            raise UnknownBank(f"no adapter for bank {bank_id}")
        return bank

    def bank_ids(self) -> List[str]:
        return sorted(self._banks)

    def _lock_for(self, batch_id: str) -> threading.Lock:
        with self._locks_guard:
            if batch_id not in self._batch_locks:
                self._batch_locks[batch_id] = threading.Lock()
            return self._batch_locks[batch_id]

    # -- operations -----------------------------------------------------------

    def submit_batch(self, bank_id: str, batch: dict) -> dict:
        """Submit a disbursement batch; idempotent per batch id.

        Splits into cap-sized sub-batches when the target bank has an intake
        cap; the merged ack covers the whole original batch.  Raises
        TransientBankError when the bank reports a temporary fault; callers
        recover with retry_transient.
        """
        bank = self.bank(bank_id)
        batch_id = batch.get("batch_id")
        instructions = batch.get("instructions") or []
        if not batch_id or not instructions:
            raise ValidationFailed("batch needs a batch_id and instructions")
        with self._lock_for(batch_id):
            parts = self._split_for(bank, batch)
            self._submissions[batch_id] = {"bank_id": bank_id, "parts": parts}
            return self._submit_parts(bank, batch_id, parts)

    def retry_transient(self, bank_id: str, batch_id: str) -> dict:
        """Bounded exponential backoff over the previously submitted batch."""
        bank = self.bank(bank_id)
        submission = self._submissions.get(batch_id)
        if submission is None or submission["bank_id"] != bank_id:
            raise UnknownBatch(f"batch {batch_id} was never submitted to {bank_id}")
        with self._lock_for(batch_id):
            backoff = 1
            for _ in range(MAX_SUBMIT_ATTEMPTS - 1):
                self.clock.advance(backoff)
                backoff *= 2
                try:
                    return self._submit_parts(bank, batch_id, submission["parts"])
                except TransientBankError:
                    continue
            raise RetriesExhausted(
                f"batch {batch_id} still failing after {MAX_SUBMIT_ATTEMPTS} attempts"
            )

    def poll_batch(self, bank_id: str, batch_id: str) -> List[dict]:
        """Normalized per-instruction statuses for a submitted batch."""
        bank = self.bank(bank_id)
        submission = self._submissions.get(batch_id)
        sub_ids = (
            [part_id for part_id, _ in submission["parts"]]
            if submission is not None and submission["bank_id"] == bank_id
            else [batch_id]
        )
        mapping = bank.native_status_map()
        out = []
        for sub_id in sub_ids:
            response = wire.decode(bank.handle(wire.poll_batch_request(sub_id)))
            if response.get("kind") == "error":
                if response.get("code") == "UNKNOWN_BATCH":
                    raise UnknownBatch(response.get("message", batch_id))
                raise ValidationFailed(response.get("message", "bank error"))
            for row in response["statuses"]:
                status = mapping.get(row["status"])
                if status is None:
                    raise ValidationFailed(
                        f"bank {bank_id} produced unmapped status {row['status']!r}"
                    )
                normalized = {"instr_id": row["instr_id"], "status": status}
                if row.get("reason"):
                    normalized["reason"] = row["reason"]
                out.append(normalized)
        return out

    # -- helpers ----------------------------------------------------------------

    def _split_for(self, bank: MockBank, batch: dict) -> List[tuple]:
        instructions = batch["instructions"]
        cap = bank.intake_cap
        if cap is None or len(instructions) <= cap:
            return [(batch["batch_id"], wire.submit_batch_request(batch))]
        parts = []
        for n, start in enumerate(range(0, len(instructions), cap)):
            sub = dict(batch)
            sub["batch_id"] = f"{batch['batch_id']}:{n}"
            sub["instructions"] = instructions[start : start + cap]
            parts.append((sub["batch_id"], wire.submit_batch_request(sub)))
        return parts

    def _submit_parts(self, bank: MockBank, batch_id: str, parts: List[tuple]) -> dict:
        accepted = 0
        rejected: List[dict] = []
        for _, request in parts:
            ack = self._decode_submit(bank.handle(request))
            accepted += ack["accepted_count"]
            rejected.extend(ack["rejected"])
        return {
            "batch_id": batch_id,
            "accepted_count": accepted,
            "rejected": rejected,
            "sub_batches": len(parts),
        }

    def _decode_submit(self, response_text: str) -> dict:
        response = wire.decode(response_text)
        if response.get("kind") == "submit_ack":
            return {
                "batch_id": response["batch_id"],
                "accepted_count": response["accepted_count"],
                "rejected": response["rejected"],
            }
        code = response.get("code")
        if code == "TEMPORARY_FAILURE":
            raise TransientBankError(response.get("message", "bank unavailable"))
        if code == "DUPLICATE_BATCH_DIFFERENT_CONTENT":
            raise DuplicateBatchDifferentContent(response.get("message", ""))
        raise ValidationFailed(response.get("message", "bank rejected the request"))
