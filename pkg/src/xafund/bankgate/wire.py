"""Bank wire messages.

The gateway and each mock bank talk through an in-process channel carrying
JSON text, standing in for a bank-enterprise interconnection interface.
Message kinds:

    -> {"kind": "submit_batch", "batch": {batch_id, bank_id, debit_account,
                                          instructions: [...]}}
    <- {"kind": "submit_ack", "batch_id", "accepted_count",
        "rejected": [{"instr_id", "reason"}]}

    -> {"kind": "poll_batch", "batch_id"}
    <- {"kind": "batch_status", "batch_id",
        "statuses": [{"instr_id", "status": <bank-native>, "reason"?}]}

    <- {"kind": "error", "code", "message"}   (any request can fail)

Native status vocabularies differ per bank on purpose; the gateway owns the
normalization to the shared {Accepted, Settled, Returned} enum.
"""

from __future__ import annotations

import json


def encode(message: dict) -> str:
    return json.dumps(message, sort_keys=True)


def decode(text: str) -> dict:
    return json.loads(text)


def submit_batch_request(batch: dict) -> str:
    return encode({"kind": "submit_batch", "batch": batch})


def poll_batch_request(batch_id: str) -> str:
    return encode({"kind": "poll_batch", "batch_id": batch_id})


def error_response(code: str, message: str) -> str:
    return encode({"kind": "error", "code": code, "message": message})
