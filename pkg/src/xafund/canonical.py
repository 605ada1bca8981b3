"""Canonical byte encoding and digests.

Everything that gets hashed or signed in this system goes through
``canonical_bytes``: JSON with lexicographically sorted keys, no whitespace,
UTF-8, and raw (non-ASCII-escaped) characters.  Two processes serializing the
same value structure always produce identical bytes, which is what makes
state roots and transaction ids reproducible across replays.

Floats are rejected outright: all money amounts are integer fen and logical
time is an integer tick, so a float anywhere in a hashed structure is a bug.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

# 64 hex chars == 32 bytes; the null link for the first block of a chain.
ZERO_DIGEST = "0" * 64


def _reject_floats(value: Any) -> None:
    if isinstance(value, float):
        raise TypeError("floats are not allowed in canonical structures")
    if isinstance(value, dict):
        for k, v in value.items():
            if not isinstance(k, str):
                raise TypeError("canonical object keys must be strings")
            _reject_floats(v)
    elif isinstance(value, (list, tuple)):
        for v in value:
            _reject_floats(v)


def canonical_bytes(value: Any) -> bytes:
    """Deterministic serialization of a JSON-compatible structure."""
    _reject_floats(value)
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_of(value: Any) -> str:
    """sha256 hex digest of the canonical encoding of *value*."""
    return sha256_hex(canonical_bytes(value))


def is_hex_digest(value: Any) -> bool:
    if not isinstance(value, str) or len(value) != 64:
        return False
    try:
        bytes.fromhex(value)
    except ValueError:
        return False
    return True
