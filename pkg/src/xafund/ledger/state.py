"""Replayable key-value state with a Merkle root.

Chain state is a plain dict of JSON values keyed by strings
(``org/<id>``, ``payment/<id>``, ...).  The root commits to the full
key-sorted (key, value-hash) pair set, so two replays of the same block
sequence agree on a single 256-bit digest per height.

Leaf hashes are cached per key and only recomputed for keys touched since
the last root, which keeps per-block root computation linear in state size
with small constants.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any, Dict, Iterator, List, Optional, Tuple

from ..canonical import canonical_bytes, sha256_hex

# Root of a state (or tx list) with no entries.
EMPTY_ROOT = sha256_hex(b"xafund:empty")


def merkle_root(leaves: List[bytes]) -> str:
    """Pairwise sha256 tree; odd nodes are paired with themselves."""
    if not leaves:
        return EMPTY_ROOT
    level = leaves
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            left = level[i]
            right = level[i + 1] if i + 1 < len(level) else left
            nxt.append(hashlib.sha256(left + right).digest())
        level = nxt
    return level[0].hex()


def merkle_root_hex(leaf_hexes: List[str]) -> str:
    return merkle_root([bytes.fromhex(h) for h in leaf_hexes])


def state_leaf(key: str, value_hash: str) -> bytes:
    return hashlib.sha256(canonical_bytes([key, value_hash])).digest()


class StateStore:
    """Mutable state with journaled per-transaction rollback."""

    def __init__(self) -> None:
        self._data: Dict[str, Any] = {}
        self._leaves: Dict[str, bytes] = {}
        self._dirty: set = set()
        self._journal: Optional[List[Tuple[str, Any, bool]]] = None
        self._block_journal: Optional[List[Tuple[str, Any, bool]]] = None

    # -- reads --------------------------------------------------------------

    def get(self, key: str, default: Any = None) -> Any:
        value = self._data.get(key)
        if value is None:
            return default
        # round-trip copy: callers must never see aliased internals
        return json.loads(json.dumps(value))

    def peek(self, key: str) -> Any:
        """Read without a defensive copy; caller promises not to mutate."""
        return self._data.get(key)

    def has(self, key: str) -> bool:
        return key in self._data

    def keys(self) -> Iterator[str]:
        return iter(self._data.keys())

    def items_sorted(self) -> List[Tuple[str, Any]]:
        return sorted(self._data.items())

    def __len__(self) -> int:
        return len(self._data)

    # -- writes --------------------------------------------------------------

    def put(self, key: str, value: Any) -> None:
        canonical_bytes(value)  # validates structure (no floats, str keys)
        if self._journal is not None:
            self._journal.append((key, self._data.get(key), key in self._data))
        self._data[key] = json.loads(json.dumps(value))
        self._dirty.add(key)

    def delete(self, key: str) -> None:
        if key not in self._data:
            return
        if self._journal is not None:
            self._journal.append((key, self._data[key], True))
        del self._data[key]
        self._dirty.add(key)

    # -- per-transaction journal ----------------------------------------------

    def begin(self) -> None:
        self._journal = []

    def commit_tx(self) -> None:
        if self._block_journal is not None and self._journal:
            self._block_journal.extend(self._journal)
        self._journal = None

    def rollback_tx(self) -> None:
        assert self._journal is not None
        self._undo(self._journal)
        self._journal = None

    # -- per-block journal (rollback on failed quorum) --------------------------

    def begin_block(self) -> None:
        self._block_journal = []

    def commit_block(self) -> None:
        self._block_journal = None

    def rollback_block(self) -> None:
        assert self._block_journal is not None
        self._undo(self._block_journal)
        self._block_journal = None

    def _undo(self, journal: List[Tuple[str, Any, bool]]) -> None:
        for key, old, existed in reversed(journal):
            if existed:
                self._data[key] = old
            else:
                self._data.pop(key, None)
            self._dirty.add(key)

    # -- root -----------------------------------------------------------------

    def root(self) -> str:
        for key in self._dirty:
            if key in self._data:
                value_hash = sha256_hex(canonical_bytes(self._data[key]))
                self._leaves[key] = state_leaf(key, value_hash)
            else:
                self._leaves.pop(key, None)
        self._dirty.clear()
        ordered = [self._leaves[k] for k in sorted(self._leaves)]
        return merkle_root(ordered)

    def snapshot(self) -> Dict[str, Any]:
        return json.loads(json.dumps(self._data))
