"""Transaction envelopes, block headers, and the single-chain engine.

A chain is an ordered list of blocks persisted in a ChainStore plus the
in-memory artifacts rebuilt by replay: current state, per-height state roots,
and per-transaction application results.  Replay is the source of truth;
opening an existing store replays every block through the state transition
function, so a fresh process converges on exactly the recorded state.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from ..canonical import ZERO_DIGEST, canonical_bytes, digest_of, sha256_hex
from ..errors import DuplicateTx, HeightOutOfRange
from .state import EMPTY_ROOT, StateStore, merkle_root
from .store import ChainStore

CORE_CHAIN_ID = "core"


def payment_chain_id(project_id: str) -> str:
    return f"pay-{project_id}"


def is_payment_chain(chain_id: str) -> bool:
    return chain_id.startswith("pay-")


def project_of_chain(chain_id: str) -> Optional[str]:
    return chain_id[4:] if is_payment_chain(chain_id) else None


# ---------------------------------------------------------------------------
# envelopes


def tx_digest(payload: dict) -> str:
    return digest_of(payload)


def build_tx(payload: dict, initiator: str, signer) -> dict:
    """Assemble a signed envelope; ``signer`` maps digest bytes to hex sig."""
    txid = tx_digest(payload)
    return {
        "tx_id": txid,
        "payload": payload,
        "initiator": initiator,
        "timestamp": payload["tick"],
        "signature": signer(bytes.fromhex(txid)),
    }


def envelope_shape_error(tx: dict) -> Optional[str]:
    """Structural validation of an envelope; returns a reason or None."""
    if not isinstance(tx, dict):
        return "envelope is not an object"
    for key in ("tx_id", "payload", "initiator", "timestamp", "signature"):
        if key not in tx:
            return f"missing field {key}"
    payload = tx["payload"]
    if not isinstance(payload, dict) or "type" not in payload:
        return "payload is not a tagged object"
    if not isinstance(payload.get("tick"), int):
        return "payload tick missing"
    if tx["timestamp"] != payload["tick"]:
        return "envelope timestamp does not match payload tick"
    try:
        if tx["tx_id"] != tx_digest(payload):
            return "tx_id does not match payload digest"
    except TypeError:
        return "payload is not canonically encodable"
    return None


# ---------------------------------------------------------------------------
# blocks


def header_digest(header: dict) -> str:
    return digest_of(header)


def tx_root_of(tx_ids: List[str]) -> str:
    return merkle_root([bytes.fromhex(t) for t in tx_ids])


def build_header(chain_id, height, prev_hash, tx_root, state_root, proposer) -> dict:
    return {
        "chain": chain_id,
        "height": height,
        "prev": prev_hash,
        "tx_root": tx_root,
        "state_root": state_root,
        "proposer": proposer,
    }


@dataclass
class TxResult:
    tx_id: str
    applied: bool
    error: Optional[str] = None  # stable error code when not applied

    def to_dict(self) -> dict:
        return {"tx_id": self.tx_id, "applied": self.applied, "error": self.error}


class Chain:
    """One chain: store + replayed state + pending pool.

    Thread model: the pool is protected by ``pool_lock``; block commitment is
    serialized by ``writer_lock`` (single writer per chain).  Reads of
    committed data never block on the writer because all committed artifacts
    are append-only.
    """

    def __init__(self, chain_id: str, store: ChainStore, apply_tx: Callable):
        self.chain_id = chain_id
        self.store = store
        # apply_tx(state, tx, height) -> None or raise DomainError
        self._apply_tx = apply_tx
        self.state = StateStore()
        self.blocks: List[dict] = []
        self.headers: List[dict] = []
        self.roots: List[str] = []
        self.results: List[List[TxResult]] = []
        self.result_index: Dict[str, TxResult] = {}
        self.pool: List[dict] = []
        self.pool_lock = threading.Lock()
        self.writer_lock = threading.RLock()
        self.max_tick = 0
        self._seen_tx_ids: set = set()

    # -- replay ----------------------------------------------------------------

    def replay_from_store(self) -> None:
        for block in self.store.read_blocks():
            self._apply_block(block)

    def _apply_block(self, block: dict) -> List[TxResult]:
        results = self.apply_txs_to_state(self.state, block["txs"], block["header"]["height"])
        self.blocks.append(block)
        self.headers.append(block["header"])
        self.roots.append(self.state.root())
        self.results.append(results)
        for tx, result in zip(block["txs"], results):
            self._seen_tx_ids.add(tx["tx_id"])
            self.result_index[tx["tx_id"]] = result
            self.max_tick = max(self.max_tick, tx["timestamp"])
        return results

    def apply_txs_to_state(self, state: StateStore, txs: List[dict], height: int) -> List[TxResult]:
        from ..errors import DomainError

        results = []
        for tx in txs:
            state.begin()
            try:
                self._apply_tx(state, tx, height)
            except DomainError as exc:
                state.rollback_tx()
                results.append(TxResult(tx["tx_id"], False, exc.code))
            else:
                state.commit_tx()
                results.append(TxResult(tx["tx_id"], True))
        return results

    # -- queries ----------------------------------------------------------------

    @property
    def tip(self) -> int:
        """Height of the last committed block; -1 when the chain is empty."""
        return len(self.headers) - 1

    def header_at(self, height: int) -> dict:
        if height < 0 or height > self.tip:
            raise HeightOutOfRange(f"height {height} beyond tip {self.tip}")
        return self.headers[height]

    def root_at(self, height: int) -> str:
        if height < 0 or height > self.tip:
            raise HeightOutOfRange(f"height {height} beyond tip {self.tip}")
        return self.roots[height]

    def result_of(self, tx_id: str) -> Optional[TxResult]:
        return self.result_index.get(tx_id)

    def has_tx(self, tx_id: str) -> bool:
        if tx_id in self._seen_tx_ids:
            return True
        with self.pool_lock:
            return any(t["tx_id"] == tx_id for t in self.pool)

    # -- pool ------------------------------------------------------------------

    def add_to_pool(self, tx: dict) -> None:
        with self.pool_lock:
            if tx["tx_id"] in self._seen_tx_ids or any(
                t["tx_id"] == tx["tx_id"] for t in self.pool
            ):
                raise DuplicateTx(f"tx {tx['tx_id'][:12]} already known")
            self.pool.append(tx)

    def take_pool(self) -> List[dict]:
        with self.pool_lock:
            txs, self.pool = self.pool, []
            return txs

    def restore_pool(self, txs: List[dict]) -> None:
        with self.pool_lock:
            self.pool = txs + self.pool

    def pool_size(self) -> int:
        with self.pool_lock:
            return len(self.pool)
