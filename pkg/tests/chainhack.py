"""Raw-store manipulation helpers for tamper and forgery tests.

These deliberately bypass every service path and rewrite chain files the way
an attacker with disk access (and, for re-mining, stolen party keys) would.
"""

from __future__ import annotations

from typing import Callable, List, Optional

from xafund.canonical import ZERO_DIGEST
from xafund.ledger.chain import build_header, header_digest, tx_root_of
from xafund.ledger.state import StateStore


def remine_chain(deployment, chain_id: str, mutate: Callable[[List[dict]], None]) -> None:
    """Rewrite a chain after mutating its blocks, recomputing every hash,
    state root and endorsement so the result is internally consistent.

    mutate() may edit transactions in place; callers are responsible for
    re-deriving tx ids if they change payloads and want structural validity.
    """
    network = deployment.network
    chain = network.chain(chain_id)
    blocks = chain.store.read_blocks()
    mutate(blocks)

    state = StateStore()
    prev = ZERO_DIGEST
    parties = network.parties
    rebuilt = []
    for height, block in enumerate(blocks):
        txs = block["txs"]
        chain.apply_txs_to_state(state, txs, height)
        header = build_header(
            chain_id, height, prev,
            tx_root_of([t["tx_id"] for t in txs]),
            state.root(),
            parties[height % len(parties)].party_id,
        )
        digest = bytes.fromhex(header_digest(header))
        endorsements = sorted(
            [p.party_id, p.keys.sign(digest)] for p in parties
        )
        rebuilt.append({"header": header, "endorsements": endorsements, "txs": txs})
        prev = header_digest(header)
    chain.store.rewrite(rebuilt)


def forge_block(deployment, chain_id: str, txs: List[dict],
                claim_state_root: Optional[str] = None) -> None:
    """Append a fully endorsed block containing arbitrary transactions.

    The forged header reuses the current tip state root by default (so the
    byte-level chain still verifies); the content itself is the forgery.
    """
    network = deployment.network
    chain = network.chain(chain_id)
    blocks = chain.store.read_blocks()
    height = len(blocks)
    prev = header_digest(blocks[-1]["header"]) if blocks else ZERO_DIGEST
    state_root = claim_state_root or (
        blocks[-1]["header"]["state_root"] if blocks else StateStore().root()
    )
    parties = network.parties
    header = build_header(
        chain_id, height, prev,
        tx_root_of([t["tx_id"] for t in txs]),
        state_root,
        parties[height % len(parties)].party_id,
    )
    digest = bytes.fromhex(header_digest(header))
    endorsements = sorted([p.party_id, p.keys.sign(digest)] for p in parties)
    chain.store.append({"header": header, "endorsements": endorsements, "txs": txs})


def drop_endorsements(deployment, chain_id: str, height: int, keep: int) -> None:
    """Rewrite one block keeping only the first ``keep`` endorsements; all
    hashes stay untouched, so only the quorum check can notice."""
    chain = deployment.network.chain(chain_id)
    blocks = chain.store.read_blocks()
    blocks[height]["endorsements"] = blocks[height]["endorsements"][:keep]
    chain.store.rewrite(blocks)
