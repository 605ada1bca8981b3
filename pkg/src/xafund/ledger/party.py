"""Consensus parties and their peer replicas.

Each party is one consortium member with an endorsement key.  A block needs
endorsements from at least ceil(2N/3) parties to commit.  Parties also run
two peer replicas apiece: independent copies of every chain's state that
re-apply committed transactions (without re-running crypto) so audits can
check that all replicas converge to the same state root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from hashlib import sha256
from typing import Dict, List

from ..keys import KeyPair, verify_signature
from .state import StateStore

PEERS_PER_PARTY = 2


def quorum(n_parties: int) -> int:
    return -(-2 * n_parties // 3)  # ceil(2N/3)


class Replica:
    """A peer node's independent state copy for one party."""

    def __init__(self, replica_id: str):
        self.replica_id = replica_id
        self.states: Dict[str, StateStore] = {}
        self.heights: Dict[str, int] = {}

    def apply_block(self, chain, block: dict) -> None:
        state = self.states.setdefault(chain.chain_id, StateStore())
        chain.apply_txs_to_state(state, block["txs"], block["header"]["height"])
        self.heights[chain.chain_id] = block["header"]["height"]

    def root(self, chain_id: str) -> str:
        state = self.states.get(chain_id)
        if state is None:
            from .state import EMPTY_ROOT

            return EMPTY_ROOT
        return state.root()


class Party:
    def __init__(self, party_id: str, seed: bytes):
        self.party_id = party_id
        self.keys = KeyPair.from_seed(sha256(seed).digest())
        self.refuse_endorsement = False  # test hook
        self.replicas = [
            Replica(f"{party_id}/peer-{i}") for i in range(PEERS_PER_PARTY)
        ]

    @property
    def public_hex(self) -> str:
        return self.keys.public_hex

    def endorse(self, header: dict, expected_prev: str, expected_tx_root: str,
                expected_proposer: str, hdr_digest: str) -> str | None:
        """Sign the header digest iff the header checks out."""
        if self.refuse_endorsement:
            return None
        if header["prev"] != expected_prev:
            return None
        if header["tx_root"] != expected_tx_root:
            return None
        if header["proposer"] != expected_proposer:
            return None
        return self.keys.sign(bytes.fromhex(hdr_digest))

    def notify_committed(self, chain, block: dict) -> None:
        for replica in self.replicas:
            replica.apply_block(chain, block)


def make_parties(count: int, net_seed: str) -> List[Party]:
    return [
        Party(f"party-{i}", f"{net_seed}|party|{i}".encode()) for i in range(count)
    ]
