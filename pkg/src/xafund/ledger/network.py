"""The in-process consortium: chains, parties, quorum commitment, anchoring.

One core chain carries the registry (orgs, users, projects, contracts) and
anchor checkpoints; each project gets its own payment chain.  Block
commitment is serialized per chain; submission and reads are concurrent.

Verification (`verify_chain`) never trusts in-memory state: it re-reads the
stored bytes, re-derives every digest, re-checks every signature and replays
the state transition function, reporting the lowest failing height.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from .. import events as ev
from .. import rules
from ..canonical import ZERO_DIGEST, digest_of
from ..errors import (
    BadSignature,
    DuplicateTx,
    EmptyPool,
    HeightOutOfRange,
    NoAnchorAvailable,
    NothingToAnchor,
    QuorumNotReached,
    UnknownChain,
    ValidationFailed,
)
from ..keys import verify_signature
from .chain import (
    CORE_CHAIN_ID,
    Chain,
    TxResult,
    build_header,
    envelope_shape_error,
    header_digest,
    is_payment_chain,
    payment_chain_id,
    project_of_chain,
    tx_root_of,
)
from .party import Party, make_parties, quorum
from .state import StateStore
from .store import ChainStore


@dataclass
class NetworkConfig:
    n_parties: int = 4
    anchor_interval: int = 16
    net_seed: str = "xafund-net-1"
    challenge_ttl: int = 120

    def to_dict(self) -> dict:
        return {
            "n_parties": self.n_parties,
            "anchor_interval": self.anchor_interval,
            "net_seed": self.net_seed,
            "challenge_ttl": self.challenge_ttl,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "NetworkConfig":
        return cls(
            n_parties=raw["n_parties"],
            anchor_interval=raw["anchor_interval"],
            net_seed=raw["net_seed"],
            challenge_ttl=raw.get("challenge_ttl", 120),
        )


class CoreViewProvider:
    """Resolves read-only registry views pinned at a core-chain height.

    The live tip is served straight from the core chain's current state; any
    historical height is served by a replay cursor that walks the committed
    blocks forward (resetting when asked to go backward, which is rare).
    Historical views are frozen snapshots so concurrent callers advancing the
    cursor cannot disturb a view already handed out.
    """

    def __init__(self, core: Chain):
        self._core = core
        self._lock = threading.Lock()
        self._state: Optional[StateStore] = None
        self._height = -1
        self._snap: Optional[tuple] = None  # (height, RegistryView)

    def view_at(self, height: int) -> rules.RegistryView:
        if height == self._core.tip:
            return rules.RegistryView(self._core.state)
        with self._lock:
            if self._snap is not None and self._snap[0] == height:
                return self._snap[1]
            if self._state is None or height < self._height:
                self._state = StateStore()
                self._height = -1
            while self._height < height:
                block = self._core.blocks[self._height + 1]
                self._core.apply_txs_to_state(
                    self._state, block["txs"], block["header"]["height"]
                )
                self._height += 1
            view = rules.RegistryView(_FrozenState(self._state.snapshot()))
            self._snap = (height, view)
            return view


class _FrozenState:
    """Immutable snapshot adapter with the StateStore read interface."""

    def __init__(self, data: dict):
        self._data = data

    def get(self, key, default=None):
        import json

        value = self._data.get(key)
        return default if value is None else json.loads(json.dumps(value))

    def peek(self, key):
        return self._data.get(key)

    def has(self, key):
        return key in self._data

    def keys(self):
        return iter(self._data.keys())


class LedgerNetwork:
    def __init__(self, chain_dir: str, config: NetworkConfig, approval_config):
        self.chain_dir = chain_dir
        self.config = config
        self.approval_config = approval_config
        self.parties: List[Party] = make_parties(config.n_parties, config.net_seed)
        self.quorum = quorum(config.n_parties)
        self.chains: Dict[str, Chain] = {}
        self._chains_lock = threading.Lock()
        self._core = self._make_chain(CORE_CHAIN_ID)
        self.chains[CORE_CHAIN_ID] = self._core
        self._core_views = CoreViewProvider(self._core)

    # -- construction -----------------------------------------------------------

    def _make_chain(self, chain_id: str) -> Chain:
        store = ChainStore(self.chain_dir, chain_id)
        ctx = self._ctx_for(chain_id)
        chain = Chain(chain_id, store, lambda state, tx, height: rules.apply_tx(state, tx, ctx))
        return chain

    def _ctx_for(self, chain_id: str) -> rules.TxContext:
        return rules.TxContext(
            chain_id=chain_id,
            is_core=chain_id == CORE_CHAIN_ID,
            project_id=project_of_chain(chain_id),
            core_view_at=lambda h: self._core_views.view_at(h),
            approval_config=self.approval_config,
            anchor_interval=self.config.anchor_interval,
            core_tip=lambda: self._core.tip,
        )

    def open_existing(self) -> None:
        """Replay everything recorded on disk: core first, then payment chains."""
        self._core.replay_from_store()
        for key in sorted(self._core.state.keys()):
            if key.startswith("project/"):
                self.ensure_payment_chain(key.split("/", 1)[1], replay=True)
        for chain in self.chains.values():
            for party in self.parties:
                for block in chain.blocks:
                    party.notify_committed(chain, block)

    def ensure_payment_chain(self, project_id: str, replay: bool = False) -> Chain:
        chain_id = payment_chain_id(project_id)
        with self._chains_lock:
            if chain_id in self.chains:
                return self.chains[chain_id]
            chain = self._make_chain(chain_id)
            if replay:
                chain.replay_from_store()
            self.chains[chain_id] = chain
            return chain

    # -- lookups -----------------------------------------------------------------

    @property
    def core(self) -> Chain:
        return self._core

    def chain(self, chain_id: str) -> Chain:
        chain = self.chains.get(chain_id)
        if chain is None:
            raise UnknownChain(f"chain {chain_id} does not exist")
        return chain

    def chain_ids(self) -> List[str]:
        return sorted(self.chains.keys())

    def registry_view(self) -> rules.RegistryView:
        return rules.RegistryView(self._core.state)

    def view_at(self, height: int) -> rules.RegistryView:
        return self._core_views.view_at(height)

    # -- signature resolution ------------------------------------------------------

    def _signer_key_for(self, chain: Chain, tx: dict) -> Optional[str]:
        payload = tx["payload"]
        if chain.chain_id == CORE_CHAIN_ID:
            view = rules.RegistryView(chain.state)
        else:
            height = payload.get("core_height")
            if not isinstance(height, int) or height < 0 or height > self._core.tip:
                return None
            view = self._core_views.view_at(height)
        if (
            payload.get("type") == ev.USER_KEY_REGISTERED
            and view.user(payload.get("user_id")) is None
        ):
            # Bootstrap: a first key certifies itself.
            return payload.get("public_key")
        return view.active_key(tx["initiator"])

    # -- intake and commitment -------------------------------------------------------

    def submit(self, chain_id: str, tx: dict) -> dict:
        chain = self.chain(chain_id)
        shape = envelope_shape_error(tx)
        if shape is not None:
            raise ValidationFailed(shape)
        kind = tx["payload"].get("type")
        allowed = ev.CORE_EVENTS if chain_id == CORE_CHAIN_ID else ev.PAYMENT_EVENTS
        if kind not in allowed:
            raise ValidationFailed(f"{kind} does not belong on {chain_id}")
        key = self._signer_key_for(chain, tx)
        if key is None or not verify_signature(
            key, bytes.fromhex(tx["tx_id"]), tx["signature"]
        ):
            raise BadSignature("transaction signature does not verify")
        if chain.has_tx(tx["tx_id"]):
            raise DuplicateTx(f"tx {tx['tx_id'][:12]} already known")
        chain.add_to_pool(tx)
        return {"tx_id": tx["tx_id"], "accepted": True}

    def commit(self, chain_id: str) -> dict:
        chain = self.chain(chain_id)
        with chain.writer_lock:
            txs = chain.take_pool()
            if not txs:
                raise EmptyPool(f"nothing pending on {chain_id}")
            height = chain.tip + 1
            proposer = self.parties[height % len(self.parties)].party_id
            prev = header_digest(chain.headers[-1]) if height > 0 else ZERO_DIGEST

            chain.state.begin_block()
            results = chain.apply_txs_to_state(chain.state, txs, height)
            state_root = chain.state.root()
            txroot = tx_root_of([t["tx_id"] for t in txs])
            header = build_header(chain_id, height, prev, txroot, state_root, proposer)
            hdr_digest = header_digest(header)

            endorsements = []
            for party in self.parties:
                sig = party.endorse(header, prev, txroot, proposer, hdr_digest)
                if sig is not None:
                    endorsements.append([party.party_id, sig])
            if len(endorsements) < self.quorum:
                chain.state.rollback_block()
                chain.restore_pool(txs)
                raise QuorumNotReached(
                    f"{len(endorsements)} endorsements < quorum {self.quorum}"
                )
            chain.state.commit_block()

            block = {"header": header, "endorsements": sorted(endorsements), "txs": txs}
            chain.store.append(block)
            chain.blocks.append(block)
            chain.headers.append(header)
            chain.roots.append(state_root)
            chain.results.append(results)
            for tx, result in zip(txs, results):
                chain._seen_tx_ids.add(tx["tx_id"])
                chain.result_index[tx["tx_id"]] = result
                chain.max_tick = max(chain.max_tick, tx["timestamp"])
            for party in self.parties:
                party.notify_committed(chain, block)
            if chain_id == CORE_CHAIN_ID:
                for tx, result in zip(txs, results):
                    if result.applied and tx["payload"]["type"] == ev.PROJECT_CREATED:
                        self.ensure_payment_chain(tx["payload"]["project_id"])
            return block

    def submit_and_commit(self, chain_id: str, tx: dict) -> TxResult:
        """Submit then make sure the tx lands in a block; batches under load."""
        self.submit(chain_id, tx)
        chain = self.chain(chain_id)
        while True:
            result = chain.result_index.get(tx["tx_id"])
            if result is not None:
                return result
            with chain.writer_lock:
                result = chain.result_index.get(tx["tx_id"])
                if result is not None:
                    return result
                self.commit(chain_id)

    # -- verification ------------------------------------------------------------------

    def verify_chain(self, chain_id: str) -> dict:
        chain = self.chain(chain_id)
        is_core = chain_id == CORE_CHAIN_ID
        allowed = ev.CORE_EVENTS if is_core else ev.PAYMENT_EVENTS
        party_keys = {p.party_id: p.public_hex for p in self.parties}
        n = len(self.parties)

        verify_state = StateStore()
        ctx = self._ctx_for(chain_id)
        seen_tx: set = set()
        prev = ZERO_DIGEST
        height = 0

        def bad(h: int) -> dict:
            return {"ok": False, "first_bad_height": h}

        for position, block, error in chain.store.iter_records():
            if error is not None:
                return bad(position)
            header = block.get("header")
            if not isinstance(header, dict):
                return bad(position)
            if not all(
                k in header for k in ("chain", "height", "prev", "tx_root", "state_root", "proposer")
            ):
                return bad(position)
            if header["chain"] != chain_id or header["height"] != position:
                return bad(position)
            if header["prev"] != prev:
                return bad(position)
            if header["proposer"] != self.parties[position % n].party_id:
                return bad(position)

            endorsements = block.get("endorsements")
            if not isinstance(endorsements, list):
                return bad(position)
            try:
                hdr_digest_bytes = bytes.fromhex(header_digest(header))
            except (TypeError, ValueError):
                return bad(position)
            endorsers = set()
            ok_endorsements = True
            for entry in endorsements:
                if not (isinstance(entry, list) and len(entry) == 2):
                    ok_endorsements = False
                    break
                party_id, sig = entry
                if party_id not in party_keys or party_id in endorsers:
                    ok_endorsements = False
                    break
                if not isinstance(sig, str) or not verify_signature(
                    party_keys[party_id], hdr_digest_bytes, sig
                ):
                    ok_endorsements = False
                    break
                endorsers.add(party_id)
            if not ok_endorsements or len(endorsers) < self.quorum:
                return bad(position)

            txs = block.get("txs")
            if not isinstance(txs, list):
                return bad(position)
            for tx in txs:
                if envelope_shape_error(tx) is not None:
                    return bad(position)
                if tx["tx_id"] in seen_tx:
                    return bad(position)
                if tx["payload"].get("type") not in allowed:
                    return bad(position)
                if is_core:
                    view = rules.RegistryView(verify_state)
                    key = self._replay_signer_key(view, tx)
                else:
                    ch = tx["payload"].get("core_height")
                    if not isinstance(ch, int) or ch < 0 or ch > self._core.tip:
                        return bad(position)
                    key = self._replay_signer_key(self._core_views.view_at(ch), tx)
                if key is None or not verify_signature(
                    key, bytes.fromhex(tx["tx_id"]), tx["signature"]
                ):
                    return bad(position)
                seen_tx.add(tx["tx_id"])
            try:
                if header["tx_root"] != tx_root_of([t["tx_id"] for t in txs]):
                    return bad(position)
            except (TypeError, ValueError):
                return bad(position)

            chain.apply_txs_to_state(verify_state, txs, position)
            if verify_state.root() != header["state_root"]:
                return bad(position)
            prev = header_digest(header)
            height = position + 1

        return {"ok": True, "first_bad_height": None}

    def _replay_signer_key(self, view: rules.RegistryView, tx: dict) -> Optional[str]:
        payload = tx["payload"]
        if (
            payload.get("type") == ev.USER_KEY_REGISTERED
            and view.user(payload.get("user_id")) is None
        ):
            return payload.get("public_key")
        return view.active_key(tx["initiator"])

    def compute_state_root(self, chain_id: str, height: int) -> str:
        """Pure replay of blocks 0..height from the store; independent of memory."""
        chain = self.chain(chain_id)
        if height < 0 or height > chain.tip:
            raise HeightOutOfRange(f"height {height} beyond tip {chain.tip}")
        state = StateStore()
        for block in chain.store.read_blocks()[: height + 1]:
            chain.apply_txs_to_state(state, block["txs"], block["header"]["height"])
        return state.root()

    # -- anchoring ----------------------------------------------------------------------

    def anchor_record(self, chain_id: str) -> dict:
        return self._core.state.get(f"anchor/{chain_id}", {"last": 0, "digests": {}})

    def next_anchor_target(self, chain_id: str) -> Optional[int]:
        interval = self.config.anchor_interval
        chain = self.chain(chain_id)
        last = self.anchor_record(chain_id)["last"]
        if chain.tip < last + interval:
            return None
        return (chain.tip // interval) * interval

    def anchor_checkpoint(self, chain_id: str, initiator: str, signer) -> dict:
        """Emit a core-chain checkpoint for the payment chain's newest
        anchorable height. ``signer`` maps digest bytes to a signature."""
        if not is_payment_chain(chain_id):
            raise ValidationFailed("only payment chains are anchored")
        chain = self.chain(chain_id)
        target = self.next_anchor_target(chain_id)
        if target is None:
            raise NothingToAnchor(f"{chain_id} tip {chain.tip} has no unanchored multiple")
        digest = header_digest(chain.header_at(target))
        from .chain import build_tx

        payload = ev.anchor_checkpoint(self._next_tick(), chain_id, target, digest)
        tx = build_tx(payload, initiator, signer)
        self.submit_and_commit(CORE_CHAIN_ID, tx)
        return tx

    def verify_against_anchor(self, chain_id: str, height: int) -> bool:
        interval = self.config.anchor_interval
        record = self.anchor_record(chain_id)
        target = -(-height // interval) * interval  # round up to a multiple
        anchored = sorted(int(h) for h in record["digests"] if int(h) >= target)
        if not anchored:
            raise NoAnchorAvailable(f"no anchor at or above height {target} for {chain_id}")
        anchor_height = anchored[0]
        recorded = record["digests"][str(anchor_height)]
        chain = self.chain(chain_id)
        stored = None
        for position, block, error in chain.store.iter_records():
            if error is not None or position > anchor_height:
                break
            if position == anchor_height and isinstance(block, dict):
                stored = block.get("header")
        if stored is None:
            return False
        try:
            return header_digest(stored) == recorded
        except TypeError:
            return False

    # -- misc ------------------------------------------------------------------------------

    _clock = None  # wired by the deployment

    def attach_clock(self, clock) -> None:
        self._clock = clock

    def _next_tick(self) -> int:
        if self._clock is None:
            raise RuntimeError("network clock not attached")
        return self._clock.tick()

    def replica_roots(self, chain_id: str) -> Dict[str, str]:
        out = {}
        for party in self.parties:
            for replica in party.replicas:
                out[replica.replica_id] = replica.root(chain_id)
        return out
