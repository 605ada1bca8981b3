"""Deployment wiring: one object that owns a complete running system.

Layout of a data directory:

    <data_dir>/
      network.json             consortium parameters (parties, anchor interval)
      approval_config.json     active approval-chain/stage-gate configuration
      credentials.json         login credentials (salted hashes)
      chains/<chain>.log|.idx  the ledgers themselves
      banks/<bank>.ledger.jsonl   each mock bank's internal debit ledger
      blobs/<sha256>           contract attachments by content hash

The deployment registers one platform identity (a System-role user with a
key derived from the network seed) used for the two platform-signed payload
kinds: anchor checkpoints and disbursement issuance/results.  Everything
else is signed by end-user keys the platform never holds.
"""

from __future__ import annotations

import hashlib
import json
import os
import secrets
from typing import Optional

from .bankgate.banks import BatchBank, FlakyBank, InstantBank
from .bankgate.gateway import BankGateway
from .blobs import BlobStore
from .clock import LogicalClock
from .datahub import DataHub
from .errors import BadCredential, NothingToAnchor
from .fundflow.config import ApprovalConfig, load_or_install
from .fundflow.service import PaymentService
from .keys import ChallengeService, KeyPair
from .ledger.chain import CORE_CHAIN_ID
from .ledger.network import LedgerNetwork, NetworkConfig
from .registry import RegistryService
from .wallet import Wallet

PLATFORM_USER = "platform-ops"
BANK_IDS = ("INSTANT", "BATCH", "FLAKY")


class Deployment:
    def __init__(self, data_dir: str, network: LedgerNetwork, clock: LogicalClock,
                 approval_config: ApprovalConfig):
        self.data_dir = data_dir
        self.network = network
        self.clock = clock
        self.approval_config = approval_config
        network.attach_clock(clock)

        self.platform_wallet = Wallet()
        self.platform_wallet.derive(PLATFORM_USER, f"{network.config.net_seed}|platform")

        self.challenges = ChallengeService(
            clock,
            key_lookup=lambda uid: network.registry_view().active_key(uid),
            ttl=network.config.challenge_ttl,
        )
        self.gateway = BankGateway(clock)
        banks_dir = os.path.join(data_dir, "banks")
        self.banks = {
            "INSTANT": InstantBank("INSTANT", clock, os.path.join(banks_dir, "INSTANT.ledger.jsonl")),
            "BATCH": BatchBank("BATCH", clock, os.path.join(banks_dir, "BATCH.ledger.jsonl")),
            "FLAKY": FlakyBank("FLAKY", clock, os.path.join(banks_dir, "FLAKY.ledger.jsonl")),
        }
        for bank in self.banks.values():
            self.gateway.register(bank)

        self.registry = RegistryService(network, clock)
        self.payments = PaymentService(
            network, clock, self.challenges, self.gateway,
            PLATFORM_USER, self.platform_wallet.signer(PLATFORM_USER),
        )
        self.blobs = BlobStore(os.path.join(data_dir, "blobs"))
        self.datahub = DataHub(network)
        self._credentials_path = os.path.join(data_dir, "credentials.json")

    # -- construction ----------------------------------------------------------------

    @classmethod
    def create(cls, data_dir: str, config: Optional[NetworkConfig] = None) -> "Deployment":
        os.makedirs(os.path.join(data_dir, "chains"), exist_ok=True)
        config = config or NetworkConfig()
        with open(os.path.join(data_dir, "network.json"), "w", encoding="utf-8") as fh:
            json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        approval = load_or_install(os.path.join(data_dir, "approval_config.json"))
        clock = LogicalClock()
        network = LedgerNetwork(os.path.join(data_dir, "chains"), config, approval)
        deployment = cls(data_dir, network, clock, approval)
        deployment._register_platform_identity()
        return deployment

    @classmethod
    def open(cls, data_dir: str) -> "Deployment":
        with open(os.path.join(data_dir, "network.json"), "r", encoding="utf-8") as fh:
            config = NetworkConfig.from_dict(json.load(fh))
        approval = ApprovalConfig.load(os.path.join(data_dir, "approval_config.json"))
        network = LedgerNetwork(os.path.join(data_dir, "chains"), config, approval)
        network.open_existing()
        clock = LogicalClock(max((c.max_tick for c in network.chains.values()), default=0))
        return cls(data_dir, network, clock, approval)

    @staticmethod
    def exists(data_dir: str) -> bool:
        return os.path.exists(os.path.join(data_dir, "network.json"))

    def _register_platform_identity(self) -> None:
        self.registry.register_user_key(
            PLATFORM_USER, None, "System",
            self.platform_wallet.public_key(PLATFORM_USER), 1,
            self.platform_wallet.signer(PLATFORM_USER),
        )

    @property
    def platform_signer(self):
        return self.platform_wallet.signer(PLATFORM_USER)

    # -- anchoring --------------------------------------------------------------------

    def anchor_if_due(self, chain_id: str) -> Optional[dict]:
        """Checkpoint a payment chain onto the core chain when it crosses
        the next anchor interval; no-op otherwise."""
        if self.network.next_anchor_target(chain_id) is None:
            return None
        try:
            return self.network.anchor_checkpoint(
                chain_id, PLATFORM_USER, self.platform_signer
            )
        except NothingToAnchor:
            return None

    def anchor_all_due(self) -> int:
        count = 0
        for chain_id in self.network.chain_ids():
            if chain_id == CORE_CHAIN_ID:
                continue
            if self.anchor_if_due(chain_id) is not None:
                count += 1
        return count

    # -- credentials --------------------------------------------------------------------

    def _load_credentials(self) -> dict:
        if not os.path.exists(self._credentials_path):
            return {}
        with open(self._credentials_path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def set_credential(self, user_id: str, passphrase: str) -> None:
        creds = self._load_credentials()
        salt = secrets.token_hex(8)
        creds[user_id] = {
            "salt": salt,
            "hash": hashlib.sha256(f"{salt}:{passphrase}".encode()).hexdigest(),
        }
        with open(self._credentials_path, "w", encoding="utf-8") as fh:
            json.dump(creds, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def verify_credential(self, user_id: str, passphrase: str) -> bool:
        entry = self._load_credentials().get(user_id)
        if entry is None:
            return False
        expected = hashlib.sha256(f"{entry['salt']}:{passphrase}".encode()).hexdigest()
        return secrets.compare_digest(expected, entry["hash"])
