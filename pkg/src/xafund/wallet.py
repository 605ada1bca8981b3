"""Client-side key custody and envelope signing.

A wallet belongs to the caller (CLI, tests, browser); services only ever see
signed envelopes and public keys.  The same canonical bytes are signed on
both sides of the HTTP boundary, so the server can re-derive every digest
without ever holding a private key.
"""

from __future__ import annotations

from hashlib import sha256
from typing import Callable, Dict, Optional

from .errors import NoKey
from .keys import KeyPair, build_challenge_proof
from .ledger.chain import build_tx


class Wallet:
    def __init__(self) -> None:
        self._pairs: Dict[str, KeyPair] = {}

    def add(self, user_id: str, pair: KeyPair) -> KeyPair:
        self._pairs[user_id] = pair
        return pair

    def generate(self, user_id: str) -> KeyPair:
        return self.add(user_id, KeyPair.generate())

    def derive(self, user_id: str, seed: str) -> KeyPair:
        """Deterministic key for fixtures: same seed, same key, any process."""
        return self.add(user_id, KeyPair.from_seed(sha256(f"{seed}|{user_id}".encode()).digest()))

    def pair(self, user_id: str) -> KeyPair:
        pair = self._pairs.get(user_id)
        if pair is None:
            raise NoKey(f"wallet holds no key for {user_id}")
        return pair

    def has(self, user_id: str) -> bool:
        return user_id in self._pairs

    def public_key(self, user_id: str) -> str:
        return self.pair(user_id).public_hex

    def signer(self, user_id: str) -> Callable[[bytes], str]:
        pair = self.pair(user_id)
        return pair.sign

    def sign_tx(self, payload: dict, user_id: str) -> dict:
        return build_tx(payload, user_id, self.signer(user_id))

    def sign_digest(self, user_id: str, digest_hex: str) -> str:
        return self.pair(user_id).sign(bytes.fromhex(digest_hex))

    def challenge_proof(self, user_id: str, issued: dict, op_digest: str) -> dict:
        return build_challenge_proof(
            self.pair(user_id), issued["nonce"], issued["issued_tick"], op_digest
        )
