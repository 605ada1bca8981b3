"""User keys, signatures, and the high-risk challenge mechanism.

Design notes:

* Signing is Ed25519 (deterministic: same key + same message always gives the
  same signature), so replays of recorded flows are byte-stable.
* Private keys never live in any service. ``KeyPair`` objects belong to the
  caller (CLI wallet, test harness, browser); services hold only the
  ``ChallengeService`` nonce book and verify against public keys registered
  on the core chain.
* High-risk operations (payment submission and review) additionally require a
  fresh single-use challenge proof: a server-issued nonce signed by the user
  together with the digest of the exact operation being authorized.  A proof
  is valid only within ``CHALLENGE_TTL_TICKS`` of issuance and only once.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass, field
from hashlib import sha256
from typing import Dict, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt

from .canonical import digest_of
from .errors import BadKeyFile, NoKey

CHALLENGE_TTL_TICKS = 120
KEY_FILE_VERSION = 1


# ---------------------------------------------------------------------------
# key pairs


@dataclass
class KeyPair:
    """A client-side Ed25519 key pair."""

    private: Ed25519PrivateKey
    public_hex: str

    @classmethod
    def generate(cls) -> "KeyPair":
        priv = Ed25519PrivateKey.generate()
        return cls._wrap(priv)

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        """Derive a key pair from 32 bytes of seed material.

        Used by the demo fixture so two processes derive identical keys.
        """
        if len(seed) != 32:
            seed = sha256(seed).digest()
        return cls._wrap(Ed25519PrivateKey.from_private_bytes(seed))

    @classmethod
    def _wrap(cls, priv: Ed25519PrivateKey) -> "KeyPair":
        from cryptography.hazmat.primitives.serialization import (
            Encoding,
            PublicFormat,
        )

        pub = priv.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        return cls(private=priv, public_hex=pub.hex())

    def private_hex(self) -> str:
        from cryptography.hazmat.primitives.serialization import (
            Encoding,
            NoEncryption,
            PrivateFormat,
        )

        return self.private.private_bytes(
            Encoding.Raw, PrivateFormat.Raw, NoEncryption()
        ).hex()

    def sign(self, message: bytes) -> str:
        return self.private.sign(message).hex()


def verify_signature(public_hex: str, message: bytes, signature_hex: str) -> bool:
    try:
        pub = Ed25519PublicKey.from_public_bytes(bytes.fromhex(public_hex))
        pub.verify(bytes.fromhex(signature_hex), message)
        return True
    except (InvalidSignature, ValueError):
        return False


# ---------------------------------------------------------------------------
# encrypted key container (shared format between CLI and webapp signer)


def save_key_file(path: str, user_id: str, pair: KeyPair, passphrase: str) -> None:
    """Write a passphrase-encrypted key container.

    Layout (JSON): version, user_id, public_key, kdf parameters, AES-GCM
    nonce and ciphertext of the raw 32-byte private key. scrypt parameters
    are kept modest; this protects a demo key at rest, not a vault.
    """
    salt = os.urandom(16)
    kek = _derive_kek(passphrase, salt)
    nonce = os.urandom(12)
    ciphertext = AESGCM(kek).encrypt(nonce, bytes.fromhex(pair.private_hex()), None)
    body = {
        "version": KEY_FILE_VERSION,
        "user_id": user_id,
        "public_key": pair.public_hex,
        "kdf": {"name": "scrypt", "salt": salt.hex(), "n": 2**12, "r": 8, "p": 1},
        "cipher": {"name": "aes-256-gcm", "nonce": nonce.hex()},
        "ciphertext": ciphertext.hex(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_key_file(path: str, passphrase: str) -> KeyPair:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            body = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadKeyFile(f"unreadable key file: {exc}")
    if body.get("version") != KEY_FILE_VERSION:
        raise BadKeyFile("unsupported key file version")
    try:
        kek = _derive_kek(passphrase, bytes.fromhex(body["kdf"]["salt"]))
        raw = AESGCM(kek).decrypt(
            bytes.fromhex(body["cipher"]["nonce"]),
            bytes.fromhex(body["ciphertext"]),
            None,
        )
    except Exception:
        raise BadKeyFile("wrong passphrase or corrupted key file")
    pair = KeyPair.from_seed(raw)
    if pair.public_hex != body.get("public_key"):
        raise BadKeyFile("key file public key does not match private key")
    return pair


def _derive_kek(passphrase: str, salt: bytes) -> bytes:
    return Scrypt(salt=salt, length=32, n=2**12, r=8, p=1).derive(
        passphrase.encode("utf-8")
    )


# ---------------------------------------------------------------------------
# challenge-response for high-risk operations


def operation_digest(kind: str, *parts) -> str:
    """Digest binding a challenge to one concrete operation."""
    return digest_of([kind, *parts])


def challenge_message(nonce_hex: str, op_digest: str) -> bytes:
    return bytes.fromhex(nonce_hex) + bytes.fromhex(op_digest)


def build_challenge_proof(
    pair: KeyPair, nonce_hex: str, issued_tick: int, op_digest: str
) -> dict:
    return {
        "nonce": nonce_hex,
        "issued_tick": issued_tick,
        "operation_digest": op_digest,
        "signature": pair.sign(challenge_message(nonce_hex, op_digest)),
    }


@dataclass
class _Issued:
    user_id: str
    op_digest: str
    issued_tick: int
    used: bool = False


class ChallengeService:
    """Issues nonces and verifies challenge proofs.

    The nonce book is a single-writer set: marking a nonce used is atomic,
    so no proof can verify twice even under concurrent submission.
    """

    def __init__(self, clock, key_lookup, ttl: int = CHALLENGE_TTL_TICKS, rng=None):
        self._clock = clock
        self._key_lookup = key_lookup  # user_id -> public key hex or None
        self._ttl = ttl
        self._rng = rng
        self._issued: Dict[str, _Issued] = {}
        self._lock = threading.Lock()

    @property
    def ttl(self) -> int:
        return self._ttl

    def issue(self, user_id: str, op_digest: str) -> dict:
        if self._key_lookup(user_id) is None:
            raise NoKey(f"no registered key for {user_id}")
        nonce = self._new_nonce(user_id, op_digest)
        issued_tick = self._clock.now
        with self._lock:
            self._issued[nonce] = _Issued(user_id, op_digest, issued_tick)
        return {"nonce": nonce, "issued_tick": issued_tick}

    def verify_and_consume(self, user_id: str, proof: dict) -> bool:
        """True iff the proof is well-formed, fresh, unused and verifies.

        Consumes the nonce on success; a second verification of the same
        proof always returns False.
        """
        if not isinstance(proof, dict):
            return False
        nonce = proof.get("nonce")
        op_digest = proof.get("operation_digest")
        signature = proof.get("signature")
        issued_tick = proof.get("issued_tick")
        if not all(isinstance(x, str) for x in (nonce, op_digest, signature)):
            return False
        if not isinstance(issued_tick, int):
            return False
        public_hex = self._key_lookup(user_id)
        if public_hex is None:
            return False
        with self._lock:
            entry = self._issued.get(nonce)
            if entry is None or entry.used:
                return False
            if entry.user_id != user_id or entry.op_digest != op_digest:
                return False
            if entry.issued_tick != issued_tick:
                return False
            if self._clock.now - entry.issued_tick > self._ttl:
                return False
            try:
                message = challenge_message(nonce, op_digest)
            except ValueError:
                return False
            if not verify_signature(public_hex, message, signature):
                return False
            entry.used = True
            return True

    def _new_nonce(self, user_id: str, op_digest: str) -> str:
        if self._rng is not None:
            # Deterministic mode for reproducible scenario transcripts:
            # unique per (issue ordinal), still 128 bits wide.
            raw = sha256(
                f"{self._rng.random()}|{user_id}|{op_digest}".encode()
            ).digest()[:16]
            return raw.hex()
        return secrets.token_hex(16)
