import pytest

from xafund.clock import LogicalClock
from xafund.errors import BadKeyFile
from xafund.keys import (
    ChallengeService,
    KeyPair,
    build_challenge_proof,
    load_key_file,
    operation_digest,
    save_key_file,
    verify_signature,
)


def test_sign_verify_roundtrip():
    pair = KeyPair.generate()
    message = b"hello ledger"
    signature = pair.sign(message)
    assert verify_signature(pair.public_hex, message, signature)


def test_verify_with_other_key_fails():
    a, b = KeyPair.generate(), KeyPair.generate()
    signature = a.sign(b"msg")
    assert not verify_signature(b.public_hex, b"msg", signature)


def test_verify_tampered_message_fails():
    pair = KeyPair.generate()
    signature = pair.sign(b"msg")
    assert not verify_signature(pair.public_hex, b"msG", signature)


def test_deterministic_derivation():
    assert KeyPair.from_seed(b"seed-x").public_hex == KeyPair.from_seed(b"seed-x").public_hex
    assert KeyPair.from_seed(b"seed-x").public_hex != KeyPair.from_seed(b"seed-y").public_hex


def test_key_file_roundtrip(tmp_path):
    pair = KeyPair.generate()
    path = str(tmp_path / "u1.key")
    save_key_file(path, "u1", pair, "open sesame")
    loaded = load_key_file(path, "open sesame")
    assert loaded.public_hex == pair.public_hex
    with pytest.raises(BadKeyFile):
        load_key_file(path, "wrong phrase")


class _Keys:
    def __init__(self):
        self.pairs = {}

    def lookup(self, user_id):
        pair = self.pairs.get(user_id)
        return pair.public_hex if pair else None


@pytest.fixture
def challenge_env():
    clock = LogicalClock()
    keys = _Keys()
    keys.pairs["u1"] = KeyPair.generate()
    keys.pairs["u2"] = KeyPair.generate()
    service = ChallengeService(clock, keys.lookup)
    return clock, keys, service


def test_challenge_happy_path(challenge_env):
    clock, keys, service = challenge_env
    digest = operation_digest("submit", "PMT-1")
    issued = service.issue("u1", digest)
    proof = build_challenge_proof(keys.pairs["u1"], issued["nonce"], issued["issued_tick"], digest)
    assert service.verify_and_consume("u1", proof)


def test_challenge_single_use(challenge_env):
    clock, keys, service = challenge_env
    digest = operation_digest("submit", "PMT-1")
    issued = service.issue("u1", digest)
    proof = build_challenge_proof(keys.pairs["u1"], issued["nonce"], issued["issued_tick"], digest)
    assert service.verify_and_consume("u1", proof)
    assert not service.verify_and_consume("u1", proof)


def test_challenge_ttl_boundary(challenge_env):
    clock, keys, service = challenge_env
    digest = operation_digest("submit", "PMT-1")

    issued = service.issue("u1", digest)
    proof = build_challenge_proof(keys.pairs["u1"], issued["nonce"], issued["issued_tick"], digest)
    clock.advance(120)  # exactly at the TTL: still valid
    assert service.verify_and_consume("u1", proof)

    issued = service.issue("u1", digest)
    proof = build_challenge_proof(keys.pairs["u1"], issued["nonce"], issued["issued_tick"], digest)
    clock.advance(121)  # one past the TTL: dead
    assert not service.verify_and_consume("u1", proof)


def test_challenge_binds_to_operation(challenge_env):
    clock, keys, service = challenge_env
    digest = operation_digest("submit", "PMT-1")
    other = operation_digest("submit", "PMT-2")
    issued = service.issue("u1", digest)
    proof = build_challenge_proof(keys.pairs["u1"], issued["nonce"], issued["issued_tick"], other)
    assert not service.verify_and_consume("u1", proof)


def test_challenge_wrong_user(challenge_env):
    clock, keys, service = challenge_env
    digest = operation_digest("submit", "PMT-1")
    issued = service.issue("u1", digest)
    proof = build_challenge_proof(keys.pairs["u2"], issued["nonce"], issued["issued_tick"], digest)
    assert not service.verify_and_consume("u2", proof)
    # and u2's signature never verifies as u1
    assert not service.verify_and_consume("u1", proof)
