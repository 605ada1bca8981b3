"""Chain engine: intake, quorum commitment, replay determinism."""

import pytest

from xafund.canonical import ZERO_DIGEST
from xafund.errors import (
    BadSignature,
    DuplicateTx,
    EmptyPool,
    HeightOutOfRange,
    QuorumNotReached,
    UnknownChain,
)
from xafund.harness import Deployment
from xafund.ledger.chain import header_digest
from xafund.ledger.party import quorum

from .conftest import make_org_tx


def test_quorum_formula():
    assert quorum(4) == 3
    assert quorum(5) == 4
    assert quorum(6) == 4
    assert quorum(7) == 5


def test_submit_accepts_wellformed(deployment):
    tx = make_org_tx(deployment, "ORG-X")
    receipt = deployment.network.submit("core", tx)
    assert receipt == {"tx_id": tx["tx_id"], "accepted": True}


def test_submit_rejects_flipped_signature(deployment):
    tx = make_org_tx(deployment, "ORG-X")
    sig = bytearray(bytes.fromhex(tx["signature"]))
    sig[0] ^= 0x01
    tx["signature"] = bytes(sig).hex()
    with pytest.raises(BadSignature):
        deployment.network.submit("core", tx)


def test_resubmit_committed_is_duplicate(deployment):
    tx = make_org_tx(deployment, "ORG-X")
    deployment.network.submit("core", tx)
    deployment.network.commit("core")
    with pytest.raises(DuplicateTx):
        deployment.network.submit("core", tx)


def test_submit_unknown_chain(deployment):
    with pytest.raises(UnknownChain):
        deployment.network.submit("pay-NOPE", make_org_tx(deployment, "ORG-X"))


def test_signature_before_key_registration_rejected(deployment):
    # a user whose key never hit the core chain cannot get anything accepted
    from xafund import events as ev
    from xafund.keys import KeyPair
    from xafund.ledger.chain import build_tx

    ghost = KeyPair.generate()
    payload = ev.org_registered(deployment.clock.tick(), "ORG-G", "Ghost Org",
                                "Supplier", "ghost-admin")
    tx = build_tx(payload, "ghost", ghost.sign)
    with pytest.raises(BadSignature):
        deployment.network.submit("core", tx)


def test_commit_all_honest_has_four_endorsements(deployment):
    deployment.network.submit("core", make_org_tx(deployment, "ORG-X"))
    block = deployment.network.commit("core")
    assert len(block["endorsements"]) == 4
    assert len({party for party, _ in block["endorsements"]}) == 4


def test_commit_quorum_failure_keeps_pool(deployment):
    network = deployment.network
    for party in network.parties[:2]:
        party.refuse_endorsement = True
    network.submit("core", make_org_tx(deployment, "ORG-X"))
    tip_before = network.core.tip
    with pytest.raises(QuorumNotReached):
        network.commit("core")
    assert network.core.tip == tip_before
    assert network.core.pool_size() == 1
    for party in network.parties[:2]:
        party.refuse_endorsement = False
    block = network.commit("core")
    assert network.core.pool_size() == 0
    assert len(block["endorsements"]) == 4


def test_empty_pool(deployment):
    with pytest.raises(EmptyPool):
        deployment.network.commit("core")


def test_chain_linkage_and_proposer_rotation(deployment):
    network = deployment.network
    for i in range(5):
        network.submit("core", make_org_tx(deployment, f"ORG-{i}"))
        network.commit("core")
    headers = network.core.headers
    # the platform identity registration committed height 0 already
    assert headers[0]["prev"] == ZERO_DIGEST
    for h in range(1, len(headers)):
        assert headers[h]["prev"] == header_digest(headers[h - 1])
        assert headers[h]["proposer"] == f"party-{h % 4}"


def test_state_roots_reproduce_via_fresh_process_replay(tmp_path, seeded):
    reopened = Deployment.open(str(tmp_path / "data"))
    for chain_id in seeded.network.chain_ids():
        original = seeded.network.chain(chain_id)
        replayed = reopened.network.chain(chain_id)
        assert replayed.roots == original.roots


def test_compute_state_root_matches_headers(seeded):
    core = seeded.network.core
    for height in (0, core.tip // 2, core.tip):
        assert seeded.network.compute_state_root("core", height) == core.roots[height]
    with pytest.raises(HeightOutOfRange):
        seeded.network.compute_state_root("core", core.tip + 1)


def test_fresh_chain_verifies(seeded):
    for chain_id in seeded.network.chain_ids():
        assert seeded.network.verify_chain(chain_id) == {
            "ok": True,
            "first_bad_height": None,
        }


def test_rejected_tx_leaves_no_trace_in_state(deployment):
    network = deployment.network
    tx = make_org_tx(deployment, "ORG-X")
    network.submit("core", tx)
    network.commit("core")
    dup_name = make_org_tx(deployment, "ORG-X")  # same org id again
    network.submit("core", dup_name)
    root_before = network.core.roots[-1]
    network.commit("core")
    result = network.core.result_of(dup_name["tx_id"])
    assert result is not None and not result.applied
    assert result.error == "DUPLICATE_ORG"
    assert network.core.roots[-1] == root_before
