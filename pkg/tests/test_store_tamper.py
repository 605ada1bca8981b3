"""On-disk layout and tamper evidence."""

import json
import random
import struct

import pytest

from xafund.harness import Deployment

from .chainhack import drop_endorsements
from .conftest import make_org_tx


def _grow(deployment, count=8):
    for i in range(count):
        deployment.network.submit("core", make_org_tx(deployment, f"ORG-{i:02d}"))
        deployment.network.commit("core")


def test_record_layout_is_length_prefixed_json(deployment):
    _grow(deployment, 2)
    store = deployment.network.core.store
    with open(store.log_path, "rb") as fh:
        raw = fh.read()
    offset = 0
    heights = []
    while offset < len(raw):
        (length,) = struct.unpack(">I", raw[offset : offset + 4])
        body = raw[offset + 4 : offset + 4 + length]
        block = json.loads(body.decode("utf-8"))
        heights.append(block["header"]["height"])
        offset += 4 + length
    assert heights == list(range(len(heights)))
    index = store.read_index()
    assert [e["height"] for e in index] == heights


def test_index_byte_ranges_point_at_blocks(deployment):
    _grow(deployment, 3)
    store = deployment.network.core.store
    offset, length = store.block_byte_range(2)
    with open(store.log_path, "rb") as fh:
        fh.seek(offset)
        block = json.loads(fh.read(length).decode("utf-8"))
    assert block["header"]["height"] == 2


@pytest.mark.parametrize("target_height", [0, 3, 7])
def test_single_byte_flip_flags_exact_height(deployment, target_height):
    _grow(deployment)
    store = deployment.network.core.store
    offset, length = store.block_byte_range(target_height)
    store.flip_byte(offset + length // 2)
    report = deployment.network.verify_chain("core")
    assert report["ok"] is False
    assert report["first_bad_height"] == target_height


def test_flip_inside_length_prefix_detected(deployment):
    _grow(deployment, 4)
    store = deployment.network.core.store
    offset, _ = store.block_byte_range(2)
    store.flip_byte(offset - 4)  # first byte of the length prefix
    report = deployment.network.verify_chain("core")
    assert report["ok"] is False
    assert report["first_bad_height"] == 2


def test_random_flips_always_flag_at_or_before_height(deployment):
    _grow(deployment, 6)
    store = deployment.network.core.store
    rng = random.Random(7)
    for _ in range(15):
        height = rng.randrange(deployment.network.core.tip + 1)
        offset, length = store.block_byte_range(height)
        position = offset + rng.randrange(length)
        with open(store.log_path, "rb") as fh:
            fh.seek(position)
            original = fh.read(1)
        store.flip_byte(position)
        report = deployment.network.verify_chain("core")
        assert report["ok"] is False
        assert report["first_bad_height"] == height
        store.flip_byte(position)  # restore
        with open(store.log_path, "rb") as fh:
            fh.seek(position)
            assert fh.read(1) == original
    assert deployment.network.verify_chain("core")["ok"]


def test_endorsement_removal_below_quorum_flags_height(deployment):
    # Block 5 committed with exactly quorum endorsements, then one stripped
    # from disk: the recount finds quorum-1 and flags height 5.
    _grow(deployment, 5)
    deployment.network.parties[1].refuse_endorsement = True
    deployment.network.submit("core", make_org_tx(deployment, "ORG-LAST"))
    block = deployment.network.commit("core")
    deployment.network.parties[1].refuse_endorsement = False
    height = block["header"]["height"]
    assert len(block["endorsements"]) == 3

    drop_endorsements(deployment, "core", height, keep=2)
    # independent oracle: recount endorsements straight from the stored bytes
    stored = deployment.network.core.store.read_blocks()[height]
    assert len(stored["endorsements"]) == 2 < 3

    report = deployment.network.verify_chain("core")
    assert report == {"ok": False, "first_bad_height": height}


def test_verify_detects_duplicated_endorsement_padding(deployment):
    # padding the list back to quorum with a duplicate party must not fool it
    _grow(deployment, 3)
    chain = deployment.network.core
    blocks = chain.store.read_blocks()
    blocks[2]["endorsements"] = [
        blocks[2]["endorsements"][0],
        blocks[2]["endorsements"][0],
        blocks[2]["endorsements"][1],
    ]
    chain.store.rewrite(blocks)
    report = deployment.network.verify_chain("core")
    assert report == {"ok": False, "first_bad_height": 2}
