import pytest

from xafund.amounts import make_account_number, mod97_valid
from xafund.canonical import canonical_bytes, digest_of

from .oracles import mod97_by_digit


def test_key_order_is_stable():
    a = canonical_bytes({"b": 1, "a": [2, {"z": 0, "y": 1}]})
    b = canonical_bytes({"a": [2, {"y": 1, "z": 0}], "b": 1})
    assert a == b == b'{"a":[2,{"y":1,"z":0}],"b":1}'


def test_unicode_is_not_escaped():
    assert canonical_bytes({"name": "雄安"}) == '{"name":"雄安"}'.encode("utf-8")


def test_floats_rejected_everywhere():
    for bad in (1.5, {"a": 1.5}, [1, [2.0]], {"a": {"b": [0.1]}}):
        with pytest.raises(TypeError):
            canonical_bytes(bad)


def test_non_string_keys_rejected():
    with pytest.raises(TypeError):
        canonical_bytes({1: "x"})


def test_digest_is_64_hex():
    digest = digest_of({"x": 1})
    assert len(digest) == 64
    int(digest, 16)


def test_mod97_against_digitwise_oracle():
    for prefix in ("61", "1234", "900000001", "0"):
        number = make_account_number(prefix)
        assert mod97_valid(number)
        assert mod97_by_digit(number) == 1
    assert not mod97_valid("1234567890")
    assert mod97_by_digit("1234567890") != 1
    assert not mod97_valid("")
    assert not mod97_valid("12a4")
