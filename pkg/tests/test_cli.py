"""CLI behavior: exit codes, JSON mode, determinism across data dirs."""

import json

import pytest
from click.testing import CliRunner

from xafund.cli import main


@pytest.fixture
def cli():
    return CliRunner()


def seed_dir(cli, path):
    result = cli.invoke(main, ["seed", "--data-dir", str(path), "--json"])
    assert result.exit_code == 0, result.output
    return json.loads(result.output.splitlines()[0])


def test_seed_then_rerun_refuses(cli, tmp_path):
    report = seed_dir(cli, tmp_path / "d1")
    assert report["ok"] and report["core_tip"] > 0
    again = cli.invoke(main, ["seed", "--data-dir", str(tmp_path / "d1"), "--json"])
    assert again.exit_code == 1
    assert json.loads(again.output.splitlines()[0])["error"]["code"] == "STORE_NOT_EMPTY"


def test_seed_is_deterministic_across_directories(cli, tmp_path):
    a = seed_dir(cli, tmp_path / "a")
    b = seed_dir(cli, tmp_path / "b")
    assert a["state_roots"] == b["state_roots"]
    assert a["core_tip"] == b["core_tip"]


def test_scenario_single_and_exit_codes(cli, tmp_path):
    seed_dir(cli, tmp_path / "d")
    result = cli.invoke(main, [
        "scenario", "BuilderWages", "--mode", "Penetrating",
        "--data-dir", str(tmp_path / "d"), "--json",
    ])
    assert result.exit_code == 0, result.output
    transcript = json.loads(result.output.splitlines()[0])
    assert transcript["ok"] and transcript["scenario"] == "BuilderWages"
    ops = [s["op"] for s in transcript["steps"]]
    assert "confirmed" in ops

    bogus = cli.invoke(main, ["scenario", "NotAScenario", "--data-dir", str(tmp_path / "d")])
    assert bogus.exit_code == 2


def test_scenario_reject_script(cli, tmp_path):
    seed_dir(cli, tmp_path / "d")
    result = cli.invoke(main, [
        "scenario", "SupplierMaterialPayment", "--script", "reject",
        "--data-dir", str(tmp_path / "d"), "--json",
    ])
    assert result.exit_code == 0, result.output
    transcript = json.loads(result.output.splitlines()[0])
    assert transcript["ok"]


def test_audit_passes_on_untouched_fixture(cli, tmp_path):
    seed_dir(cli, tmp_path / "d")
    result = cli.invoke(main, ["audit", "--data-dir", str(tmp_path / "d"), "--json"])
    assert result.exit_code == 0, result.output
    records = [json.loads(line) for line in result.output.splitlines()]
    assert records[-1] == {"ok": True}


def test_audit_flags_byte_flip(cli, tmp_path):
    seed_dir(cli, tmp_path / "d")
    from xafund.harness import Deployment

    d = Deployment.open(str(tmp_path / "d"))
    offset, length = d.network.core.store.block_byte_range(10)
    d.network.core.store.flip_byte(offset + 5)
    result = cli.invoke(main, ["audit", "--data-dir", str(tmp_path / "d"), "--json"])
    assert result.exit_code == 1
    records = [json.loads(line) for line in result.output.splitlines()]
    bad = [r for r in records if r.get("check") == "chain-integrity" and not r["ok"]]
    assert bad and bad[0]["detail"]["first_bad_height"] == 10


def test_chain_verify_and_roots(cli, tmp_path):
    seed_dir(cli, tmp_path / "d")
    result = cli.invoke(main, ["chain", "verify", "core", "--data-dir", str(tmp_path / "d"), "--json"])
    assert result.exit_code == 0
    assert json.loads(result.output)["ok"] is True

    roots = cli.invoke(main, ["chain", "roots", "core", "--data-dir", str(tmp_path / "d"), "--json"])
    body = json.loads(roots.output)
    assert len(body["roots"]) > 0

    missing = cli.invoke(main, ["chain", "verify", "pay-NOPE", "--data-dir", str(tmp_path / "d")])
    assert missing.exit_code == 1


def test_bench_tiny_with_audit(cli, tmp_path):
    seed_dir(cli, tmp_path / "d")
    result = cli.invoke(main, [
        "bench", "--payments", "5", "--concurrency", "2",
        "--data-dir", str(tmp_path / "d"), "--json",
    ])
    assert result.exit_code == 0, result.output
    lines = [json.loads(line) for line in result.output.splitlines()]
    metrics = lines[0]["bench"]
    assert metrics["confirmed"] == 5
    assert lines[-1] == {"post_audit_ok": True}


def test_bench_zero_load(cli, tmp_path):
    seed_dir(cli, tmp_path / "d")
    result = cli.invoke(main, [
        "bench", "--payments", "0", "--skip-audit",
        "--data-dir", str(tmp_path / "d"), "--json",
    ])
    assert result.exit_code == 0, result.output
    metrics = json.loads(result.output.splitlines()[0])["bench"]
    assert metrics["confirmed"] == 0
    assert metrics["p50_latency_ticks"] is None


def test_ordered_bench_identical_roots_across_concurrency(cli, tmp_path):
    roots = {}
    for label, concurrency in (("c1", 1), ("c8", 8)):
        path = tmp_path / label
        seed_dir(cli, path)
        result = cli.invoke(main, [
            "bench", "--payments", "6", "--concurrency", str(concurrency),
            "--ordered", "--skip-audit", "--data-dir", str(path), "--json",
        ])
        assert result.exit_code == 0, result.output
        chain = cli.invoke(main, ["chain", "roots", "pay-P-001", "--data-dir", str(path), "--json"])
        roots[label] = json.loads(chain.output)["roots"]
    assert roots["c1"] == roots["c8"]


def test_key_gen_sign_rotate(cli, tmp_path):
    seed_dir(cli, tmp_path / "d")
    data = str(tmp_path / "d")
    gen = cli.invoke(main, [
        "key", "gen", "--user", "new-user", "--org", "GC-001", "--role", "Staff",
        "--passphrase", "pw1", "--data-dir", data, "--json",
    ])
    assert gen.exit_code == 0, gen.output
    body = json.loads(gen.output)
    assert body["key_version"] == 1

    sign = cli.invoke(main, [
        "key", "sign", "--user", "new-user", "--passphrase", "pw1",
        "--digest", "ab" * 32, "--data-dir", data, "--json",
    ])
    assert sign.exit_code == 0
    signature = json.loads(sign.output)["signature"]
    from xafund.keys import verify_signature

    assert verify_signature(body["public_key"], bytes.fromhex("ab" * 32), signature)

    rotate = cli.invoke(main, [
        "key", "rotate", "--user", "new-user", "--passphrase", "pw1",
        "--data-dir", data, "--json",
    ])
    assert rotate.exit_code == 0, rotate.output
    assert json.loads(rotate.output)["key_version"] == 2

    wrong = cli.invoke(main, [
        "key", "sign", "--user", "new-user", "--passphrase", "bad",
        "--digest", "ab" * 32, "--data-dir", data, "--json",
    ])
    assert wrong.exit_code == 1


def test_key_rotation_preserves_historic_verification(cli, tmp_path):
    seed_dir(cli, tmp_path / "d")
    data = str(tmp_path / "d")
    cli.invoke(main, [
        "key", "gen", "--user", "rot-user", "--org", "GC-001", "--role", "Staff",
        "--passphrase", "pw", "--data-dir", data,
    ])
    cli.invoke(main, ["key", "rotate", "--user", "rot-user", "--passphrase", "pw",
                      "--data-dir", data])
    from xafund.harness import Deployment

    d = Deployment.open(data)
    user = d.registry.user("rot-user")
    assert user["active_version"] == 2
    assert len(user["keys"]) == 2
    # the registration transactions (signed under old keys) still verify
    assert d.network.verify_chain("core")["ok"]
