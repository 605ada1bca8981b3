"""Operator command line.

Every command is scriptable: stable exit codes (0 success, 1 failure, 2
usage) and a --json mode that emits line-delimited records instead of
tables, so CI can drive the whole acceptance flow headless.
"""

from __future__ import annotations

import json
import os
import sys

import click

from .amounts import format_fen
from .audit import run_audit
from .bench import BenchHarness
from .errors import DomainError
from .events import MODES, SCENARIOS
from .fixtures import seed_demo
from .harness import Deployment
from .ledger.network import NetworkConfig
from .scenarios import SCRIPTS, ScenarioRunner


def _emit(as_json: bool, record: dict, human: str) -> None:
    if as_json:
        click.echo(json.dumps(record, sort_keys=True))
    else:
        click.echo(human)


def _open(data_dir: str) -> Deployment:
    if not Deployment.exists(data_dir):
        raise click.ClickException(f"no deployment at {data_dir}; run `xafund seed` first")
    return Deployment.open(data_dir)


@click.group()
def main() -> None:
    """Construction-fund ledger tooling."""


@main.command()
@click.option("--data-dir", default="./xafund-data", show_default=True)
@click.option("--parties", default=4, show_default=True)
@click.option("--anchor-interval", default=16, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def seed(data_dir: str, parties: int, anchor_interval: int, as_json: bool) -> None:
    """Create the deterministic demo fixture in a fresh data directory."""
    try:
        if Deployment.exists(data_dir):
            deployment = Deployment.open(data_dir)
        else:
            deployment = Deployment.create(
                data_dir, NetworkConfig(n_parties=parties, anchor_interval=anchor_interval)
            )
        report = seed_demo(deployment)
    except DomainError as exc:
        _emit(as_json, {"ok": False, "error": exc.to_dict()}, f"seed failed: {exc.message}")
        sys.exit(1)
    _emit(
        as_json,
        {"ok": True, **report},
        "seeded: {} orgs, {} users, {} projects, {} contracts; core tip {}".format(
            len(report["orgs"]), len(report["users"]), len(report["projects"]),
            len(report["contracts"]), report["core_tip"],
        ),
    )
    if not as_json:
        for chain_id, root in sorted(report["state_roots"].items()):
            click.echo(f"  {chain_id}: {root}")


@main.command()
@click.argument("name", required=False)
@click.option("--mode", type=click.Choice(MODES), default="Application", show_default=True)
@click.option("--script", type=click.Choice(SCRIPTS), default="happy", show_default=True)
@click.option("--all", "run_all", is_flag=True, help="run the full scenario catalog")
@click.option("--data-dir", default="./xafund-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def scenario(name, mode, script, run_all, data_dir, as_json) -> None:
    """Drive one payment scenario end to end (or --all for the catalog)."""
    deployment = _open(data_dir)
    runner = ScenarioRunner(deployment)
    if run_all:
        out = runner.run_catalog()
        for t in out["transcripts"]:
            _emit(
                as_json, t,
                "{} {:32s} {:12s} {:18s} {}".format(
                    "PASS" if t["ok"] else "FAIL", t["scenario"], t["mode"],
                    t["script"], t.get("error", {}).get("code", ""),
                ),
            )
        summary = {k: out[k] for k in ("cases", "passed", "failed")}
        _emit(as_json, {"summary": summary},
              f"cases={out['cases']} passed={out['passed']} failed={out['failed']}")
        sys.exit(0 if out["failed"] == 0 else 1)
    if name not in SCENARIOS:
        raise click.UsageError(f"scenario must be one of {', '.join(SCENARIOS)}")
    transcript = runner.run(name, mode, script)
    deployment.datahub.ingest()
    if as_json:
        click.echo(json.dumps(transcript, sort_keys=True))
    else:
        click.echo(f"{name} [{mode}/{script}] payment {transcript['payment_id']}")
        for step in transcript["steps"]:
            click.echo("  " + json.dumps(step, sort_keys=True))
        click.echo("PASS" if transcript["ok"] else f"FAIL {transcript.get('error')}")
    sys.exit(0 if transcript["ok"] else 1)


@main.command()
@click.option("--data-dir", default="./xafund-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def audit(data_dir: str, as_json: bool) -> None:
    """Verify every chain, anchor, approval gate, and conservation rule."""
    deployment = _open(data_dir)
    report = run_audit(deployment)
    for checkrec in report["checks"]:
        _emit(
            as_json, checkrec,
            "{} {:22s} {}".format(
                "PASS" if checkrec["ok"] else "FAIL",
                checkrec["check"], checkrec.get("chain", ""),
            ),
        )
    _emit(as_json, {"ok": report["ok"]}, "audit " + ("PASS" if report["ok"] else "FAIL"))
    sys.exit(0 if report["ok"] else 1)


@main.command()
@click.option("--payments", default=100, show_default=True)
@click.option("--concurrency", default=4, show_default=True)
@click.option("--ordered", is_flag=True, help="force a deterministic global order")
@click.option("--skip-audit", is_flag=True)
@click.option("--data-dir", default="./xafund-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def bench(payments, concurrency, ordered, skip_audit, data_dir, as_json) -> None:
    """Run a payment load and report throughput/latency/memory."""
    deployment = _open(data_dir)
    metrics = BenchHarness(deployment, ordered=ordered).run(payments, concurrency)
    _emit(
        as_json, {"bench": metrics},
        "payments={payments} confirmed={confirmed} concurrency={concurrency} "
        "elapsed={elapsed_s}s txs={committed_txs} throughput={throughput_tps}tx/s "
        "p50={p50_latency_ticks} p95={p95_latency_ticks} ticks rss={peak_rss_kb}kB".format(**metrics),
    )
    if skip_audit:
        sys.exit(0)
    report = run_audit(deployment)
    _emit(as_json, {"post_audit_ok": report["ok"]},
          "post-run audit " + ("PASS" if report["ok"] else "FAIL"))
    sys.exit(0 if report["ok"] and metrics["confirmed"] == payments else 1)


@main.group()
def chain() -> None:
    """Chain-level inspection."""


@chain.command("verify")
@click.argument("chain_id")
@click.option("--data-dir", default="./xafund-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def chain_verify(chain_id: str, data_dir: str, as_json: bool) -> None:
    deployment = _open(data_dir)
    try:
        report = deployment.network.verify_chain(chain_id)
    except DomainError as exc:
        _emit(as_json, {"error": exc.to_dict()}, f"error: {exc.message}")
        sys.exit(1)
    _emit(
        as_json, {"chain_id": chain_id, **report},
        f"{chain_id}: " + ("OK" if report["ok"] else f"BAD at height {report['first_bad_height']}"),
    )
    sys.exit(0 if report["ok"] else 1)


@chain.command("roots")
@click.argument("chain_id")
@click.option("--data-dir", default="./xafund-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def chain_roots(chain_id: str, data_dir: str, as_json: bool) -> None:
    deployment = _open(data_dir)
    try:
        ledger = deployment.network.chain(chain_id)
    except DomainError as exc:
        _emit(as_json, {"error": exc.to_dict()}, f"error: {exc.message}")
        sys.exit(1)
    if as_json:
        click.echo(json.dumps({"chain_id": chain_id, "roots": list(ledger.roots)}))
    else:
        for height, root in enumerate(ledger.roots):
            click.echo(f"{height} {root}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8440, show_default=True)
@click.option("--data-dir", default="./xafund-data", show_default=True)
def serve(host: str, port: int, data_dir: str) -> None:
    """Start the HTTP API with in-process mock banks and harness."""
    import uvicorn

    from .api.app import create_app

    deployment = _open(data_dir)
    app = create_app(deployment)
    frontend = os.path.join(os.path.dirname(data_dir) or ".", "frontend", "dist")
    if os.path.isdir(frontend):
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=frontend, html=True), name="webapp")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.group()
def key() -> None:
    """Client-side key management."""


@key.command("gen")
@click.option("--user", "user_id", required=True)
@click.option("--org", "org_id", default=None)
@click.option("--role", default="Staff")
@click.option("--passphrase", required=True)
@click.option("--register/--no-register", default=True, show_default=True)
@click.option("--data-dir", default="./xafund-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def key_gen(user_id, org_id, role, passphrase, register, data_dir, as_json) -> None:
    """Generate a key pair, store it encrypted, and register it on chain."""
    from .keys import KeyPair, save_key_file

    deployment = _open(data_dir)
    keys_dir = os.path.join(data_dir, "keys")
    os.makedirs(keys_dir, exist_ok=True)
    pair = KeyPair.generate()
    path = os.path.join(keys_dir, f"{user_id}.key")

    existing = deployment.registry.user(user_id)
    if existing is not None and register:
        raise click.ClickException(f"{user_id} already has a key; use `xafund key rotate`")
    try:
        if register:
            deployment.registry.register_user_key(
                user_id, org_id, role, pair.public_hex, 1, pair.sign
            )
    except DomainError as exc:
        _emit(as_json, {"ok": False, "error": exc.to_dict()}, f"registration failed: {exc.message}")
        sys.exit(1)
    version = 1
    save_key_file(path, user_id, pair, passphrase)
    _emit(
        as_json,
        {"ok": True, "user_id": user_id, "public_key": pair.public_hex,
         "key_version": version, "path": path},
        f"{user_id}: key v{version} written to {path}\npublic key {pair.public_hex}",
    )


@key.command("rotate")
@click.option("--user", "user_id", required=True)
@click.option("--passphrase", required=True)
@click.option("--data-dir", default="./xafund-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def key_rotate(user_id, passphrase, data_dir, as_json) -> None:
    """Rotate a user's key: the old key signs the registration of the new."""
    from .keys import KeyPair, load_key_file, save_key_file

    deployment = _open(data_dir)
    existing = deployment.registry.user(user_id)
    if existing is None:
        raise click.ClickException(f"user {user_id} is not registered")
    path = os.path.join(data_dir, "keys", f"{user_id}.key")
    old_pair = load_key_file(path, passphrase)
    new_pair = KeyPair.generate()
    version = existing["active_version"] + 1
    try:
        deployment.registry.register_user_key(
            user_id, existing["org_id"], existing["role"],
            new_pair.public_hex, version, old_pair.sign,
        )
    except DomainError as exc:
        _emit(as_json, {"ok": False, "error": exc.to_dict()}, f"rotation failed: {exc.message}")
        sys.exit(1)
    save_key_file(path, user_id, new_pair, passphrase)
    _emit(
        as_json,
        {"ok": True, "user_id": user_id, "key_version": version,
         "public_key": new_pair.public_hex},
        f"{user_id}: rotated to key v{version}",
    )


@key.command("sign")
@click.option("--user", "user_id", required=True)
@click.option("--passphrase", required=True)
@click.option("--digest", required=True, help="hex digest to sign")
@click.option("--data-dir", default="./xafund-data", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def key_sign(user_id, passphrase, digest, data_dir, as_json) -> None:
    """Sign a digest with a stored key (local operation, nothing submitted)."""
    from .keys import load_key_file

    path = os.path.join(data_dir, "keys", f"{user_id}.key")
    try:
        pair = load_key_file(path, passphrase)
        signature = pair.sign(bytes.fromhex(digest))
    except (DomainError, ValueError) as exc:
        message = exc.message if isinstance(exc, DomainError) else str(exc)
        _emit(as_json, {"ok": False, "error": message}, f"signing failed: {message}")
        sys.exit(1)
    _emit(as_json, {"ok": True, "signature": signature}, signature)


if __name__ == "__main__":
    main()
