"""Whole-system audit: replay-based checks that trust nothing in memory.

Checks, each reported as its own pass/fail line:

* chain-integrity  — every chain verifies from its stored bytes (hash links,
  merkle roots, proposer schedule, endorsement quorum, every signature).
* anchors          — every recorded checkpoint still matches the payment
  chain's stored header at that height.
* gate-soundness   — every disbursement in committed bytes is preceded by a
  complete approval chain whose step signatures verify and whose approvers
  exclude the initiator.  This is the "approval flow drives capital flow"
  guarantee, checked independently of the transition function.
* conservation     — for every payment that reached the bank queue, the
  instruction amounts sum exactly to the approved amount, and re-releases
  only ever carry previously failed instructions.
* wage-directness  — wage payouts credit personal accounts only.
* nonce-uniqueness — no challenge nonce appears in two applied transactions.
* replica-convergence — all peer replicas agree with each chain's tip root.
* terminality      — no payment leaves Confirmed or Rejected.
"""

from __future__ import annotations

from typing import Dict, List

from . import events as ev
from .keys import verify_signature
from .ledger.chain import CORE_CHAIN_ID
from .rules import instruction_id, review_digest


def run_audit(deployment) -> dict:
    checks: List[dict] = []
    network = deployment.network

    for chain_id in network.chain_ids():
        report = network.verify_chain(chain_id)
        checks.append(
            {
                "check": "chain-integrity",
                "chain": chain_id,
                "ok": report["ok"],
                "detail": report,
            }
        )

    checks.extend(_check_anchors(network))
    checks.extend(_check_gate_soundness(network))
    checks.extend(_check_conservation(network))
    checks.extend(_check_wage_directness(network))
    checks.append(_check_nonce_uniqueness(network))
    checks.extend(_check_replicas(network))
    checks.extend(_check_terminality(network))

    return {"ok": all(c["ok"] for c in checks), "checks": checks}


def _payment_chains(network):
    return [c for c in network.chain_ids() if c != CORE_CHAIN_ID]


def _check_anchors(network) -> List[dict]:
    out = []
    for chain_id in _payment_chains(network):
        record = network.anchor_record(chain_id)
        if not record["digests"]:
            out.append(
                {"check": "anchors", "chain": chain_id, "ok": True,
                 "detail": "no checkpoints recorded yet"}
            )
            continue
        results = {}
        ok = True
        for height in sorted(int(h) for h in record["digests"]):
            match = network.verify_against_anchor(chain_id, height)
            results[height] = match
            ok = ok and match
        out.append({"check": "anchors", "chain": chain_id, "ok": ok, "detail": results})
    return out


def _committed_txs(chain):
    for block in chain.store.read_blocks():
        for tx in block["txs"]:
            yield block["header"]["height"], tx


def _check_gate_soundness(network) -> List[dict]:
    out = []
    for chain_id in _payment_chains(network):
        chain = network.chain(chain_id)
        initiators: Dict[str, str] = {}
        amounts: Dict[str, int] = {}
        declared_steps: Dict[str, list] = {}
        decisions: Dict[str, dict] = {}
        failures = []
        for height, tx in _committed_txs(chain):
            payload = tx["payload"]
            kind = payload.get("type")
            pid = payload.get("payment_id")
            if kind == ev.PAYMENT_CREATED:
                initiators.setdefault(pid, tx["initiator"])
                amounts.setdefault(pid, payload.get("amount"))
            elif kind == ev.PAYMENT_SUBMITTED:
                declared_steps.setdefault(pid, payload.get("approval_chain") or [])
            elif kind == ev.PAYMENT_REVIEWED:
                step_index = payload.get("step_index")
                verdict = payload.get("verdict")
                signature = payload.get("signature")
                core_height = payload.get("core_height")
                view = network.view_at(core_height) if isinstance(core_height, int) else None
                key = view.active_key(tx["initiator"]) if view else None
                verified = (
                    isinstance(signature, str)
                    and key is not None
                    and verify_signature(
                        key,
                        bytes.fromhex(review_digest(pid, step_index, verdict)),
                        signature,
                    )
                )
                if verified and verdict == "approve":
                    decisions.setdefault(pid, {})[step_index] = tx["initiator"]
            elif kind == ev.DISBURSEMENT_ISSUED:
                problems = _gate_problems(
                    pid, payload, initiators.get(pid), declared_steps.get(pid),
                    decisions.get(pid, {}),
                )
                if problems:
                    failures.append({"payment_id": pid, "height": height, "problems": problems})
        out.append(
            {
                "check": "gate-soundness",
                "chain": chain_id,
                "ok": not failures,
                "detail": failures or "every disbursement follows a verified approval chain",
            }
        )
    return out


def _gate_problems(pid, payload, initiator, steps, decisions) -> List[str]:
    problems = []
    if initiator is None:
        problems.append("no creation record")
    if not steps:
        problems.append("no submitted approval chain")
        return problems
    for step in steps:
        index = step.get("step_index")
        decided_by = decisions.get(index)
        if decided_by is None:
            problems.append(f"step {index} lacks a verified approval")
        elif decided_by == initiator:
            problems.append(f"step {index} decided by the initiator")
    return problems


def _check_conservation(network) -> List[dict]:
    out = []
    for chain_id in _payment_chains(network):
        chain = network.chain(chain_id)
        amounts: Dict[str, int] = {}
        first_release: Dict[str, dict] = {}
        failures = []
        for height, tx in _committed_txs(chain):
            payload = tx["payload"]
            kind = payload.get("type")
            pid = payload.get("payment_id")
            if kind == ev.PAYMENT_CREATED:
                amounts.setdefault(pid, payload.get("amount"))
            elif kind == ev.DISBURSEMENT_ISSUED:
                instructions = payload.get("instructions") or []
                if payload.get("release_ordinal") == 0:
                    total = sum(i.get("amount", 0) for i in instructions)
                    if total != amounts.get(pid):
                        failures.append(
                            {"payment_id": pid, "height": height,
                             "problem": f"instructions total {total}, amount {amounts.get(pid)}"}
                        )
                    for instr in instructions:
                        expected = instruction_id(
                            pid, instr["account"]["account_number"], instr["ordinal"]
                        )
                        if instr.get("instr_id") != expected:
                            failures.append(
                                {"payment_id": pid, "height": height,
                                 "problem": "instruction id does not match its derivation"}
                            )
                    first_release[pid] = {i["instr_id"] for i in instructions}
                else:
                    known = first_release.get(pid, set())
                    extra = [i["instr_id"] for i in instructions if i["instr_id"] not in known]
                    if extra:
                        failures.append(
                            {"payment_id": pid, "height": height,
                             "problem": f"re-release invented instructions {extra}"}
                        )
        out.append(
            {
                "check": "conservation",
                "chain": chain_id,
                "ok": not failures,
                "detail": failures or "all releases conserve the approved amount",
            }
        )
    return out


def _check_wage_directness(network) -> List[dict]:
    out = []
    for chain_id in _payment_chains(network):
        chain = network.chain(chain_id)
        wage_payments = set()
        failures = []
        for height, tx in _committed_txs(chain):
            payload = tx["payload"]
            if payload.get("type") == ev.PAYMENT_CREATED and payload.get("scenario") == "BuilderWages":
                wage_payments.add(payload.get("payment_id"))
            elif (
                payload.get("type") == ev.DISBURSEMENT_ISSUED
                and payload.get("payment_id") in wage_payments
            ):
                for instr in payload.get("instructions") or []:
                    if instr.get("account", {}).get("kind") != "Personal":
                        failures.append(
                            {"payment_id": payload["payment_id"], "height": height,
                             "problem": f"wage instruction credits {instr.get('account')}"}
                        )
        out.append(
            {
                "check": "wage-directness",
                "chain": chain_id,
                "ok": not failures,
                "detail": failures or "wages credit personal accounts only",
            }
        )
    return out


def _check_nonce_uniqueness(network) -> dict:
    seen: Dict[str, str] = {}
    duplicates = []
    for chain_id in network.chain_ids():
        chain = network.chain(chain_id)
        for height in range(chain.tip + 1):
            block = chain.blocks[height]
            for tx, result in zip(block["txs"], chain.results[height]):
                if not result.applied:
                    continue
                proof = tx["payload"].get("challenge_proof")
                if not isinstance(proof, dict):
                    continue
                nonce = proof.get("nonce")
                where = f"{chain_id}@{height}"
                if nonce in seen:
                    duplicates.append({"nonce": nonce, "first": seen[nonce], "again": where})
                else:
                    seen[nonce] = where
    return {
        "check": "nonce-uniqueness",
        "ok": not duplicates,
        "detail": duplicates or f"{len(seen)} nonces, all single-use",
    }


def _check_replicas(network) -> List[dict]:
    out = []
    for chain_id in network.chain_ids():
        chain = network.chain(chain_id)
        if chain.tip < 0:
            out.append({"check": "replica-convergence", "chain": chain_id, "ok": True,
                        "detail": "empty chain"})
            continue
        expected = chain.roots[-1]
        roots = network.replica_roots(chain_id)
        bad = {rid: root for rid, root in roots.items() if root != expected}
        out.append(
            {
                "check": "replica-convergence",
                "chain": chain_id,
                "ok": not bad,
                "detail": bad or f"{len(roots)} replicas at root {expected[:12]}",
            }
        )
    return out


def _check_terminality(network) -> List[dict]:
    """Independent event fold: nothing applied may touch a terminal payment."""
    out = []
    for chain_id in _payment_chains(network):
        chain = network.chain(chain_id)
        states: Dict[str, str] = {}
        chain_len: Dict[str, int] = {}
        instr_ids: Dict[str, list] = {}
        statuses: Dict[str, dict] = {}
        failures = []
        for height in range(chain.tip + 1):
            block = chain.blocks[height]
            for tx, result in zip(block["txs"], chain.results[height]):
                if not result.applied:
                    continue
                payload = tx["payload"]
                kind = payload.get("type")
                pid = payload.get("payment_id")
                if pid is None:
                    continue
                if states.get(pid) in ("Confirmed", "Rejected"):
                    failures.append(
                        {"payment_id": pid, "height": height,
                         "problem": f"{kind} applied after terminal state {states[pid]}"}
                    )
                    continue
                if kind == ev.PAYMENT_CREATED:
                    states[pid] = "Draft"
                elif kind == ev.PAYMENT_SUBMITTED:
                    states[pid] = "InReview"
                    chain_len[pid] = len(payload.get("approval_chain") or [])
                elif kind == ev.PAYMENT_REVIEWED:
                    if payload.get("verdict") == "reject":
                        states[pid] = "Rejected"
                    elif payload.get("step_index", 0) + 1 >= chain_len.get(pid, 0):
                        states[pid] = "Approved"
                elif kind == ev.DISBURSEMENT_ISSUED:
                    states[pid] = "Queued"
                    batch = [i["instr_id"] for i in payload.get("instructions") or []]
                    if payload.get("release_ordinal") == 0:
                        instr_ids[pid] = batch
                        statuses[pid] = {i: "Issued" for i in batch}
                    else:
                        for instr in batch:
                            statuses.setdefault(pid, {})[instr] = "Issued"
                elif kind == ev.DISBURSEMENT_RESULT:
                    book = statuses.setdefault(pid, {})
                    for row in payload.get("results") or []:
                        if book.get(row.get("instr_id")) != "Settled":
                            book[row["instr_id"]] = row.get("status")
                    everything = [book.get(i) for i in instr_ids.get(pid, [])]
                    if everything and all(s == "Settled" for s in everything):
                        states[pid] = "Confirmed"
                    elif everything and all(s in ("Settled", "Returned") for s in everything):
                        states[pid] = "PartiallyFailed"
                    else:
                        states[pid] = "Disbursing"
        out.append(
            {
                "check": "terminality",
                "chain": chain_id,
                "ok": not failures,
                "detail": failures or "terminal states are final",
            }
        )
    return out
