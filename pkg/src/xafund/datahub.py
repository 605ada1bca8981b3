"""Chain-fed query model: scans committed blocks into relational tables.

The chain is the source of truth; these tables are a disposable projection.
Ingestion folds applied events only (rejected transactions never project),
is idempotent per cursor, and deterministic: dropping the tables and
re-ingesting from zero reproduces the incremental result bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import sqlite3
import threading
from typing import Dict, List, Optional

from . import events as ev
from .errors import BadFilter, UnknownKind
from .ledger.chain import CORE_CHAIN_ID

_SCHEMA = """
CREATE TABLE IF NOT EXISTS cursor(chain_id TEXT PRIMARY KEY, last_height INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS orgs(
    org_id TEXT PRIMARY KEY, name TEXT, role TEXT, admin_user TEXT, accounts TEXT);
CREATE TABLE IF NOT EXISTS users(
    user_id TEXT PRIMARY KEY, org_id TEXT, role TEXT, key_version INTEGER);
CREATE TABLE IF NOT EXISTS projects(
    project_id TEXT PRIMARY KEY, name TEXT, owner_org TEXT,
    budget INTEGER, stage TEXT);
CREATE TABLE IF NOT EXISTS contracts(
    contract_id TEXT PRIMARY KEY, project_id TEXT, party_a TEXT, party_b TEXT,
    amount INTEGER, status TEXT, parent TEXT);
CREATE TABLE IF NOT EXISTS payments(
    payment_id TEXT PRIMARY KEY, chain_id TEXT, project_id TEXT, contract_id TEXT,
    scenario TEXT, mode TEXT, amount INTEGER, state TEXT,
    initiator TEXT, initiator_org TEXT, payer_org TEXT,
    seq INTEGER, current_step INTEGER,
    created_tick INTEGER, submitted_tick INTEGER,
    approved_tick INTEGER, finished_tick INTEGER);
CREATE TABLE IF NOT EXISTS steps(
    payment_id TEXT, step_index INTEGER, kind TEXT, org_id TEXT,
    decided_by TEXT, verdict TEXT, decided_tick INTEGER,
    PRIMARY KEY(payment_id, step_index));
CREATE TABLE IF NOT EXISTS instructions(
    instr_id TEXT PRIMARY KEY, payment_id TEXT, ordinal INTEGER,
    beneficiary TEXT, account_number TEXT, account_kind TEXT, bank_id TEXT,
    amount INTEGER, purpose TEXT, status TEXT, reason TEXT);
CREATE TABLE IF NOT EXISTS anchors(
    chain_id TEXT, height INTEGER, digest TEXT, PRIMARY KEY(chain_id, height));
"""

REPORT_KINDS = ("FundsByProject", "FundsByOrg", "WagePayments", "ApprovalLatency")


class DataHub:
    def __init__(self, network, db_path: str = ":memory:"):
        self.network = network
        self._conn = sqlite3.connect(db_path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.RLock()
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    # -- ingestion ----------------------------------------------------------------

    def cursor(self) -> Dict[str, int]:
        with self._lock:
            rows = self._conn.execute("SELECT chain_id, last_height FROM cursor").fetchall()
            return {r["chain_id"]: r["last_height"] for r in rows}

    def reset(self) -> None:
        with self._lock:
            for table in ("cursor", "orgs", "users", "projects", "contracts",
                          "payments", "steps", "instructions", "anchors"):
                self._conn.execute(f"DELETE FROM {table}")
            self._conn.commit()

    def ingest(self) -> Dict[str, int]:
        """Fold all committed blocks past the cursor; returns the new cursor."""
        with self._lock:
            positions = self.cursor()
            for chain_id in self.network.chain_ids():
                chain = self.network.chain(chain_id)
                start = positions.get(chain_id, -1) + 1
                for height in range(start, chain.tip + 1):
                    block = chain.blocks[height]
                    results = chain.results[height]
                    for index, (tx, result) in enumerate(zip(block["txs"], results)):
                        if result.applied:
                            self._fold(chain_id, height, index, tx)
                    self._conn.execute(
                        "INSERT INTO cursor(chain_id, last_height) VALUES(?,?) "
                        "ON CONFLICT(chain_id) DO UPDATE SET last_height=excluded.last_height",
                        (chain_id, height),
                    )
            self._conn.commit()
            return self.cursor()

    def _fold(self, chain_id: str, height: int, index: int, tx: dict) -> None:
        p = tx["payload"]
        kind = p["type"]
        seq = height * 1_000_000 + index
        c = self._conn
        if kind == ev.ORG_REGISTERED:
            c.execute(
                "INSERT OR REPLACE INTO orgs VALUES(?,?,?,?,?)",
                (p["org_id"], p["name"], p["role"], p["admin_user"], json.dumps([])),
            )
        elif kind == ev.BANK_ACCOUNT_SET:
            row = c.execute("SELECT accounts FROM orgs WHERE org_id=?", (p["org_id"],)).fetchone()
            accounts = json.loads(row["accounts"]) if row else []
            accounts = [
                a for a in accounts
                if not (a["bank_id"] == p["account"]["bank_id"]
                        and a["account_number"] == p["account"]["account_number"])
            ]
            accounts.append(p["account"])
            c.execute("UPDATE orgs SET accounts=? WHERE org_id=?",
                      (json.dumps(accounts), p["org_id"]))
        elif kind == ev.USER_KEY_REGISTERED:
            c.execute(
                "INSERT OR REPLACE INTO users VALUES(?,?,?,?)",
                (p["user_id"], p["org_id"], p["role"], p["key_version"]),
            )
        elif kind == ev.PROJECT_CREATED:
            c.execute(
                "INSERT OR REPLACE INTO projects VALUES(?,?,?,?,?)",
                (p["project_id"], p["name"], p["owner_org"], p["budget_total"],
                 "FeasibilityStudy"),
            )
        elif kind == ev.PROJECT_STAGE_ADVANCED:
            c.execute("UPDATE projects SET stage=? WHERE project_id=?",
                      (p["to_stage"], p["project_id"]))
        elif kind == ev.CONTRACT_CREATED:
            c.execute(
                "INSERT OR REPLACE INTO contracts VALUES(?,?,?,?,?,?,?)",
                (p["contract_id"], p["project_id"], p["party_a"], p["party_b"],
                 p["amount"], "Draft", p.get("parent_contract")),
            )
        elif kind == ev.CONTRACT_REVIEWED:
            status = "Active" if p["verdict"] == "approve" else "Draft"
            c.execute("UPDATE contracts SET status=? WHERE contract_id=?",
                      (status, p["contract_id"]))
        elif kind == ev.CONTRACT_AMENDED:
            changes = p.get("changes") or {}
            if "amount" in changes:
                c.execute("UPDATE contracts SET amount=? WHERE contract_id=?",
                          (changes["amount"], p["contract_id"]))
            if p.get("submit_for_review"):
                c.execute("UPDATE contracts SET status='UnderReview' WHERE contract_id=?",
                          (p["contract_id"],))
        elif kind == ev.CONTRACT_VOIDED:
            c.execute("UPDATE contracts SET status='Voided' WHERE contract_id=?",
                      (p["contract_id"],))
        elif kind == ev.ANCHOR_CHECKPOINT:
            c.execute(
                "INSERT OR REPLACE INTO anchors VALUES(?,?,?)",
                (p["payment_chain"], p["anchored_height"], p["header_digest"]),
            )
        elif kind == ev.PAYMENT_CREATED:
            row = c.execute("SELECT org_id FROM users WHERE user_id=?",
                            (tx["initiator"],)).fetchone()
            initiator_org = row["org_id"] if row else None
            contract = c.execute("SELECT party_a FROM contracts WHERE contract_id=?",
                                 (p["contract_id"],)).fetchone()
            if p["scenario"] in ("DailyReimbursement", "StaffLoan"):
                payer_org = initiator_org
            else:
                payer_org = contract["party_a"] if contract else None
            c.execute(
                "INSERT OR REPLACE INTO payments VALUES(?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?)",
                (p["payment_id"], chain_id, p["project_id"], p["contract_id"],
                 p["scenario"], p["mode"], p["amount"], "Draft",
                 tx["initiator"], initiator_org, payer_org,
                 seq, None, p["tick"], None, None, None),
            )
        elif kind == ev.PAYMENT_SUBMITTED:
            c.execute(
                "UPDATE payments SET state='InReview', submitted_tick=?, current_step=0 "
                "WHERE payment_id=?",
                (p["tick"], p["payment_id"]),
            )
            for step in p["approval_chain"]:
                c.execute(
                    "INSERT OR REPLACE INTO steps VALUES(?,?,?,?,?,?,?)",
                    (p["payment_id"], step["step_index"], step["kind"], step["org_id"],
                     None, None, None),
                )
        elif kind == ev.PAYMENT_REVIEWED:
            c.execute(
                "UPDATE steps SET decided_by=?, verdict=?, decided_tick=? "
                "WHERE payment_id=? AND step_index=?",
                (tx["initiator"], p["verdict"], p["tick"], p["payment_id"], p["step_index"]),
            )
            total = c.execute("SELECT COUNT(*) AS n FROM steps WHERE payment_id=?",
                              (p["payment_id"],)).fetchone()["n"]
            if p["verdict"] == "reject":
                c.execute(
                    "UPDATE payments SET state='Rejected', finished_tick=?, current_step=NULL "
                    "WHERE payment_id=?",
                    (p["tick"], p["payment_id"]),
                )
            elif p["step_index"] + 1 < total:
                c.execute("UPDATE payments SET current_step=? WHERE payment_id=?",
                          (p["step_index"] + 1, p["payment_id"]))
            else:
                c.execute(
                    "UPDATE payments SET state='Approved', approved_tick=?, current_step=NULL "
                    "WHERE payment_id=?",
                    (p["tick"], p["payment_id"]),
                )
        elif kind == ev.DISBURSEMENT_ISSUED:
            for instr in p["instructions"]:
                c.execute(
                    "INSERT OR REPLACE INTO instructions VALUES(?,?,?,?,?,?,?,?,?,?,?)",
                    (instr["instr_id"], p["payment_id"], instr["ordinal"],
                     instr["beneficiary"], instr["account"]["account_number"],
                     instr["account"]["kind"], p["bank_id"], instr["amount"],
                     instr["purpose"], "Issued", None),
                )
            c.execute("UPDATE payments SET state='Queued' WHERE payment_id=?",
                      (p["payment_id"],))
        elif kind == ev.DISBURSEMENT_RESULT:
            for row in p["results"]:
                current = c.execute(
                    "SELECT status FROM instructions WHERE instr_id=?",
                    (row["instr_id"],),
                ).fetchone()
                if current is not None and current["status"] == "Settled":
                    continue
                c.execute(
                    "UPDATE instructions SET status=?, reason=? WHERE instr_id=?",
                    (row["status"], row.get("reason"), row["instr_id"]),
                )
            states = [
                r["status"]
                for r in c.execute(
                    "SELECT status FROM instructions WHERE payment_id=?",
                    (p["payment_id"],),
                ).fetchall()
            ]
            if states and all(s == "Settled" for s in states):
                c.execute(
                    "UPDATE payments SET state='Confirmed', finished_tick=? WHERE payment_id=?",
                    (p["tick"], p["payment_id"]),
                )
            elif states and all(s in ("Settled", "Returned") for s in states):
                c.execute("UPDATE payments SET state='PartiallyFailed' WHERE payment_id=?",
                          (p["payment_id"],))
            else:
                c.execute("UPDATE payments SET state='Disbursing' WHERE payment_id=?",
                          (p["payment_id"],))

    # -- queries ---------------------------------------------------------------------

    def query_payments(self, project: Optional[str] = None, org: Optional[str] = None,
                       scenario: Optional[str] = None, state: Optional[str] = None,
                       limit: int = 50, offset: int = 0) -> List[dict]:
        if scenario is not None and scenario not in ev.SCENARIOS:
            raise BadFilter(f"unknown scenario {scenario}")
        if state is not None and state not in ev.PAYMENT_STATES:
            raise BadFilter(f"unknown state {state}")
        if not isinstance(limit, int) or not isinstance(offset, int) or limit < 1 or offset < 0:
            raise BadFilter("limit must be >= 1 and offset >= 0")
        clauses, args = [], []
        if project is not None:
            clauses.append("project_id=?")
            args.append(project)
        if org is not None:
            clauses.append("(payer_org=? OR initiator_org=?)")
            args.extend([org, org])
        if scenario is not None:
            clauses.append("scenario=?")
            args.append(scenario)
        if state is not None:
            clauses.append("state=?")
            args.append(state)
        where = f"WHERE {' AND '.join(clauses)}" if clauses else ""
        with self._lock:
            rows = self._conn.execute(
                f"SELECT * FROM payments {where} ORDER BY chain_id, seq LIMIT ? OFFSET ?",
                (*args, limit, offset),
            ).fetchall()
            return [dict(r) for r in rows]

    def payment_detail(self, payment_id: str) -> Optional[dict]:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM payments WHERE payment_id=?", (payment_id,)
            ).fetchone()
            if row is None:
                return None
            detail = dict(row)
            detail["steps"] = [
                dict(r)
                for r in self._conn.execute(
                    "SELECT * FROM steps WHERE payment_id=? ORDER BY step_index",
                    (payment_id,),
                ).fetchall()
            ]
            detail["instructions"] = [
                dict(r)
                for r in self._conn.execute(
                    "SELECT * FROM instructions WHERE payment_id=? ORDER BY ordinal",
                    (payment_id,),
                ).fetchall()
            ]
            return detail

    def inbox_for(self, user_id: str) -> List[dict]:
        """Pending review items the given user is qualified to decide."""
        with self._lock:
            user = self._conn.execute(
                "SELECT * FROM users WHERE user_id=?", (user_id,)
            ).fetchone()
            if user is None:
                return []
            org = self._conn.execute(
                "SELECT role FROM orgs WHERE org_id=?", (user["org_id"],)
            ).fetchone() if user["org_id"] else None
            is_gov = bool(org and org["role"] == "Government")
            rows = self._conn.execute(
                "SELECT p.payment_id, p.scenario, p.mode, p.amount, p.current_step, "
                "p.submitted_tick, p.initiator, s.kind, s.org_id "
                "FROM payments p JOIN steps s "
                "ON s.payment_id = p.payment_id AND s.step_index = p.current_step "
                "WHERE p.state='InReview' ORDER BY p.chain_id, p.seq"
            ).fetchall()
            now = self.network_now()
            items = []
            for r in rows:
                if r["initiator"] == user_id:
                    continue
                qualified = (
                    is_gov if r["kind"] == "government" else r["org_id"] == user["org_id"]
                )
                if not qualified:
                    continue
                items.append(
                    {
                        "payment_id": r["payment_id"],
                        "scenario": r["scenario"],
                        "mode": r["mode"],
                        "amount": r["amount"],
                        "step_index": r["current_step"],
                        "required": {"kind": r["kind"], "org_id": r["org_id"]},
                        "age_ticks": now - (r["submitted_tick"] or now),
                    }
                )
            return items

    def network_now(self) -> int:
        clock = getattr(self.network, "_clock", None)
        return clock.now if clock is not None else 0

    # -- aggregates ---------------------------------------------------------------------

    def dashboard_aggregates(self) -> dict:
        with self._lock:
            c = self._conn
            projects = c.execute("SELECT COUNT(*) AS n FROM projects").fetchone()["n"]
            enterprises = c.execute(
                "SELECT COUNT(*) AS n FROM orgs WHERE role != 'Government'"
            ).fetchone()["n"]
            contracts = c.execute("SELECT COUNT(*) AS n FROM contracts").fetchone()["n"]
            cumulative = c.execute(
                "SELECT COALESCE(SUM(amount), 0) AS s FROM instructions WHERE status='Settled'"
            ).fetchone()["s"]
            wages = c.execute(
                "SELECT COALESCE(SUM(i.amount), 0) AS s FROM instructions i "
                "JOIN payments p ON p.payment_id = i.payment_id "
                "WHERE i.status='Settled' AND p.scenario='BuilderWages'"
            ).fetchone()["s"]
            per_project = {}
            for row in c.execute(
                "SELECT project_id, name, budget, stage FROM projects ORDER BY project_id"
            ).fetchall():
                allocated = c.execute(
                    "SELECT COALESCE(SUM(i.amount), 0) AS s FROM instructions i "
                    "JOIN payments p ON p.payment_id = i.payment_id "
                    "WHERE i.status='Settled' AND p.project_id=?",
                    (row["project_id"],),
                ).fetchone()["s"]
                per_project[row["project_id"]] = {
                    "name": row["name"],
                    "budget": row["budget"],
                    "stage": row["stage"],
                    "funds_allocated": allocated,
                }
            return {
                "projects_on_chain": projects,
                "enterprises": enterprises,
                "contracts_on_chain": contracts,
                "cumulative_payment": cumulative,
                "wages_paid": wages,
                "per_project": per_project,
            }

    # -- reports ------------------------------------------------------------------------

    def export_report(self, kind: str) -> str:
        if kind not in REPORT_KINDS:
            raise UnknownKind(f"unknown report kind {kind}")
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        with self._lock:
            c = self._conn
            if kind == "FundsByProject":
                writer.writerow(
                    ["project_id", "name", "budget_fen", "settled_fen", "confirmed_payments"]
                )
                for row in c.execute(
                    "SELECT project_id, name, budget FROM projects ORDER BY project_id"
                ).fetchall():
                    settled = c.execute(
                        "SELECT COALESCE(SUM(i.amount),0) AS s FROM instructions i "
                        "JOIN payments p ON p.payment_id=i.payment_id "
                        "WHERE i.status='Settled' AND p.project_id=?",
                        (row["project_id"],),
                    ).fetchone()["s"]
                    confirmed = c.execute(
                        "SELECT COUNT(*) AS n FROM payments "
                        "WHERE project_id=? AND state='Confirmed'",
                        (row["project_id"],),
                    ).fetchone()["n"]
                    writer.writerow([row["project_id"], row["name"], row["budget"],
                                     settled, confirmed])
            elif kind == "FundsByOrg":
                writer.writerow(["org_id", "name", "role", "received_fen", "paid_fen"])
                for row in c.execute(
                    "SELECT org_id, name, role FROM orgs ORDER BY org_id"
                ).fetchall():
                    received = c.execute(
                        "SELECT COALESCE(SUM(amount),0) AS s FROM instructions "
                        "WHERE status='Settled' AND beneficiary=?",
                        (row["org_id"],),
                    ).fetchone()["s"]
                    paid = c.execute(
                        "SELECT COALESCE(SUM(i.amount),0) AS s FROM instructions i "
                        "JOIN payments p ON p.payment_id=i.payment_id "
                        "WHERE i.status='Settled' AND p.payer_org=?",
                        (row["org_id"],),
                    ).fetchone()["s"]
                    writer.writerow([row["org_id"], row["name"], row["role"], received, paid])
            elif kind == "WagePayments":
                writer.writerow(
                    ["payment_id", "project_id", "worker_id", "account_number",
                     "amount_fen", "status"]
                )
                for row in c.execute(
                    "SELECT i.payment_id, p.project_id, i.beneficiary, i.account_number, "
                    "i.amount, i.status FROM instructions i "
                    "JOIN payments p ON p.payment_id=i.payment_id "
                    "WHERE p.scenario='BuilderWages' "
                    "ORDER BY i.payment_id, i.ordinal"
                ).fetchall():
                    writer.writerow(list(row))
            elif kind == "ApprovalLatency":
                writer.writerow(
                    ["payment_id", "scenario", "mode", "submitted_tick",
                     "approved_tick", "latency_ticks"]
                )
                for row in c.execute(
                    "SELECT payment_id, scenario, mode, submitted_tick, approved_tick "
                    "FROM payments WHERE submitted_tick IS NOT NULL "
                    "AND approved_tick IS NOT NULL ORDER BY payment_id"
                ).fetchall():
                    writer.writerow(
                        [row["payment_id"], row["scenario"], row["mode"],
                         row["submitted_tick"], row["approved_tick"],
                         row["approved_tick"] - row["submitted_tick"]]
                    )
        return out.getvalue()

    def table_snapshot(self) -> dict:
        """Full projection contents, used by idempotency/determinism tests."""
        with self._lock:
            out = {}
            for table in ("orgs", "users", "projects", "contracts", "payments",
                          "steps", "instructions", "anchors"):
                rows = self._conn.execute(
                    f"SELECT * FROM {table}"
                ).fetchall()
                out[table] = sorted(tuple(r) for r in rows)
            return out
