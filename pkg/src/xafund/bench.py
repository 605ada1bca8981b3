"""Load harness: many payments through the full pipeline, measured.

Latency is logical (ticks from submission to confirmation) because the
system runs on a logical clock; throughput and memory are physical.  The
``ordered`` mode serializes whole payment flows in a fixed global order and
uses a seeded nonce source, so runs at any concurrency produce identical
chains; it exists for determinism checks, not for speed.
"""

from __future__ import annotations

import random
import resource
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

from .fixtures import fixture_wallet
from .harness import Deployment
from .rules import review_digest, review_op_digest, submit_op_digest

BENCH_CONTRACT = "C-100"
BENCH_SCENARIO = "ProjectProgressPayment"


class BenchHarness:
    def __init__(self, deployment: Deployment, ordered: bool = False):
        self.d = deployment
        self.wallet = fixture_wallet()
        self.ordered = ordered
        self._order_gate = threading.Semaphore(1) if ordered else None
        if ordered:
            self.d.challenges._rng = random.Random(0xBE7C4)

    def _challenge(self, user: str, op_digest: str) -> dict:
        issued = self.d.challenges.issue(user, op_digest)
        return self.wallet.challenge_proof(user, issued, op_digest)

    def _drive_one(self, index: int) -> Optional[str]:
        payment_id = f"BENCH-{index:05d}"
        payments = self.d.payments
        initiator = "gc-fin"  # payee side requests a progress payment
        payments.create_payment(
            payment_id, BENCH_CONTRACT, BENCH_SCENARIO, "Application",
            1_000_000 + index, initiator, self.wallet.signer(initiator),
        )
        proof = self._challenge(initiator, submit_op_digest(payment_id))
        payments.submit_payment(payment_id, initiator, self.wallet.signer(initiator), proof)
        for step_index, reviewer in enumerate(("own-fin", "gov-rev")):
            proof = self._challenge(
                reviewer, review_op_digest(payment_id, step_index, "approve")
            )
            signature = self.wallet.sign_digest(
                reviewer, review_digest(payment_id, step_index, "approve")
            )
            payments.review_payment(
                payment_id, step_index, "approve", signature, reviewer,
                self.wallet.signer(reviewer), proof,
            )
        payments.release_to_bank(payment_id)
        for _ in range(6):
            out = payments.poll_and_apply(payment_id)
            if out["state"] not in ("Queued", "Disbursing"):
                break
            self.d.clock.advance(3)
        return payment_id

    def _worker(self, index: int) -> Optional[str]:
        if self._order_gate is not None:
            with self._order_gate:
                return self._drive_one(index)
        return self._drive_one(index)

    def run(self, payments: int, concurrency: int) -> dict:
        start = time.monotonic()
        done: List[str] = []
        if payments > 0:
            with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
                for pid in pool.map(self._worker, range(payments)):
                    if pid is not None:
                        done.append(pid)
            self.d.anchor_all_due()
        elapsed = time.monotonic() - start

        latencies = []
        confirmed = 0
        for pid in done:
            record = self.d.payments.payment(pid)
            if record["state"] == "Confirmed":
                confirmed += 1
            if record["submitted_tick"] is not None and record["finished_tick"] is not None:
                latencies.append(record["finished_tick"] - record["submitted_tick"])
        latencies.sort()
        tx_count = sum(
            len(block["txs"])
            for cid in self.d.network.chain_ids()
            for block in self.d.network.chain(cid).blocks
        )
        return {
            "payments": payments,
            "confirmed": confirmed,
            "concurrency": concurrency,
            "ordered": self.ordered,
            "elapsed_s": round(elapsed, 3),
            "committed_txs": tx_count,
            "throughput_tps": round(tx_count / elapsed, 1) if elapsed > 0 and payments else 0,
            "p50_latency_ticks": _percentile(latencies, 50),
            "p95_latency_ticks": _percentile(latencies, 95),
            "peak_rss_kb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss,
        }


def _percentile(sorted_values: List[int], pct: int) -> Optional[int]:
    if not sorted_values:
        return None
    index = min(len(sorted_values) - 1, (pct * len(sorted_values)) // 100)
    return sorted_values[index]
