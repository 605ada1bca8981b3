"""Independent reference implementations used to check the real ones.

Everything here is deliberately written a different way from the production
code (Fractions instead of integer modular arithmetic, exhaustive search
instead of sorting) so a shared bug is unlikely.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Dict, List, Optional, Tuple


def mod97_by_digit(digits: str) -> Optional[int]:
    """Checksum remainder computed digit by digit (no big-int conversion)."""
    if not digits or any(c not in "0123456789" for c in digits):
        return None
    remainder = 0
    for c in digits:
        remainder = (remainder * 10 + int(c)) % 97
    return remainder


def split_oracle(plan: List[dict], amount: int) -> Optional[List[Tuple[int, int]]]:
    """Reference allocation as [(plan_index, amount)], or None if infeasible.

    Fixed claims are simulated sequentially by ascending priority; the
    weighted remainder is distributed by exhaustively searching all ways of
    assigning the leftover fen and picking the assignment that maximizes the
    total fractional remainder, preferring lexicographically smaller
    (beneficiary, index) sets on ties.  Exponential, so only usable for small
    plans (the production algorithm must match it there).
    """
    remaining = amount
    allocations: Dict[int, int] = {}

    fixed = [(e["claim"]["priority"], i) for i, e in enumerate(plan) if e["claim"]["kind"] == "fixed"]
    for _, i in sorted(fixed):
        take = plan[i]["claim"]["amount"]
        if take > remaining:
            take = remaining
        allocations[i] = take
        remaining -= take

    weighted = [i for i, e in enumerate(plan) if e["claim"]["kind"] == "weighted"]
    if remaining > 0 and not weighted:
        return None
    if weighted:
        total = sum(plan[i]["claim"]["weight"] for i in weighted)
        shares = {i: Fraction(remaining * plan[i]["claim"]["weight"], total) for i in weighted}
        floors = {i: int(shares[i]) for i in weighted}
        leftover = remaining - sum(floors.values())
        best = None
        for combo in itertools.combinations(weighted, leftover):
            score = sum(shares[i] - floors[i] for i in combo)
            tie_key = sorted((plan[i]["beneficiary"], i) for i in combo)
            candidate = (-score, tie_key, combo)
            if best is None or candidate < best:
                best = candidate
        chosen = set(best[2]) if best else set()
        for i in weighted:
            allocations[i] = floors[i] + (1 if i in chosen else 0)

    return [(i, a) for i, a in sorted(allocations.items()) if a > 0]


def fixed_entry(beneficiary, amount, priority, account=None):
    return {
        "beneficiary": beneficiary,
        "account": account or valid_account(beneficiary),
        "claim": {"kind": "fixed", "amount": amount, "priority": priority},
    }


def weighted_entry(beneficiary, weight, account=None):
    return {
        "beneficiary": beneficiary,
        "account": account or valid_account(beneficiary),
        "claim": {"kind": "weighted", "weight": weight},
    }


def valid_account(holder: str, bank_id: str = "INSTANT", kind: str = "Corporate") -> dict:
    import hashlib

    from xafund.amounts import make_account_number

    seed = int.from_bytes(hashlib.sha256(holder.encode()).digest()[:5], "big") % 10**10
    return {
        "bank_id": bank_id,
        "account_number": make_account_number(f"6{seed:010d}"),
        "holder": holder,
        "kind": kind,
    }
