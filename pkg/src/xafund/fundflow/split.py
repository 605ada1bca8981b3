"""Exact allocation of an approved amount across a split plan.

The plan is a list of entries, each claiming either a fixed amount with a
priority or a positive integer weight.  Allocation is a pure function, all
integer arithmetic, and conserves the input amount to the fen:

1. Fixed claims are served in ascending priority, each receiving
   ``min(claim, remaining)``.
2. Whatever remains is distributed over the weighted entries: every entry
   gets ``floor(remaining * w_i / W)``, then the leftover fen are handed out
   one each in order of largest fractional remainder, ties going to the
   ascending beneficiary id (then plan position).
3. Zero-amount allocations are dropped from the output.

The same (plan, amount) input always yields the identical output list.
"""

from __future__ import annotations

from typing import List, Optional

from ..amounts import mod97_valid
from ..errors import BadPlan, EmptyPlan, UnallocatablePlan


def validate_plan(plan: List[dict]) -> None:
    """Structural validation; raises EmptyPlan/BadPlan."""
    if not plan:
        raise EmptyPlan("split plan has no entries")
    priorities = []
    for i, entry in enumerate(plan):
        claim = entry.get("claim") or {}
        kind = claim.get("kind")
        if not entry.get("beneficiary"):
            raise BadPlan(f"entry {i}: missing beneficiary")
        account = entry.get("account") or {}
        if not mod97_valid(account.get("account_number", "")):
            raise BadPlan(f"entry {i}: account fails checksum")
        if kind == "fixed":
            amount = claim.get("amount")
            priority = claim.get("priority")
            if not isinstance(amount, int) or amount <= 0:
                raise BadPlan(f"entry {i}: fixed claim must be a positive amount")
            if not isinstance(priority, int):
                raise BadPlan(f"entry {i}: fixed claim needs an integer priority")
            priorities.append(priority)
        elif kind == "weighted":
            weight = claim.get("weight")
            if not isinstance(weight, int) or weight <= 0:
                raise BadPlan(f"entry {i}: weight must be a positive integer")
        else:
            raise BadPlan(f"entry {i}: unknown claim kind {kind!r}")
    if len(priorities) != len(set(priorities)):
        raise BadPlan("fixed claim priorities must be unique")


def compute_split(plan: List[dict], amount: int) -> List[dict]:
    """Allocate ``amount`` over ``plan``; returns [{beneficiary, account, amount}].

    Raises UnallocatablePlan when a fixed-only plan cannot absorb the amount
    (conservation would be impossible).
    """
    validate_plan(plan)
    if not isinstance(amount, int) or amount <= 0:
        raise BadPlan("amount must be a positive integer of fen")

    allocations = [0] * len(plan)
    remaining = amount

    fixed = sorted(
        (i for i, e in enumerate(plan) if e["claim"]["kind"] == "fixed"),
        key=lambda i: plan[i]["claim"]["priority"],
    )
    for i in fixed:
        take = min(plan[i]["claim"]["amount"], remaining)
        allocations[i] = take
        remaining -= take

    weighted = [i for i, e in enumerate(plan) if e["claim"]["kind"] == "weighted"]
    if remaining > 0:
        if not weighted:
            raise UnallocatablePlan(
                f"{remaining} fen left over with no weighted entries to absorb them"
            )
        total_weight = sum(plan[i]["claim"]["weight"] for i in weighted)
        leftover = remaining
        remainders = []
        for i in weighted:
            share = remaining * plan[i]["claim"]["weight"]
            base = share // total_weight
            allocations[i] = base
            leftover -= base
            # fractional remainder as an exact integer numerator over W
            remainders.append((-(share % total_weight), plan[i]["beneficiary"], i))
        remainders.sort()
        for _, _, i in remainders[:leftover]:
            allocations[i] += 1

    out = []
    for i, units in enumerate(allocations):
        if units == 0:
            continue
        out.append(
            {
                "beneficiary": plan[i]["beneficiary"],
                "account": plan[i]["account"],
                "amount": units,
            }
        )
    assert sum(a["amount"] for a in out) == amount
    return out
