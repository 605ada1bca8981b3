"""Money helpers.

All amounts in the system are 64-bit integers of fen (1/100 CNY).  There is
deliberately no Decimal or float anywhere in a fund path; anything that needs
fractions (splitting) is done with exact integer arithmetic.
"""

from __future__ import annotations

MAX_AMOUNT = 2**63 - 1


def check_amount(value, allow_zero: bool = False) -> int:
    """Validate an amount in fen. Returns the value or raises ValueError."""
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError("amount must be an integer number of fen")
    if value > MAX_AMOUNT:
        raise ValueError("amount exceeds 64-bit range")
    if value < 0 or (value == 0 and not allow_zero):
        raise ValueError("amount must be positive")
    return value


def format_fen(value: int) -> str:
    """Render fen as a yuan string for human-facing output. Exact, no floats."""
    sign = "-" if value < 0 else ""
    value = abs(value)
    return f"{sign}{value // 100}.{value % 100:02d}"


def mod97_valid(account_number: str) -> bool:
    """Bank account checksum: the digit string taken mod 97 must leave 1.

    Non-digit strings and empty strings are invalid.
    """
    if not account_number or not account_number.isdigit():
        return False
    return int(account_number) % 97 == 1


def make_account_number(prefix_digits: str) -> str:
    """Extend a digit prefix with two check digits so mod97_valid holds."""
    if not prefix_digits.isdigit():
        raise ValueError("prefix must be digits")
    base = int(prefix_digits) * 100
    check = (1 - base) % 97
    return f"{prefix_digits}{check:02d}"
