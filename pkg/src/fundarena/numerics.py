"""Exact-decimal money arithmetic: 6 fractional digits, round-half-even.

Every price, cash amount, and NAV in the system is a ``Decimal`` quantized to
six places at operation boundaries; binary floats never touch stored money.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation, ROUND_HALF_EVEN

MONEY_EXP = Decimal("0.000001")


def d(value) -> Decimal:
    """Parse a money value from str/int/Decimal without going through float."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        # Floats are accepted at the edge (JSON bodies) but converted via str
        # so the operator sees the digits they typed, not binary noise.
        return Decimal(str(value))
    try:
        return Decimal(value)
    except (InvalidOperation, TypeError, ValueError) as exc:
        raise ValueError(f"not a decimal value: {value!r}") from exc


def q6(value) -> Decimal:
    """Quantize to 6 fractional digits, banker's rounding."""
    return d(value).quantize(MONEY_EXP, rounding=ROUND_HALF_EVEN)


def money_str(value: Decimal) -> str:
    """Canonical wire form: fixed 6-digit fraction, no exponent."""
    return format(q6(value), "f")


def fee_for(price: Decimal, quantity: int, fee_bps: int) -> Decimal:
    """fee = round(price * quantity * fee_bps / 10000, 6 digits)."""
    return q6(price * Decimal(quantity) * Decimal(fee_bps) / Decimal(10000))
