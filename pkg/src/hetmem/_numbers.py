"""Exact-number plumbing: every energy, latency and area is a Fraction."""

from __future__ import annotations

import json
from decimal import Decimal, localcontext
from fractions import Fraction
from numbers import Rational

__all__ = ["to_fraction", "fmt3", "json_number", "loads_exact"]


def to_fraction(value, field: str = "value") -> Fraction:
    """Convert an int, Decimal, numeric string or Fraction exactly.

    Binary floats are rejected unless they were produced by ``repr`` of a
    short decimal; we go through ``repr`` so ``0.229`` means 229/1000.
    """
    if isinstance(value, bool):
        raise TypeError(f"{field}: expected a number, got bool")
    if isinstance(value, (int, Fraction, Rational)):
        return Fraction(value)
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(Decimal(repr(value)))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError:
            raise TypeError(f"{field}: {value!r} is not a number") from None
    raise TypeError(f"{field}: expected a number, got {type(value).__name__}")


def fmt3(value: Fraction) -> str:
    """Fixed 3-digit decimal rendering, round-half-even."""
    value = Fraction(value)
    with localcontext() as ctx:
        ctx.prec = 80
        q = Decimal(value.numerator) / Decimal(value.denominator)
        return str(q.quantize(Decimal("0.001")))


def json_number(value: Fraction):
    """Best JSON representation of an exact value.

    Integers stay ints; values whose float ``repr`` round-trips exactly are
    emitted as floats; anything else becomes a ``"p/q"`` string.
    """
    value = Fraction(value)
    if value.denominator == 1:
        return value.numerator
    as_float = float(value)
    if Fraction(Decimal(repr(as_float))) == value:
        return as_float
    return f"{value.numerator}/{value.denominator}"


def loads_exact(text: str):
    """``json.loads`` that parses non-integers as Decimal (no rounding)."""
    return json.loads(text, parse_float=Decimal)
