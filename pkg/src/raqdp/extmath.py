"""Exact rational arithmetic extended with infinities.

All bound and sensitivity computations run on `fractions.Fraction`; the only
floats that ever enter are ``+inf``/``-inf`` markers (Fraction compares cleanly
against them). Floats proper appear at reporting and noise-sampling time only.
"""

from __future__ import annotations

from fractions import Fraction

INF = float("inf")
NEG_INF = float("-inf")

# A rational, or +-inf. No other floats are allowed in this role.
Ext = Fraction | float


def is_infinite(x: Ext) -> bool:
    return x == INF or x == NEG_INF


def ext_mul(a: Ext, b: Ext) -> Ext:
    """Multiply with the convention 0 * inf = 0 (used by min(delta*S, diam))."""
    if a == 0 or b == 0:
        return Fraction(0)
    if is_infinite(a) or is_infinite(b):
        sign = (1 if a > 0 else -1) * (1 if b > 0 else -1)
        return INF if sign > 0 else NEG_INF
    return a * b


def ext_add(a: Ext, b: Ext) -> Ext:
    if is_infinite(a) or is_infinite(b):
        if is_infinite(a) and is_infinite(b) and (a > 0) != (b > 0):
            raise ArithmeticError("inf + -inf is undefined")
        return a if is_infinite(a) else b
    return a + b


def ext_sub(a: Ext, b: Ext) -> Ext:
    return ext_add(a, ext_neg(b))


def ext_neg(x: Ext) -> Ext:
    if x == INF:
        return NEG_INF
    if x == NEG_INF:
        return INF
    return -x


def ext_abs(x: Ext) -> Ext:
    return ext_neg(x) if x < 0 else x


def ext_div2(x: Ext) -> Ext:
    """Halve a value (exact for rationals, identity-on-sign for infinities)."""
    if is_infinite(x):
        return x
    return x / 2


def parse_rational(text: str) -> Fraction:
    """Parse 'p/q', integer, or decimal text into an exact Fraction."""
    s = text.strip()
    if "/" in s:
        num, _, den = s.partition("/")
        return Fraction(int(num.strip()), int(den.strip()))
    return Fraction(s)  # Fraction accepts '3' and '1.5' exactly


def format_ext(x: Ext) -> str:
    """Render as 'p/q' (or plain integer), 'inf', or '-inf'."""
    if x == INF:
        return "inf"
    if x == NEG_INF:
        return "-inf"
    f = Fraction(x)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def ext_float(x: Ext) -> float:
    return float(x)
