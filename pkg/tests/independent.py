"""A second reference implementation, sharing no code with crpoly.

Function values come from the stdlib ``decimal`` module (with a Taylor series
for sin), and rounding picks the nearest representable value by brute force
over an explicit value list.
"""

from __future__ import annotations

import decimal
from decimal import Decimal
from fractions import Fraction
from functools import lru_cache

PREC = 120


def _ctx():
    return decimal.Context(prec=PREC, Emax=10**6, Emin=-(10**6))


def _pi(ctx) -> Decimal:
    # the classic series from the decimal module recipes
    with decimal.localcontext(ctx) as c:
        c.prec += 2
        three = Decimal(3)
        lasts, t, s, n, na, d, da = 0, three, 3, 1, 0, 0, 24
        while s != lasts:
            lasts = s
            n, na = n + na, na + 8
            d, da = d + da, da + 32
            t = (t * n) / d
            s += t
    return +s


def _sin(x: Decimal, ctx) -> Decimal:
    with decimal.localcontext(ctx) as c:
        c.prec += 5
        term, total, k = x, x, 1
        while True:
            term = -term * x * x / ((2 * k) * (2 * k + 1))
            if abs(term) < Decimal(10) ** (-(PREC + 10)):
                break
            total += term
            k += 1
    return +total


def value(function: str, x: Fraction) -> Decimal:
    ctx = _ctx()
    with decimal.localcontext(ctx):
        d = Decimal(x.numerator) / Decimal(x.denominator)
        if function == "ln":
            return d.ln()
        if function == "log2":
            return d.ln() / Decimal(2).ln()
        if function == "log10":
            return d.log10()
        if function == "exp":
            return d.exp()
        if function == "exp2":
            return (d * Decimal(2).ln()).exp()
        if function == "exp10":
            return (d * Decimal(10).ln()).exp()
        if function == "sqrt":
            return d.sqrt()
        if function == "cbrt":
            r = abs(d).ln() / 3
            v = r.exp()
            return v if d >= 0 else -v
        if function in ("sinpi", "cospi"):
            # reduce exactly on the rational before going to decimal
            r = x % 2 if function == "sinpi" else (x + Fraction(1, 2)) % 2
            sign = 1
            if r >= 1:
                r, sign = r - 1, -1
            if r > Fraction(1, 2):
                r = 1 - r
            if r == 0:
                return Decimal(0)
            dr = Decimal(r.numerator) / Decimal(r.denominator)
            return sign * _sin(dr * _pi(ctx), ctx)
    raise KeyError(function)


def nearest(values, v: Decimal):
    """Index into ``values`` (sorted Fractions) of the nearest entry; ties to even index.

    The caller arranges for the even index to carry the even bit pattern.
    """
    best, best_d = None, None
    for k, f in enumerate(values):
        dd = abs(Decimal(f.numerator) / Decimal(f.denominator) - v)
        if best_d is None or dd < best_d or (dd == best_d and k % 2 == 0):
            best, best_d = k, dd
    return best


@lru_cache(maxsize=None)
def bfloat16_positive_table():
    """(bits, exact value) for every positive finite bfloat16, ascending."""
    out = []
    for b in range(0x0001, 0x7F80):
        e, m = b >> 7, b & 0x7F
        v = Fraction(m, 128) * Fraction(2) ** -126 if e == 0 else (1 + Fraction(m, 128)) * Fraction(2) ** (e - 127)
        out.append((b, v))
    return tuple(out)


def bfloat16_value(bits: int) -> Fraction:
    e, m = (bits >> 7) & 0xFF, bits & 0x7F
    sign = -1 if bits & 0x8000 else 1
    if e == 0:
        return sign * Fraction(m, 128) * Fraction(2) ** -126
    return sign * (1 + Fraction(m, 128)) * Fraction(2) ** (e - 127)


def round_bfloat16_positive(v: Decimal) -> int:
    """Nearest positive finite bfloat16 by bisection on the explicit table."""
    table = bfloat16_positive_table()
    lo, hi = 0, len(table) - 1

    def d(k):
        f = table[k][1]
        return Decimal(f.numerator) / Decimal(f.denominator)

    with decimal.localcontext(_ctx()):
        if v <= d(0):
            return table[0][0]
        if v >= d(hi):
            return table[hi][0]
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if d(mid) <= v:
                lo = mid
            else:
                hi = mid
        a, b = d(lo), d(hi)
        da, db = v - a, b - v
        if da < db or (da == db and table[lo][0] % 2 == 0):
            return table[lo][0]
        return table[hi][0]


def posit16_value(bits: int) -> Fraction:
    """Posit<16,1> decoded by walking the regime bits one at a time."""
    bits &= 0xFFFF
    if bits == 0:
        return Fraction(0)
    if bits == 0x8000:
        raise ValueError("NaR")
    negative = bool(bits & 0x8000)
    if negative:
        bits = (-bits) & 0xFFFF
    s = format(bits, "016b")[1:]
    first = s[0]
    run = len(s) - len(s.lstrip(first))
    k = run - 1 if first == "1" else -run
    rest = s[run + 1 :]
    e_str, f_str = rest[:1], rest[1:]
    e = int(e_str.ljust(1, "0"), 2) if e_str else 0
    frac = Fraction(int(f_str, 2), 1 << len(f_str)) if f_str else Fraction(0)
    v = (1 + frac) * Fraction(2) ** (2 * k + e)
    return -v if negative else v


@lru_cache(maxsize=None)
def posit16_positive_table():
    return tuple((b, posit16_value(b)) for b in range(1, 0x8000))


def round_posit16(v: Decimal) -> int:
    """Nearest posit16 by value (ties to the even pattern), saturating, never 0 or NaR for v != 0."""
    negative = v < 0
    v = abs(v)
    table = posit16_positive_table()
    with decimal.localcontext(_ctx()):
        def d(k):
            f = table[k][1]
            return Decimal(f.numerator) / Decimal(f.denominator)

        lo, hi = 0, len(table) - 1
        if v == 0:
            return 0
        if v <= d(0):
            b = table[0][0]
        elif v >= d(hi):
            b = table[hi][0]
        else:
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if d(mid) <= v:
                    lo = mid
                else:
                    hi = mid
            da, db = v - d(lo), d(hi) - v
            b = table[lo][0] if da < db or (da == db and table[lo][0] % 2 == 0) else table[hi][0]
    return (-b) & 0xFFFF if negative else b


def round_bfloat16(v: Decimal) -> int:
    """Signed nearest finite bfloat16 (no overflow handling; zero maps to +0)."""
    if v == 0:
        return 0
    b = round_bfloat16_positive(abs(v))
    return b | 0x8000 if v < 0 else b
