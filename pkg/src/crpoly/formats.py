"""Bit-exact models of small number formats.

Two families are supported: IEEE-style binary floating point parameterized by
total width and exponent width (FP5, bfloat16, binary32, ...) and posits
parameterized by total width and ``es``.  Every operation here is exact; values
are exchanged either as :class:`fractions.Fraction` or as binary64 floats when
the format guarantees they are representable.

The vectorized helpers (:func:`decode_array`, :func:`round_array`) work on
numpy arrays of bit patterns / binary64 values and agree bit-for-bit with the
scalar routines.  They are what the exhaustive validation uses.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Optional, Union

import numpy as np

__all__ = [
    "Special",
    "FormatDescriptor",
    "TValue",
    "FP5",
    "BFLOAT16",
    "BINARY32",
    "POSIT16",
    "FORMATS",
    "get_format",
    "decode",
    "decode_float",
    "round_to_format",
    "next_up",
    "next_down",
    "midpoint_h",
    "enumerate_values",
    "all_bits",
    "bits_in_range",
    "decode_array",
    "round_array",
    "same_result",
    "to_hex",
    "from_hex",
    "exact_decimal",
]


class Special(enum.Enum):
    """Non-finite results."""

    POS_INF = "+inf"
    NEG_INF = "-inf"
    NAN = "nan"
    NAR = "nar"


Real = Union[Fraction, int, float]


@dataclass(frozen=True)
class FormatDescriptor:
    """A target representation.

    ``kind`` is ``"ieee"`` or ``"posit"``.  For IEEE formats ``exponent_bits``
    is the exponent field width; for posits it is ``es``.
    """

    kind: str
    total_bits: int
    exponent_bits: int
    name: str = ""

    def __post_init__(self):
        n, e = self.total_bits, self.exponent_bits
        if self.kind == "ieee":
            if not 2 <= e <= n - 2:
                raise ValueError(f"ieee format needs 2 <= |E| <= n-2, got n={n}, |E|={e}")
        elif self.kind == "posit":
            if n < 3 or e < 0:
                raise ValueError(f"posit format needs n >= 3 and es >= 0, got n={n}, es={e}")
        else:
            raise ValueError(f"unknown format kind {self.kind!r}")
        if not self.name:
            label = f"ieee{n}e{e}" if self.kind == "ieee" else f"posit{n}es{e}"
            object.__setattr__(self, "name", label)

    def __str__(self):
        return self.name

    @property
    def is_posit(self) -> bool:
        return self.kind == "posit"

    @property
    def mask(self) -> int:
        return (1 << self.total_bits) - 1

    @property
    def sign_bit(self) -> int:
        return 1 << (self.total_bits - 1)

    # IEEE layout
    @property
    def fraction_bits(self) -> int:
        return self.total_bits - 1 - self.exponent_bits

    @property
    def precision(self) -> int:
        """Significand bits including the hidden bit (ieee), or the maximum for posits."""
        if self.kind == "ieee":
            return self.fraction_bits + 1
        return max(self.total_bits - 3 - self.exponent_bits, 0) + 1

    @property
    def bias(self) -> int:
        return (1 << (self.exponent_bits - 1)) - 1

    @property
    def emin(self) -> int:
        return 1 - self.bias

    @property
    def emax(self) -> int:
        return (1 << self.exponent_bits) - 2 - self.bias

    @property
    def max_scale(self) -> int:
        if self.kind == "ieee":
            return self.emax
        return (self.total_bits - 2) << self.exponent_bits

    @property
    def min_scale(self) -> int:
        if self.kind == "ieee":
            return self.emin - self.fraction_bits
        return -self.max_scale

    @property
    def max_finite(self) -> Fraction:
        if self.kind == "ieee":
            return Fraction((1 << self.precision) - 1) * Fraction(2) ** (self.emax - self.fraction_bits)
        return Fraction(2) ** self.max_scale

    @property
    def min_positive(self) -> Fraction:
        return Fraction(2) ** self.min_scale

    @property
    def overflow_threshold(self) -> Fraction:
        """Smallest magnitude that rounds to infinity (ieee only)."""
        if self.kind != "ieee":
            raise ValueError("posits saturate; there is no overflow threshold")
        return self.max_finite + Fraction(2) ** (self.emax - self.fraction_bits - 1)

    @property
    def nan_bits(self) -> int:
        """Canonical quiet NaN (ieee) or NaR (posit)."""
        if self.kind == "posit":
            return self.sign_bit
        exp_all = ((1 << self.exponent_bits) - 1) << self.fraction_bits
        return exp_all | (1 << (self.fraction_bits - 1))

    def inf_bits(self, negative: bool = False) -> int:
        if self.kind == "posit":
            return self.sign_bit
        bits = ((1 << self.exponent_bits) - 1) << self.fraction_bits
        return bits | self.sign_bit if negative else bits

    @property
    def binary64_exact(self) -> bool:
        """True when every value and every midpoint of adjacent values is a binary64."""
        if self.precision + 1 > 53:
            return False
        return self.max_scale < 1023 and self.min_scale - 1 >= -1074


FP5 = FormatDescriptor("ieee", 5, 2, "fp5")
BFLOAT16 = FormatDescriptor("ieee", 16, 8, "bfloat16")
BINARY32 = FormatDescriptor("ieee", 32, 8, "binary32")
POSIT16 = FormatDescriptor("posit", 16, 1, "posit16")

FORMATS = {f.name: f for f in (FP5, BFLOAT16, BINARY32, POSIT16)}
_ALIASES = {"float": "binary32", "float32": "binary32", "bf16": "bfloat16", "p16": "posit16"}


def get_format(name: str) -> FormatDescriptor:
    key = _ALIASES.get(name.lower(), name.lower())
    try:
        return FORMATS[key]
    except KeyError:
        raise KeyError(f"unknown format {name!r}; known: {', '.join(sorted(FORMATS))}") from None


@dataclass(frozen=True)
class TValue:
    """A bit pattern of a target format."""

    format: FormatDescriptor
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits <= self.format.mask:
            raise ValueError(f"bit pattern {self.bits:#x} does not fit {self.format}")

    @property
    def value(self) -> Union[Fraction, Special]:
        return decode(self.format, self.bits)

    def to_float(self) -> float:
        return decode_float(self.format, self.bits)

    @property
    def is_finite(self) -> bool:
        return not isinstance(self.value, Special)

    @property
    def is_nan(self) -> bool:
        return self.value in (Special.NAN, Special.NAR)

    @property
    def is_zero(self) -> bool:
        return self.value == 0

    def hex(self) -> str:
        return to_hex(self.format, self.bits)

    def __repr__(self):
        v = self.value
        shown = v.value if isinstance(v, Special) else repr(self.to_float())
        return f"TValue({self.format.name}, {self.hex()}, {shown})"


# ---------------------------------------------------------------------------
# scalar decode


def _ieee_fields(fmt: FormatDescriptor, bits: int):
    fb = fmt.fraction_bits
    sign = (bits >> (fmt.total_bits - 1)) & 1
    exp = (bits >> fb) & ((1 << fmt.exponent_bits) - 1)
    frac = bits & ((1 << fb) - 1)
    return sign, exp, frac


@lru_cache(maxsize=None)
def _posit_dyadic(n: int, es: int, bits: int):
    """Return (negative, significand, exponent) with value = ±sig * 2**exponent."""
    mask = (1 << n) - 1
    negative = bool(bits >> (n - 1))
    if negative:
        bits = (-bits) & mask
    width = n - 1
    rest = bits & ((1 << width) - 1)
    first = (rest >> (width - 1)) & 1
    run = 0
    i = width - 1
    while i >= 0 and ((rest >> i) & 1) == first:
        run += 1
        i -= 1
    regime = run - 1 if first else -run
    remaining = max(i, 0)  # bits after the regime terminator
    ebits = min(es, remaining)
    e = (rest >> (remaining - ebits)) & ((1 << ebits) - 1) if ebits else 0
    e <<= es - ebits
    fbits = remaining - ebits
    frac = rest & ((1 << fbits) - 1)
    scale = (regime << es) + e
    return negative, (1 << fbits) | frac, scale - fbits


def decode(fmt: FormatDescriptor, bits: int) -> Union[Fraction, Special]:
    """Exact value of a bit pattern; non-finite patterns map to :class:`Special`."""
    if not 0 <= bits <= fmt.mask:
        raise ValueError(f"bit pattern {bits:#x} does not fit {fmt}")
    if fmt.kind == "posit":
        if bits == 0:
            return Fraction(0)
        if bits == fmt.sign_bit:
            return Special.NAR
        neg, sig, exp = _posit_dyadic(fmt.total_bits, fmt.exponent_bits, bits)
        v = Fraction(sig) * Fraction(2) ** exp
        return -v if neg else v
    sign, exp, frac = _ieee_fields(fmt, bits)
    if exp == (1 << fmt.exponent_bits) - 1:
        if frac:
            return Special.NAN
        return Special.NEG_INF if sign else Special.POS_INF
    if exp == 0:
        v = Fraction(frac) * Fraction(2) ** (fmt.emin - fmt.fraction_bits)
    else:
        v = Fraction(frac | (1 << fmt.fraction_bits)) * Fraction(2) ** (exp - fmt.bias - fmt.fraction_bits)
    return -v if sign else v


def decode_float(fmt: FormatDescriptor, bits: int) -> float:
    """Value as binary64 (NaN for NaN/NaR, signed zero kept)."""
    v = decode(fmt, bits)
    if v is Special.POS_INF:
        return math.inf
    if v is Special.NEG_INF:
        return -math.inf
    if isinstance(v, Special):
        return math.nan
    if v == 0:
        negative_zero = fmt.kind == "ieee" and bits == fmt.sign_bit
        return -0.0 if negative_zero else 0.0
    f = float(v)
    if Fraction(f) != v:
        raise ValueError(f"{fmt} value at {bits:#x} is not a binary64")
    return f


# ---------------------------------------------------------------------------
# scalar rounding


def _as_fraction(x) -> Union[Fraction, Special, float]:
    """Exact rational for numbers; floats that are non-finite pass through."""
    if isinstance(x, Special):
        return x
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if math.isnan(x):
            return Special.NAN
        if math.isinf(x):
            return Special.POS_INF if x > 0 else Special.NEG_INF
        return Fraction(x)
    ratio = getattr(x, "as_integer_ratio", None)
    if ratio is None:
        raise TypeError(f"cannot round {type(x).__name__}")
    try:
        return Fraction(*ratio())
    except (OverflowError, ValueError):
        f = float(x)
        return _as_fraction(f)


def _round_ieee_magnitude(fmt: FormatDescriptor, v: Fraction) -> int:
    """RNE of a positive rational to an unsigned ieee pattern (may be +inf)."""
    p, q = v.numerator, v.denominator
    e = p.bit_length() - q.bit_length()
    if (p << max(-e, 0)) < (q << max(e, 0)):
        e -= 1
    e = max(e, fmt.emin)
    qexp = e - fmt.fraction_bits
    num = p << max(-qexp, 0)
    den = q << max(qexp, 0)
    quot, rem = divmod(num, den)
    twice = 2 * rem
    if twice > den or (twice == den and quot & 1):
        quot += 1
    if quot == 1 << fmt.precision:
        quot >>= 1
        e += 1
    if e > fmt.emax:
        return fmt.inf_bits()
    if quot < 1 << fmt.fraction_bits:
        return quot
    return ((e + fmt.bias) << fmt.fraction_bits) | (quot - (1 << fmt.fraction_bits))


def _posit_value_cmp(fmt: FormatDescriptor, bits: int, v: Fraction) -> int:
    """Sign of (value(bits) - v) for a positive pattern and positive v."""
    _, sig, exp = _posit_dyadic(fmt.total_bits, fmt.exponent_bits, bits)
    lhs = sig * v.denominator
    rhs = v.numerator
    if exp >= 0:
        lhs <<= exp
    else:
        rhs <<= -exp
    return (lhs > rhs) - (lhs < rhs)


def _round_posit_magnitude(fmt: FormatDescriptor, v: Fraction) -> int:
    """Nearest positive posit pattern to a positive rational; saturating."""
    top = fmt.sign_bit - 1  # maxpos
    lo, hi = 1, top
    if _posit_value_cmp(fmt, 1, v) >= 0:
        return 1
    if _posit_value_cmp(fmt, top, v) <= 0:
        return top
    # invariant: value(lo) < v < value(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        c = _posit_value_cmp(fmt, mid, v)
        if c == 0:
            return mid
        if c < 0:
            lo = mid
        else:
            hi = mid
    a = decode(fmt, lo)
    b = decode(fmt, hi)
    da, db = v - a, b - v
    if da < db:
        return lo
    if db < da:
        return hi
    return lo if lo % 2 == 0 else hi


def round_to_format(fmt: FormatDescriptor, x) -> TValue:
    """Round an exact real (or a :class:`Special`) to ``fmt`` with RNE.

    Ties go to the even bit pattern.  IEEE formats overflow to infinity past
    the overflow threshold; posits saturate at maxpos/minpos and never round a
    nonzero value to zero.  NaN, NaR and (for posits) infinities map to the
    canonical NaN/NaR pattern.
    """
    v = _as_fraction(x)
    negative_zero = isinstance(x, float) and x == 0 and math.copysign(1.0, x) < 0
    if isinstance(v, Special):
        if fmt.kind == "posit" or v in (Special.NAN, Special.NAR):
            return TValue(fmt, fmt.nan_bits)
        return TValue(fmt, fmt.inf_bits(negative=v is Special.NEG_INF))
    if v == 0:
        bits = fmt.sign_bit if (negative_zero and fmt.kind == "ieee") else 0
        return TValue(fmt, bits)
    neg = v < 0
    mag = -v if neg else v
    if fmt.kind == "ieee":
        bits = _round_ieee_magnitude(fmt, mag)
        return TValue(fmt, bits | fmt.sign_bit if neg else bits)
    bits = _round_posit_magnitude(fmt, mag)
    return TValue(fmt, (-bits) & fmt.mask if neg else bits)


# ---------------------------------------------------------------------------
# ordering


def _ordinal(fmt: FormatDescriptor, bits: int) -> int:
    if fmt.kind == "posit":
        return bits - (1 << fmt.total_bits) if bits & fmt.sign_bit else bits
    mag = bits & (fmt.sign_bit - 1)
    return -mag if bits & fmt.sign_bit else mag


def _from_ordinal(fmt: FormatDescriptor, k: int) -> Optional[int]:
    if fmt.kind == "posit":
        if not -(fmt.sign_bit - 1) <= k <= fmt.sign_bit - 1:
            return None
        return k & fmt.mask
    limit = fmt.inf_bits() - 1  # largest finite magnitude pattern
    if abs(k) > limit:
        return None
    return fmt.sign_bit | -k if k < 0 else k


def _require_finite(v: TValue):
    if not v.is_finite:
        raise ValueError(f"{v!r} is not finite")


def next_up(v: TValue) -> Optional[TValue]:
    """Adjacent larger finite value, or None at the top of the range."""
    _require_finite(v)
    bits = _from_ordinal(v.format, _ordinal(v.format, v.bits) + 1)
    return None if bits is None else TValue(v.format, bits)


def next_down(v: TValue) -> Optional[TValue]:
    """Adjacent smaller finite value, or None at the bottom of the range."""
    _require_finite(v)
    bits = _from_ordinal(v.format, _ordinal(v.format, v.bits) - 1)
    return None if bits is None else TValue(v.format, bits)


def midpoint_h(a: TValue, b: TValue) -> float:
    """Exact midpoint of two adjacent finite values as a binary64."""
    if a.format != b.format:
        raise ValueError("midpoint of values from different formats")
    fmt = a.format
    if not fmt.binary64_exact:
        raise ValueError(f"midpoints of {fmt} are not guaranteed to be binary64 values")
    _require_finite(a)
    _require_finite(b)
    if abs(_ordinal(fmt, a.bits) - _ordinal(fmt, b.bits)) != 1:
        raise ValueError(f"{a!r} and {b!r} are not adjacent")
    mid = (a.value + b.value) / 2
    out = float(mid)
    assert Fraction(out) == mid
    return out


# ---------------------------------------------------------------------------
# enumeration


def enumerate_values(
    fmt: FormatDescriptor, predicate: Optional[Callable[[TValue], bool]] = None
) -> Iterator[TValue]:
    """Yield every finite pattern once, in increasing bit order."""
    for bits in range(1 << fmt.total_bits):
        v = TValue(fmt, bits)
        if not v.is_finite:
            continue
        if predicate is None or predicate(v):
            yield v


def all_bits(fmt: FormatDescriptor) -> np.ndarray:
    """Every bit pattern of a format with at most 24 bits."""
    if fmt.total_bits > 24:
        raise ValueError(f"{fmt} has too many patterns to materialize")
    return np.arange(1 << fmt.total_bits, dtype=np.int64)


def bits_in_range(fmt: FormatDescriptor, lo: float, hi: float) -> np.ndarray:
    """Patterns of all values v with lo <= v < hi, for 0 < lo < hi."""
    if not 0 < lo < hi:
        raise ValueError("bits_in_range needs 0 < lo < hi")
    # positive patterns are monotone in value for both kinds
    top = fmt.inf_bits() - 1 if fmt.kind == "ieee" else fmt.sign_bit - 1
    first = min(round_to_format(fmt, lo).bits, top)
    if decode(fmt, first) < Fraction(lo):
        first += 1
    last = min(round_to_format(fmt, hi).bits, top)
    if decode(fmt, last) >= Fraction(hi):
        last -= 1
    return np.arange(first, last + 1, dtype=np.int64)


# ---------------------------------------------------------------------------
# vectorized helpers


@lru_cache(maxsize=8)
def _posit_tables(fmt: FormatDescriptor):
    """Sorted finite values, their patterns and the binary64 midpoints."""
    if fmt.total_bits > 20:
        raise ValueError(f"{fmt} is too wide for table-driven rounding")
    n = fmt.total_bits
    values = np.empty(1 << n, dtype=np.float64)
    for bits in range(1 << n):
        values[bits] = decode_float(fmt, bits)
    finite = np.nonzero(~np.isnan(values))[0]
    order = finite[np.argsort(values[finite], kind="stable")]
    sorted_vals = values[order]
    mids = (sorted_vals[1:] + sorted_vals[:-1]) / 2
    # midpoints must be exact for the table lookup to agree with exact rounding
    for a, b, m in zip(sorted_vals[:-1], sorted_vals[1:], mids):
        if Fraction(float(m)) * 2 != Fraction(float(a)) + Fraction(float(b)):
            raise ValueError(f"{fmt} midpoints are not binary64 values")
    values.setflags(write=False)
    return values, sorted_vals, order.astype(np.int64), mids


def decode_array(fmt: FormatDescriptor, bits) -> np.ndarray:
    """Vectorized :func:`decode_float`."""
    b = np.asarray(bits, dtype=np.int64)
    if fmt.kind == "posit":
        values = _posit_tables(fmt)[0]
        return values[b]
    fb = fmt.fraction_bits
    sign = (b >> (fmt.total_bits - 1)) & 1
    exp = (b >> fb) & ((1 << fmt.exponent_bits) - 1)
    frac = b & ((1 << fb) - 1)
    top = (1 << fmt.exponent_bits) - 1
    normal = np.ldexp((frac | (1 << fb)).astype(np.float64), (exp - fmt.bias - fb).astype(np.int32))
    sub = np.ldexp(frac.astype(np.float64), np.int32(fmt.emin - fb))
    mag = np.where(exp == 0, sub, normal)
    mag = np.where(exp == top, np.where(frac == 0, np.inf, np.nan), mag)
    return np.where(sign == 1, -mag, mag)


def round_array(fmt: FormatDescriptor, y) -> np.ndarray:
    """Vectorized :func:`round_to_format` for binary64 inputs; returns patterns."""
    y = np.asarray(y, dtype=np.float64)
    if fmt.kind == "posit":
        return _round_array_posit(fmt, y)
    return _round_array_ieee(fmt, y)


def _round_array_ieee(fmt: FormatDescriptor, y: np.ndarray) -> np.ndarray:
    if fmt.precision > 52:
        raise ValueError(f"{fmt} is wider than binary64")
    fb = fmt.fraction_bits
    finite = np.isfinite(y)
    ay = np.where(finite, np.abs(y), 0.0)
    _, ex = np.frexp(ay)
    e = np.maximum(ex.astype(np.int64) - 1, fmt.emin)
    qexp = e - fb
    quot = np.rint(np.ldexp(ay, (-qexp).astype(np.int32))).astype(np.int64)
    carry = quot == (1 << fmt.precision)
    quot = np.where(carry, quot >> 1, quot)
    e = np.where(carry, e + 1, e)
    normal = quot >= (1 << fb)
    out = np.where(normal, ((e + fmt.bias) << fb) | (quot - (1 << fb)), quot)
    out = np.where(normal & (e > fmt.emax), fmt.inf_bits(), out)
    out = np.where(np.isinf(y), fmt.inf_bits(), out)
    sign = np.signbit(y)
    out = np.where(sign, out | fmt.sign_bit, out)
    return np.where(np.isnan(y), fmt.nan_bits, out).astype(np.int64)


def _round_array_posit(fmt: FormatDescriptor, y: np.ndarray) -> np.ndarray:
    _, sorted_vals, order, mids = _posit_tables(fmt)
    idx = np.searchsorted(mids, y, side="left")
    idx = np.minimum(idx, len(sorted_vals) - 1)
    out = order[idx]
    mid_idx = np.minimum(idx, len(mids) - 1)
    tie = (idx < len(mids)) & (y == mids[mid_idx])
    if tie.any():
        lo_bits = order[idx[tie]]
        hi_bits = order[np.minimum(idx[tie] + 1, len(order) - 1)]
        out[tie] = np.where(lo_bits % 2 == 0, lo_bits, hi_bits)
    zero = (out == 0) & (y != 0)
    out = np.where(zero & (y > 0), 1, out)
    out = np.where(zero & (y < 0), fmt.mask, out)
    return np.where(np.isnan(y) | np.isinf(y), fmt.nan_bits, out).astype(np.int64)


def same_result(fmt: FormatDescriptor, a, b) -> np.ndarray:
    """Elementwise result equality: identical bits, any two NaNs, or ±0 vs ±0."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    eq = a == b
    if fmt.kind == "ieee":
        va, vb = decode_array(fmt, a), decode_array(fmt, b)
        eq |= np.isnan(va) & np.isnan(vb)
        eq |= (va == 0) & (vb == 0)
    return eq


# ---------------------------------------------------------------------------
# text forms


def to_hex(fmt: FormatDescriptor, bits: int) -> str:
    width = (fmt.total_bits + 3) // 4
    return f"0x{int(bits):0{width}X}"


def from_hex(fmt: FormatDescriptor, text: str) -> TValue:
    return TValue(fmt, int(text, 16))


def exact_decimal(x) -> str:
    """Exact decimal expansion of a binary64 or a dyadic rational."""
    if isinstance(x, float):
        if not math.isfinite(x):
            return repr(x)
        return _plain(Decimal(x))
    v = Fraction(x)
    den = v.denominator
    k = den.bit_length() - 1
    if den != 1 << k:
        raise ValueError(f"{v} is not dyadic")
    digits = abs(v.numerator) * 5**k
    sign = "-" if v < 0 else ""
    if k == 0:
        return f"{sign}{digits}"
    s = str(digits).rjust(k + 1, "0")
    return f"{sign}{s[:-k]}.{s[-k:]}".rstrip("0").rstrip(".")


def _plain(d: Decimal) -> str:
    s = format(d, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s if s not in ("", "-") else "0"
