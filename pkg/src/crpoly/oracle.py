"""Arbitrary-precision reference results.

Every elementary function is evaluated with MPFR (through gmpy2) at a large
working precision and then rounded exactly to the target format.  Bulk tables
over whole input sets are memoized because validation and generation both ask
for them repeatedly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union

import gmpy2
import numpy as np

from crpoly.formats import (
    FormatDescriptor,
    Special,
    TValue,
    decode,
    decode_array,
    round_array,
    round_to_format,
)

FUNCTIONS = ("ln", "log2", "log10", "exp", "exp2", "exp10", "sqrt", "cbrt", "sinpi", "cospi")

DEFAULT_PRECISION = 2000

_EXP_CLAMP = 1 << 16
_TINY = Fraction(1, 1 << (1 << 17))


class OracleDomainError(ValueError):
    """The input lies outside the mathematical domain of the function."""

    def __init__(self, function: str, x):
        super().__init__(f"{function} is undefined at {x}")
        self.function = function
        self.x = x


@dataclass(frozen=True)
class OracleConfig:
    function: str
    precision_bits: int = DEFAULT_PRECISION

    def __post_init__(self):
        if self.function not in FUNCTIONS:
            raise ValueError(f"unknown function {self.function!r}")
        if self.precision_bits < 128:
            raise ValueError("oracle precision must be at least 128 bits")


def _context(precision: int):
    return gmpy2.context(
        precision=precision,
        emax=gmpy2.get_emax_max(),
        emin=gmpy2.get_emin_min(),
        round=gmpy2.RoundToNearest,
    )


def _sinpi_reduced(r: Fraction):
    """sin(pi*r) for r in [0, 1/2], evaluated in the active context."""
    if r == 0:
        return Fraction(0)
    if r == Fraction(1, 2):
        return Fraction(1)
    if r == Fraction(1, 6):
        return Fraction(1, 2)
    arg = gmpy2.const_pi() * gmpy2.mpfr(gmpy2.mpq(r.numerator, r.denominator))
    return gmpy2.sin(arg)


def _sinpi_exact(x: Fraction):
    r = x - 2 * math.floor(x / 2)  # r in [0, 2)
    negate = r >= 1
    if negate:
        r -= 1
    if r > Fraction(1, 2):
        r = 1 - r
    v = _sinpi_reduced(r)
    return -v if negate else v


_MPFR_FUNCS = {
    "ln": gmpy2.log,
    "log2": gmpy2.log2,
    "log10": gmpy2.log10,
    "exp": gmpy2.exp,
    "exp2": gmpy2.exp2,
    "exp10": gmpy2.exp10,
    "sqrt": gmpy2.sqrt,
    "cbrt": gmpy2.cbrt,
}


def oracle_value(function: str, x: Fraction, precision: int = DEFAULT_PRECISION) -> Union[Fraction, Special]:
    """f(x) as an exact rational close to the real result.

    The returned rational is the MPFR value at ``precision`` bits (or the exact
    value where it is known in closed form).  Overflow past MPFR's exponent
    range, or past 2**65536, is reported as an infinity; results below
    2**-65536 in magnitude become a fixed tiny value of the same sign, which
    keeps a nonzero real result nonzero.
    """
    x = Fraction(x)
    if function in ("ln", "log2", "log10") and x <= 0:
        raise OracleDomainError(function, x)
    if function == "sqrt" and x < 0:
        raise OracleDomainError(function, x)
    with _context(precision):
        if function == "sinpi":
            v = _sinpi_exact(x)
        elif function == "cospi":
            v = _sinpi_exact(x + Fraction(1, 2))
        else:
            try:
                f = _MPFR_FUNCS[function]
            except KeyError:
                raise ValueError(f"unknown function {function!r}") from None
            arg = gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))
            v = f(arg)
        if isinstance(v, Fraction):
            return v
        if gmpy2.is_infinite(v):
            return Special.POS_INF if v > 0 else Special.NEG_INF
        if gmpy2.is_nan(v):
            raise OracleDomainError(function, x)
        if v == 0:
            if function in ("exp", "exp2", "exp10"):
                return _TINY
            return Fraction(0)
        # magnitudes far outside every supported format are clamped so the
        # exact conversion stays small; rounding is unaffected
        e = gmpy2.get_exp(v)
        if e > _EXP_CLAMP:
            return Special.POS_INF if v > 0 else Special.NEG_INF
        if e < -_EXP_CLAMP:
            return _TINY if v > 0 else -_TINY
        return Fraction(*v.as_integer_ratio())


def _round_result(out_format: FormatDescriptor, v: Union[Fraction, Special]) -> TValue:
    if isinstance(v, Special) and out_format.is_posit and v in (Special.POS_INF, Special.NEG_INF):
        # finite real too large for MPFR: saturate like any huge posit input
        big = out_format.max_finite * 4
        return round_to_format(out_format, big if v is Special.POS_INF else -big)
    return round_to_format(out_format, v)


def oracle_round(cfg: OracleConfig, x: TValue, out_format: FormatDescriptor) -> TValue:
    """Correctly rounded f(x) for a finite in-domain input."""
    v = x.value
    if isinstance(v, Special):
        raise OracleDomainError(cfg.function, v.value)
    return _round_result(out_format, oracle_value(cfg.function, v, cfg.precision_bits))


def oracle_stability_check(cfg: OracleConfig, x: TValue, out_format: FormatDescriptor) -> bool:
    """True when rounding at the configured precision and at a quarter of it agree."""
    low = OracleConfig(cfg.function, max(cfg.precision_bits // 4, 128))
    return oracle_round(cfg, x, out_format).bits == oracle_round(low, x, out_format).bits


# ---------------------------------------------------------------------------
# total reference including non-finite and out-of-domain inputs


def _special_reference(function: str, x: Union[Fraction, Special]):
    """Mathematical convention for inputs outside the finite domain, or None."""
    nan = Special.NAN
    if x in (Special.NAN, Special.NAR):
        return nan
    pos_inf, neg_inf = x is Special.POS_INF, x is Special.NEG_INF
    if function in ("ln", "log2", "log10"):
        if pos_inf:
            return Special.POS_INF
        if neg_inf or x < 0:
            return nan
        if x == 0:
            return Special.NEG_INF
        return None
    if function in ("exp", "exp2", "exp10"):
        if pos_inf:
            return Special.POS_INF
        if neg_inf:
            return Fraction(0)
        return None
    if function == "sqrt":
        if pos_inf:
            return Special.POS_INF
        if neg_inf or x < 0:
            return nan
        return None
    if function == "cbrt":
        if pos_inf or neg_inf:
            return x
        return None
    if pos_inf or neg_inf:  # sinpi, cospi
        return nan
    return None


def reference_round(cfg: OracleConfig, x: TValue, out_format: FormatDescriptor) -> TValue:
    """Correctly rounded result for any bit pattern, special inputs included."""
    v = x.value
    special = _special_reference(cfg.function, v)
    if special is not None:
        if out_format.is_posit and special in (Special.POS_INF, Special.NEG_INF):
            return TValue(out_format, out_format.nan_bits)
        return round_to_format(out_format, special)
    return oracle_round(cfg, x, out_format)


def _reference_bits_exact(
    function: str, in_format: FormatDescriptor, out_format: FormatDescriptor, bits: np.ndarray, precision: int
) -> np.ndarray:
    cfg = OracleConfig(function, precision)
    out = np.empty(len(bits), dtype=np.int64)
    for k, b in enumerate(bits.tolist()):
        out[k] = reference_round(cfg, TValue(in_format, b), out_format).bits
    return out


_NUMPY_ESTIMATES = {
    "ln": np.log,
    "log2": np.log2,
    "log10": np.log10,
    "exp": np.exp,
    "exp2": np.exp2,
    "exp10": lambda x: np.power(10.0, x),
    "sqrt": np.sqrt,
    "cbrt": np.cbrt,
}

# Relative distance from a rounding boundary below which the binary64
# estimate is not trusted and the input is recomputed with MPFR.
GUARD_BAND = 2.0**-40


def _reference_bits_filtered(
    function: str, in_format: FormatDescriptor, out_format: FormatDescriptor, bits: np.ndarray, precision: int
):
    """Fast path: binary64 estimate, MPFR only near rounding boundaries.

    Returns (result bits, number of escalated inputs).
    """
    x = decode_array(in_format, bits)
    with np.errstate(all="ignore"):
        est = _NUMPY_ESTIMATES[function](x)
    r = round_array(out_format, est)
    v = decode_array(out_format, r)
    lower = decode_array(out_format, np.maximum(r - 1, 0))
    upper = decode_array(out_format, np.minimum(r + 1, out_format.mask))
    mid_lo = (lower + v) / 2
    mid_hi = (v + upper) / 2
    scale = np.abs(est) * GUARD_BAND
    near = (np.abs(est - mid_lo) <= scale) | (np.abs(est - mid_hi) <= scale)
    # only positive, normal, non-extreme results are trusted
    tiny = float(out_format.min_positive) * 2.0 ** (out_format.precision + 1)
    trusted = np.isfinite(x) & np.isfinite(est) & (est > tiny) & (np.abs(est) < float(out_format.max_finite) / 2)
    trusted &= (r + 1 <= out_format.mask) & (r >= 1)
    escalate = ~trusted | near
    idx = np.nonzero(escalate)[0]
    if len(idx):
        r[idx] = _reference_bits_exact(function, in_format, out_format, bits[idx], precision)
    return r, len(idx)


def reference_bits(
    function: str,
    in_format: FormatDescriptor,
    out_format: FormatDescriptor,
    bits,
    precision: int = DEFAULT_PRECISION,
    fast: bool = False,
) -> np.ndarray:
    """Reference result patterns for an array of input patterns.

    With ``fast=True`` and an IEEE output format, a guarded binary64 estimate
    replaces MPFR for inputs comfortably away from rounding boundaries.
    """
    bits = np.asarray(bits, dtype=np.int64)
    if fast and function in _NUMPY_ESTIMATES and not out_format.is_posit and not in_format.is_posit:
        return _reference_bits_filtered(function, in_format, out_format, bits, precision)[0]
    return _reference_bits_exact(function, in_format, out_format, bits, precision)


@lru_cache(maxsize=64)
def _cached_table(function, in_format, out_format, lo, hi, precision, fast):
    from crpoly.formats import all_bits, bits_in_range

    bits = all_bits(in_format) if lo is None else bits_in_range(in_format, lo, hi)
    out = reference_bits(function, in_format, out_format, bits, precision, fast)
    out.setflags(write=False)
    bits.setflags(write=False)
    return bits, out


def reference_table(
    function: str,
    in_format: FormatDescriptor,
    out_format: FormatDescriptor = None,
    domain: tuple = None,
    precision: int = DEFAULT_PRECISION,
    fast: bool = None,
):
    """Memoized (input bits, reference bits) over a whole input set.

    ``domain`` restricts a wide format to a positive half-open range.  The fast
    filtered path is used by default only for formats wider than 16 bits.
    """
    out_format = out_format or in_format
    lo, hi = (None, None) if domain is None else (float(domain[0]), float(domain[1]))
    if fast is None:
        fast = in_format.total_bits > 16
    return _cached_table(function, in_format, out_format, lo, hi, precision, bool(fast))


def exact_value(x: TValue) -> Fraction:
    """Finite value of a pattern as a rational (helper for callers and tests)."""
    v = decode(x.format, x.bits)
    if isinstance(v, Special):
        raise ValueError(f"{x!r} is not finite")
    return v
