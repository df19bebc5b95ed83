"""Range reduction, output compensation and special-case tables.

A :class:`FunctionRecipe` bundles everything the shipped evaluator and the
generator need for one (function, format) pair:

* a special-case table mapping some inputs straight to their outputs,
* a range reduction ``x -> (x', ctx)`` into a small reduced domain,
* an output compensation ``(y', ctx) -> y`` and its algebraic inverse.

All arithmetic is binary64 and vectorized over numpy arrays; the scalar
methods are thin wrappers around the array versions so both paths are
bit-identical.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from crpoly.formats import (
    BFLOAT16,
    BINARY32,
    FP5,
    POSIT16,
    FormatDescriptor,
    TValue,
    decode_array,
    get_format,
    round_array,
)

# RNE binary64 values of the irrational constants, shared by generation and
# evaluation.
LOG2_E = float.fromhex("0x1.71547652b82fep+0")
LOG2_10 = float.fromhex("0x1.a934f0979a371p+1")


class Monotone(enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"


@dataclass(frozen=True)
class ReductionContext:
    """Per-input data carried from range reduction to output compensation.

    ``m`` is the binary exponent (logs, sqrt, cbrt), ``i`` the integer part
    (exponentials, sinpi/cospi), ``sign`` the input sign and ``branch`` whether
    the ``1 - t`` mirror was taken.
    """

    m: int = 0
    i: int = 0
    sign: int = 1
    branch: bool = False


@dataclass
class ContextArrays:
    """Struct-of-arrays form of :class:`ReductionContext`."""

    m: np.ndarray
    i: np.ndarray
    sign: np.ndarray
    branch: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "ContextArrays":
        z = np.zeros(n, dtype=np.int64)
        return cls(z, z.copy(), np.ones(n, dtype=np.int64), np.zeros(n, dtype=bool))

    @classmethod
    def of(cls, ctx: ReductionContext) -> "ContextArrays":
        return cls(
            np.array([ctx.m], dtype=np.int64),
            np.array([ctx.i], dtype=np.int64),
            np.array([ctx.sign], dtype=np.int64),
            np.array([ctx.branch], dtype=bool),
        )

    def __len__(self):
        return len(self.m)

    def take(self, idx) -> "ContextArrays":
        return ContextArrays(self.m[idx], self.i[idx], self.sign[idx], self.branch[idx])

    def at(self, k: int) -> ReductionContext:
        return ReductionContext(int(self.m[k]), int(self.i[k]), int(self.sign[k]), bool(self.branch[k]))


def _split(x: np.ndarray):
    """x = t * 2**k with t in [1, 2) for positive finite x."""
    f, e = np.frexp(x)
    return 2.0 * f, e.astype(np.int64) - 1


class RangeReduction:
    """One reduction/compensation family."""

    name = "abstract"
    reduced_domain = (0.0, 1.0, False)  # (lo, hi, hi inclusive)

    def reduce_array(self, x: np.ndarray):
        raise NotImplementedError

    def oc_array(self, y: np.ndarray, ctx: ContextArrays) -> np.ndarray:
        raise NotImplementedError

    def oc_inverse_array(self, y: np.ndarray, ctx: ContextArrays) -> np.ndarray:
        raise NotImplementedError

    def increasing_array(self, ctx: ContextArrays) -> np.ndarray:
        return np.ones(len(ctx), dtype=bool)

    def in_reduced_domain(self, xr: np.ndarray) -> np.ndarray:
        lo, hi, closed = self.reduced_domain
        return (xr >= lo) & ((xr <= hi) if closed else (xr < hi))


class LogReduction(RangeReduction):
    """x' = (t-1)/(t+1); OC = (y' + m) / log2(b).

    ``base`` is "e", "2" or "10".  With ``identity=True`` the compensation is
    just y' (valid only for inputs in [1, 2)).
    """

    reduced_domain = (0.0, 1.0 / 3.0, False)

    def __init__(self, base: str, identity: bool = False):
        self.base = base
        self.identity = identity
        self.scale = {"e": LOG2_E, "2": None, "10": LOG2_10}[base]
        self.name = "log-identity" if identity else f"log-cw-{base}"

    def reduce_array(self, x):
        t, m = _split(x)
        ctx = ContextArrays.empty(len(x))
        ctx.m = m
        return (t - 1.0) / (t + 1.0), ctx

    def oc_array(self, y, ctx):
        if self.identity:
            return y.copy()
        s = y + ctx.m.astype(np.float64)
        return s if self.scale is None else s / self.scale

    def oc_inverse_array(self, y, ctx):
        if self.identity:
            return y.copy()
        s = y if self.scale is None else y * self.scale
        return s - ctx.m.astype(np.float64)


class FractionLogReduction(RangeReduction):
    """x' = t in [1, 2); OC = (y' + m) / log2(b).  Small-format demonstration recipe."""

    reduced_domain = (1.0, 2.0, False)

    def __init__(self, base: str = "e"):
        self.base = base
        self.scale = {"e": LOG2_E, "2": None, "10": LOG2_10}[base]
        self.name = f"log-fraction-{base}"

    def reduce_array(self, x):
        t, m = _split(x)
        ctx = ContextArrays.empty(len(x))
        ctx.m = m
        return t, ctx

    def oc_array(self, y, ctx):
        s = y + ctx.m.astype(np.float64)
        return s if self.scale is None else s / self.scale

    def oc_inverse_array(self, y, ctx):
        s = y if self.scale is None else y * self.scale
        return s - ctx.m.astype(np.float64)


class ExpReduction(RangeReduction):
    """z = x*log2(a); i = floor(z); x' = z - i; OC = y' * 2**i."""

    reduced_domain = (0.0, 1.0, False)

    def __init__(self, base: str):
        self.base = base
        self.scale = {"e": LOG2_E, "2": None, "10": LOG2_10}[base]
        self.name = f"exp-{base}"

    def reduce_array(self, x):
        z = x if self.scale is None else x * self.scale
        fl = np.floor(z)
        ctx = ContextArrays.empty(len(x))
        ctx.i = fl.astype(np.int64)
        return z - fl, ctx

    def oc_array(self, y, ctx):
        return np.ldexp(y, _clip_exp(ctx.i))

    def oc_inverse_array(self, y, ctx):
        return np.ldexp(y, _clip_exp(-ctx.i))


def _clip_exp(e: np.ndarray) -> np.ndarray:
    return np.clip(e, -4000, 4000).astype(np.int32)


class SqrtReduction(RangeReduction):
    """x = x' * 2**m with x' in [1, 4) and m even; OC = y' * 2**(m/2)."""

    name = "sqrt"
    reduced_domain = (1.0, 4.0, False)

    def reduce_array(self, x):
        t, k = _split(x)
        odd = (k & 1) == 1
        ctx = ContextArrays.empty(len(x))
        ctx.m = np.where(odd, k - 1, k)
        return np.where(odd, 2.0 * t, t), ctx

    def oc_array(self, y, ctx):
        return np.ldexp(y, _clip_exp(ctx.m // 2))

    def oc_inverse_array(self, y, ctx):
        return np.ldexp(y, _clip_exp(-(ctx.m // 2)))


class CbrtReduction(RangeReduction):
    """x = s * x' * 2**m with x' in [1, 8) and 3 | m; OC = s * y' * 2**(m/3)."""

    name = "cbrt"
    reduced_domain = (1.0, 8.0, False)

    def reduce_array(self, x):
        t, k = _split(np.abs(x))
        r = np.mod(k, 3)
        ctx = ContextArrays.empty(len(x))
        ctx.m = k - r
        ctx.sign = np.where(np.signbit(x), -1, 1).astype(np.int64)
        return np.ldexp(t, r.astype(np.int32)), ctx

    def oc_array(self, y, ctx):
        v = np.ldexp(y, _clip_exp(ctx.m // 3))
        return np.where(ctx.sign < 0, -v, v)

    def oc_inverse_array(self, y, ctx):
        v = np.ldexp(y, _clip_exp(-(ctx.m // 3)))
        return np.where(ctx.sign < 0, -v, v)

    def increasing_array(self, ctx):
        return ctx.sign > 0


class TrigPiReduction(RangeReduction):
    """|x| = i + t; x' = 1 - t when 0.5 < t < 1 (exact), else t.

    sinpi: OC = ±s*y' by parity of i.  cospi: OC = ±y' by parity of i, negated
    when the mirror was taken.
    """

    reduced_domain = (0.0, 0.5, True)

    def __init__(self, kind: str):
        if kind not in ("sinpi", "cospi"):
            raise ValueError(kind)
        self.kind = kind
        self.name = kind

    def reduce_array(self, x):
        ax = np.abs(x)
        fl = np.floor(ax)
        t = ax - fl
        branch = (t > 0.5) & (t < 1.0)
        ctx = ContextArrays.empty(len(x))
        ctx.i = fl.astype(np.int64)
        ctx.sign = np.where(np.signbit(x), -1, 1).astype(np.int64)
        ctx.branch = branch
        return np.where(branch, 1.0 - t, t), ctx

    def _out_sign(self, ctx):
        parity = np.where(ctx.i % 2 == 0, 1, -1)
        if self.kind == "sinpi":
            return ctx.sign * parity
        return np.where(ctx.branch, -parity, parity)

    def oc_array(self, y, ctx):
        return np.where(self._out_sign(ctx) < 0, -y, y)

    def oc_inverse_array(self, y, ctx):
        return self.oc_array(y, ctx)

    def increasing_array(self, ctx):
        return self._out_sign(ctx) > 0


# ---------------------------------------------------------------------------
# special-case tables

Predicate = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SpecialRule:
    """Inputs matching ``when`` (on decoded binary64 values) produce ``value``."""

    when: Predicate
    value: float
    label: str


def _rules(*items) -> tuple:
    return tuple(SpecialRule(w, v, label) for label, w, v in items)


_nan = ("x = NaN", np.isnan, math.nan)


def _log_ieee_rules():
    return _rules(
        _nan,
        ("x = 0", lambda x: x == 0, -math.inf),
        ("x = inf", lambda x: x == math.inf, math.inf),
        ("x < 0", lambda x: x < 0, math.nan),
    )


def _log_posit_rules():
    return _rules(_nan, ("x <= 0", lambda x: x <= 0, math.nan))


def _exp_rules(zero_at, one_lo, one_hi, inf_at):
    return _rules(
        _nan,
        (f"x <= {zero_at!r}", lambda x: x <= zero_at, 0.0),
        (f"{one_lo!r} <= x <= {one_hi!r}", lambda x: (x >= one_lo) & (x <= one_hi), 1.0),
        (f"x >= {inf_at!r}", lambda x: x >= inf_at, math.inf),
    )


def _generic_rules(function: str, fmt: FormatDescriptor):
    """Mathematical conventions only, for pairs without a printed table."""
    if function in ("ln", "log2", "log10"):
        return _log_posit_rules() if fmt.is_posit else _log_ieee_rules()
    if function in ("exp", "exp2", "exp10"):
        return _rules(
            _nan,
            ("x = -inf", lambda x: x == -math.inf, 0.0),
            ("x = inf", lambda x: x == math.inf, math.inf),
        )
    if function == "sqrt":
        return _rules(
            _nan,
            ("x = 0", lambda x: x == 0, 0.0),
            ("x = inf", lambda x: x == math.inf, math.inf),
            ("x < 0", lambda x: x < 0, math.nan),
        )
    if function == "cbrt":
        return _rules(
            _nan,
            ("x = 0", lambda x: x == 0, 0.0),
            ("x = inf", lambda x: x == math.inf, math.inf),
            ("x = -inf", lambda x: x == -math.inf, -math.inf),
        )
    return _rules(_nan, ("x = ±inf", np.isinf, math.nan))


# ---------------------------------------------------------------------------
# recipes


@dataclass(frozen=True)
class FunctionRecipe:
    """Special cases plus reduction/compensation for one (function, format)."""

    recipe_id: str
    function: str
    format: FormatDescriptor
    reduction: RangeReduction
    specials: tuple = field(default=())
    input_domain: Optional[tuple] = None  # positive [lo, hi) restriction for wide formats

    @property
    def reduced_domain(self):
        return self.reduction.reduced_domain

    # -- special cases
    def classify_special_array(self, bits) -> tuple:
        """(mask of special inputs, their output patterns)."""
        bits = np.asarray(bits, dtype=np.int64)
        x = decode_array(self.format, bits)
        matched = np.zeros(len(x), dtype=bool)
        vals = np.zeros(len(x), dtype=np.float64)
        for rule in self.specials:
            with np.errstate(invalid="ignore"):
                hit = rule.when(x) & ~matched
            vals[hit] = rule.value
            matched |= hit
        out = round_array(self.format, vals)
        return matched, np.where(matched, out, 0)

    def classify_special(self, x: TValue) -> Optional[TValue]:
        mask, out = self.classify_special_array(np.array([x.bits]))
        return TValue(self.format, int(out[0])) if mask[0] else None

    # -- reduction and compensation
    def reduce_array(self, x):
        return self.reduction.reduce_array(np.asarray(x, dtype=np.float64))

    def reduce(self, x: float):
        xr, ctx = self.reduce_array(np.array([x], dtype=np.float64))
        return float(xr[0]), ctx.at(0)

    def compensate_array(self, y, ctx: ContextArrays):
        return self.reduction.oc_array(np.asarray(y, dtype=np.float64), ctx)

    def compensate(self, y: float, ctx: ReductionContext) -> float:
        return float(self.compensate_array(np.array([y]), ContextArrays.of(ctx))[0])

    def compensate_inverse_array(self, y, ctx: ContextArrays):
        return self.reduction.oc_inverse_array(np.asarray(y, dtype=np.float64), ctx)

    def compensate_inverse(self, y: float, ctx: ReductionContext) -> float:
        return float(self.compensate_inverse_array(np.array([y]), ContextArrays.of(ctx))[0])

    def increasing_array(self, ctx: ContextArrays) -> np.ndarray:
        return self.reduction.increasing_array(ctx)

    def oc_monotone(self, ctx: ReductionContext) -> Monotone:
        inc = self.reduction.increasing_array(ContextArrays.of(ctx))[0]
        return Monotone.INCREASING if inc else Monotone.DECREASING

    # -- inputs
    def input_bits(self) -> np.ndarray:
        """Every pattern this recipe is responsible for."""
        from crpoly.formats import all_bits, bits_in_range

        if self.input_domain is not None:
            return bits_in_range(self.format, *self.input_domain)
        return all_bits(self.format)

    def non_special_bits(self) -> np.ndarray:
        bits = self.input_bits()
        mask, _ = self.classify_special_array(bits)
        return bits[~mask]


def _family(function: str) -> RangeReduction:
    if function in ("ln", "log2", "log10"):
        return LogReduction({"ln": "e", "log2": "2", "log10": "10"}[function])
    if function in ("exp", "exp2", "exp10"):
        return ExpReduction({"exp": "e", "exp2": "2", "exp10": "10"}[function])
    if function == "sqrt":
        return SqrtReduction()
    if function == "cbrt":
        return CbrtReduction()
    if function in ("sinpi", "cospi"):
        return TrigPiReduction(function)
    raise KeyError(f"unknown function {function!r}")


def _printed_rules(function: str, fmt: FormatDescriptor):
    """Special-case tables for the shipped pairs, or None."""
    if fmt == BFLOAT16:
        if function in ("ln", "log2", "log10"):
            return _log_ieee_rules()
        if function == "exp":
            return _exp_rules(-93.0, -1.953125e-3, 3.890991e-3, 89.0)
        if function == "exp2":
            return _exp_rules(-134.0, -2.8076171875e-3, 2.8076171875e-3, 128.0)
        if function == "exp10":
            return _exp_rules(-40.5, -8.4686279296875e-4, 1.68609619140625e-3, 38.75)
        if function == "sinpi":
            return _rules(_nan, ("x = ±inf", np.isinf, math.nan), ("|x| >= 256", lambda x: np.abs(x) >= 256, 0.0))
        if function == "cospi":
            return _rules(_nan, ("x = ±inf", np.isinf, math.nan), ("|x| >= 256", lambda x: np.abs(x) >= 256, 1.0))
        if function in ("sqrt", "cbrt"):
            return _generic_rules(function, fmt)
    if fmt == POSIT16:
        if function in ("ln", "log2", "log10"):
            return _log_posit_rules()
        if function == "sqrt":
            return _rules(_nan, ("x = 0", lambda x: x == 0, 0.0), ("x < 0", lambda x: x < 0, math.nan))
        if function in ("sinpi", "cospi"):
            return _rules(_nan)
    return None


def recipe_variants(function: str, fmt: FormatDescriptor) -> Sequence[str]:
    if fmt == FP5 and function == "ln":
        return ("fraction", "cody-waite")
    if fmt == BINARY32 and function == "log2":
        return ("identity", "cody-waite")
    return ("cody-waite",) if function in ("ln", "log2", "log10") else ("default",)


def get_recipe(function: str, fmt, variant: Optional[str] = None) -> FunctionRecipe:
    """Recipe for a (function, format) pair.

    Shipped pairs use their printed special-case tables; other pairs fall
    back to the mathematical conventions (NaN, infinities, zeros, negatives).
    The FP5 ``ln`` default is the fractional-mantissa recipe; binary32
    ``log2`` defaults to the identity compensation restricted to [1, 2).
    """
    if isinstance(fmt, str):
        fmt = get_format(fmt)
    variants = recipe_variants(function, fmt)
    variant = variant or variants[0]
    if variant not in variants:
        raise KeyError(f"no {variant!r} recipe for {function} on {fmt}; choose from {', '.join(variants)}")
    reduction = _family(function)
    domain = None
    if variant == "fraction":
        reduction = FractionLogReduction({"ln": "e", "log2": "2", "log10": "10"}[function])
    elif variant == "identity":
        reduction = LogReduction("2", identity=True)
        domain = (1.0, 2.0)
    rules = _printed_rules(function, fmt)
    if rules is None:
        rules = _generic_rules(function, fmt)
    return FunctionRecipe(
        recipe_id=f"{fmt.name}/{function}/{reduction.name}",
        function=function,
        format=fmt,
        reduction=reduction,
        specials=rules,
        input_domain=domain,
    )
