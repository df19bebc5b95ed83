"""Rounding intervals and their pull-back into the reduced domain.

The three lists of the generation pipeline are kept as struct-of-arrays:

* :class:`Constraints` (L): per input, the binary64 interval [l, h] of values
  that round to the correctly rounded result.
* :class:`ReducedConstraints` (L'): per input, the interval the polynomial
  must hit at the reduced input so that output compensation lands in [l, h].
* :class:`ReducedSet` (Lambda): L' merged by reduced input.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Optional, TextIO, Union

import numpy as np

from crpoly.formats import FormatDescriptor, TValue, decode_array
from crpoly.oracle import DEFAULT_PRECISION, reference_bits
from crpoly.reduction import FunctionRecipe

DBL_MAX = np.finfo(np.float64).max
DBL_TRUE_MIN = 5e-324

_SIGN64 = np.int64(-0x8000000000000000)
_MAG64 = np.int64(0x7FFFFFFFFFFFFFFF)


class Infeasible(Exception):
    """No polynomial can satisfy the constraints under this recipe.

    ``where`` holds the offending input patterns (or reduced inputs).
    """

    def __init__(self, message: str, where=None):
        super().__init__(message)
        self.where = [] if where is None else list(where)


# ---------------------------------------------------------------------------
# binary64 ordinals


def h_ordinal(v: np.ndarray) -> np.ndarray:
    """Order-preserving integer image of binary64 values (both zeros map to 0)."""
    b = np.asarray(v, dtype=np.float64).view(np.int64)
    return np.where(b < 0, -(b & _MAG64), b)


def h_from_ordinal(o: np.ndarray) -> np.ndarray:
    o = np.asarray(o, dtype=np.int64)
    b = np.where(o < 0, (-o) | _SIGN64, o)
    return b.view(np.float64)


def next_up_h(v):
    with np.errstate(over="ignore"):
        return np.nextafter(v, np.inf)


def next_down_h(v):
    with np.errstate(over="ignore"):
        return np.nextafter(v, -np.inf)


# ---------------------------------------------------------------------------
# L: rounding intervals


def _ieee_neighbors(fmt: FormatDescriptor, y_bits: np.ndarray):
    mag = y_bits & (fmt.sign_bit - 1)
    ordv = np.where(y_bits & fmt.sign_bit, -mag, mag)

    def to_bits(o):
        return np.where(o < 0, fmt.sign_bit | -o, o)

    virtual = 2.0 ** (fmt.emax + 1)
    prev = decode_array(fmt, to_bits(ordv - 1))
    nxt = decode_array(fmt, to_bits(ordv + 1))
    prev = np.where(np.isinf(prev), np.copysign(virtual, prev), prev)
    nxt = np.where(np.isinf(nxt), np.copysign(virtual, nxt), nxt)
    return prev, nxt


def rounding_intervals_array(fmt: FormatDescriptor, y_bits) -> tuple:
    """Binary64 [l, h] for each output pattern.

    Endpoints are midpoints with the neighboring values; when the output
    pattern is odd the ties belong to the neighbors, so the bounds move one
    binary64 ulp inward.
    """
    y_bits = np.asarray(y_bits, dtype=np.int64)
    y = decode_array(fmt, y_bits)
    if np.isnan(y).any():
        raise ValueError("NaN/NaR outputs have no rounding interval; route them through special cases")
    odd = (y_bits & 1) == 1
    if fmt.is_posit:
        prev = decode_array(fmt, (y_bits - 1) & fmt.mask)
        nxt = decode_array(fmt, (y_bits + 1) & fmt.mask)
    else:
        prev, nxt = _ieee_neighbors(fmt, y_bits)
    finite = np.isfinite(y)
    with np.errstate(invalid="ignore"):
        lo = np.where(finite, (prev + y) / 2, 0.0)
        hi = np.where(finite, (y + nxt) / 2, 0.0)
    lo = np.where(odd, next_up_h(lo), lo)
    hi = np.where(odd, next_down_h(hi), hi)
    if fmt.is_posit:
        maxpos, minpos = fmt.sign_bit - 1, 1
        lo = np.where(y_bits == minpos, DBL_TRUE_MIN, lo)
        hi = np.where(y_bits == fmt.mask, -DBL_TRUE_MIN, hi)  # -minpos
        hi = np.where(y_bits == maxpos, DBL_MAX, hi)
        lo = np.where(y_bits == fmt.sign_bit + 1, -DBL_MAX, lo)  # -maxpos
        zero = y_bits == 0
        lo = np.where(zero, 0.0, lo)
        hi = np.where(zero, 0.0, hi)
    else:
        threshold = float(fmt.overflow_threshold)
        lo = np.where(y == np.inf, threshold, lo)
        hi = np.where(y == np.inf, DBL_MAX, hi)
        lo = np.where(y == -np.inf, -DBL_MAX, lo)
        hi = np.where(y == -np.inf, -threshold, hi)
    return lo, hi


def rounding_interval(y: TValue) -> tuple:
    lo, hi = rounding_intervals_array(y.format, np.array([y.bits]))
    return float(lo[0]), float(hi[0])


@dataclass(frozen=True)
class Constraint:
    x: TValue
    y: TValue
    l: float
    h: float


@dataclass
class Constraints:
    """List L: inputs, their correctly rounded outputs and rounding intervals."""

    format: FormatDescriptor
    bits: np.ndarray
    y_bits: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __len__(self):
        return len(self.bits)

    def __getitem__(self, k: int) -> Constraint:
        f = self.format
        return Constraint(TValue(f, int(self.bits[k])), TValue(f, int(self.y_bits[k])), float(self.lo[k]), float(self.hi[k]))

    def take(self, idx) -> "Constraints":
        return Constraints(self.format, self.bits[idx], self.y_bits[idx], self.lo[idx], self.hi[idx])


def calc_rounding_intervals(
    function: str,
    fmt: FormatDescriptor,
    inputs,
    outputs=None,
    precision: int = DEFAULT_PRECISION,
) -> Constraints:
    """Build L for the given non-special inputs.

    ``inputs`` may be an array of bit patterns or an iterable of TValues;
    ``outputs`` optionally supplies already computed reference patterns.
    """
    if not isinstance(inputs, np.ndarray):
        inputs = np.array([v.bits if isinstance(v, TValue) else int(v) for v in inputs], dtype=np.int64)
    bits = inputs.astype(np.int64)
    if outputs is None:
        outputs = reference_bits(function, fmt, fmt, bits, precision)
    y_bits = np.asarray(outputs, dtype=np.int64)
    lo, hi = rounding_intervals_array(fmt, y_bits)
    return Constraints(fmt, bits, y_bits, lo, hi)


# ---------------------------------------------------------------------------
# L': reduced intervals


@dataclass
class ReducedConstraints:
    """List L': reduced input, interval for P(x'), and the originating input."""

    x: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    src_bits: np.ndarray

    def __len__(self):
        return len(self.x)

    def take(self, idx) -> "ReducedConstraints":
        return ReducedConstraints(self.x[idx], self.lo[idx], self.hi[idx], self.src_bits[idx])


def _first_at_least(key, start: np.ndarray, stop: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Smallest ordinal o in [start, stop] with key(o) >= target, else stop + 1.

    ``key`` is nondecreasing in the ordinal.  Gallops from ``start`` and then
    bisects, so the cost is logarithmic in the distance moved.
    """
    n = len(start)
    result = start.copy()
    ok0 = key(start, np.arange(n)) >= target
    pending = np.nonzero(~ok0)[0]
    if len(pending) == 0:
        return result
    lo = start[pending].copy()  # known bad
    limit = stop[pending] + 1  # virtual good
    step = np.ones(len(pending), dtype=np.int64)
    hi = limit.copy()
    active = np.ones(len(pending), dtype=bool)
    while active.any():
        a = np.nonzero(active)[0]
        probe = np.minimum(lo[a] + step[a], limit[a])
        at_limit = probe >= limit[a]
        good = np.zeros(len(a), dtype=bool)
        inner = ~at_limit
        if inner.any():
            good[inner] = key(probe[inner], pending[a[inner]]) >= target[pending[a[inner]]]
        hi[a] = np.where(good | at_limit, probe, hi[a])
        lo[a] = np.where(good | at_limit, lo[a], probe)
        step[a] *= 2
        active[a] = ~(good | at_limit)
    while True:
        gap = hi - lo > 1
        if not gap.any():
            break
        g = np.nonzero(gap)[0]
        mid = lo[g] + (hi[g] - lo[g]) // 2
        inner = mid < limit[g]
        good = np.ones(len(g), dtype=bool)
        if inner.any():
            good[inner] = key(mid[inner], pending[g[inner]]) >= target[pending[g[inner]]]
        hi[g] = np.where(good, mid, hi[g])
        lo[g] = np.where(good, lo[g], mid)
    result[pending] = hi
    return result


def calc_reduced_intervals(L: Constraints, recipe: FunctionRecipe, raise_on_infeasible: bool = True):
    """Pull each rounding interval back through the inverse compensation.

    Candidate endpoints come from the algebraic inverse; they are then moved
    inward, one binary64 value at a time in effect, until compensation maps
    both endpoints into [l, h].  Returns L' (and, when not raising, the mask
    of inputs that admitted no reduced interval).
    """
    x = decode_array(L.format, L.bits)
    xr, ctx = recipe.reduce_array(x)
    a = recipe.compensate_inverse_array(L.lo, ctx)
    b = recipe.compensate_inverse_array(L.hi, ctx)
    inc = recipe.increasing_array(ctx)
    alpha = np.minimum(a, b)  # swapped when the compensation is decreasing
    beta = np.maximum(a, b)
    # key(v) = oc(v) for increasing OC and -oc(v) otherwise; key is monotone in v
    klo = np.where(inc, L.lo, -L.hi)
    khi = np.where(inc, L.hi, -L.lo)
    sign = np.where(inc, 1.0, -1.0)

    def key(o, idx):
        v = h_from_ordinal(o)
        return sign[idx] * recipe.compensate_array(v, ctx.take(idx))

    oa = h_ordinal(alpha)
    ob = h_ordinal(beta)
    oa = _first_at_least(key, oa, ob, klo)
    # largest o <= ob with key(o) <= khi, via the mirrored search on -o
    def mirrored(o, idx):
        return -key(-o, idx)

    ob = -_first_at_least(mirrored, -ob, -oa, -khi)
    bad = oa > ob
    new_alpha = h_from_ordinal(np.where(bad, h_ordinal(alpha), oa))
    new_beta = h_from_ordinal(np.where(bad, h_ordinal(beta), ob))
    if not bad.any():
        keys_a = sign * recipe.compensate_array(new_alpha, ctx)
        keys_b = sign * recipe.compensate_array(new_beta, ctx)
        bad = ~((keys_a >= klo) & (keys_a <= khi) & (keys_b >= klo) & (keys_b <= khi))
    if bad.any() and raise_on_infeasible:
        where = [int(v) for v in L.bits[bad]]
        raise Infeasible(f"{len(where)} input(s) admit no reduced interval", where)
    out = ReducedConstraints(xr, new_alpha, new_beta, L.bits.copy())
    if raise_on_infeasible:
        return out
    keep = ~bad
    return out.take(keep), bad


# ---------------------------------------------------------------------------
# Lambda: merged by reduced input


@dataclass
class ReducedSet:
    """List Lambda: distinct reduced inputs (sorted) with intersected intervals."""

    x: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    count: np.ndarray

    def __len__(self):
        return len(self.x)

    def take(self, idx) -> "ReducedSet":
        return ReducedSet(self.x[idx], self.lo[idx], self.hi[idx], self.count[idx])

    def copy(self) -> "ReducedSet":
        return ReducedSet(self.x.copy(), self.lo.copy(), self.hi.copy(), self.count.copy())

    def __iter__(self):
        for k in range(len(self.x)):
            yield float(self.x[k]), float(self.lo[k]), float(self.hi[k])

    @classmethod
    def concat(cls, parts) -> "ReducedSet":
        parts = list(parts)
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("x", "lo", "hi", "count")))


def combine_reduced_intervals(Lp: Union[ReducedConstraints, ReducedSet]) -> ReducedSet:
    """Group by exact binary64 pattern of x' and intersect the intervals."""
    xb = np.asarray(Lp.x, dtype=np.float64).view(np.int64)
    order = np.lexsort((xb, Lp.x))
    xb_s = xb[order]
    starts = np.concatenate(([0], np.nonzero(np.diff(xb_s))[0] + 1)) if len(xb_s) else np.array([], dtype=np.int64)
    if len(starts) == 0:
        empty = np.array([], dtype=np.float64)
        return ReducedSet(empty, empty.copy(), empty.copy(), np.array([], dtype=np.int64))
    lo = np.maximum.reduceat(Lp.lo[order], starts)
    hi = np.minimum.reduceat(Lp.hi[order], starts)
    counts_in = getattr(Lp, "count", None)
    weights = np.ones(len(order), dtype=np.int64) if counts_in is None else counts_in[order]
    count = np.add.reduceat(weights, starts)
    x = Lp.x[order][starts]
    empty = lo > hi
    if empty.any():
        where = [float(v) for v in x[empty]]
        raise Infeasible(f"{len(where)} reduced input(s) have an empty intersection", where)
    return ReducedSet(x, lo, hi, count)


def build_reduced_set(recipe: FunctionRecipe, bits, outputs=None, precision: int = DEFAULT_PRECISION) -> ReducedSet:
    """L -> L' -> Lambda for the non-special inputs among ``bits``."""
    bits = np.asarray(bits, dtype=np.int64)
    special, _ = recipe.classify_special_array(bits)
    if outputs is not None:
        outputs = np.asarray(outputs, dtype=np.int64)[~special]
    bits = bits[~special]
    L = calc_rounding_intervals(recipe.function, recipe.format, bits, outputs, precision)
    return combine_reduced_intervals(calc_reduced_intervals(L, recipe))


# ---------------------------------------------------------------------------
# text dump


def _hex64(v: float) -> str:
    return f"0x{int(np.float64(v).view(np.uint64)):016X}"


def dump_reduced_set(lam: ReducedSet, dest: Union[str, os.PathLike, TextIO]) -> None:
    """Tab-separated records: x' bits, l' bits, h' bits (binary64 hex)."""
    lines = ["# x_prime\tlo\thi"]
    lines += [f"{_hex64(x)}\t{_hex64(l)}\t{_hex64(h)}" for x, l, h in lam]
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="ascii", newline="\n") as f:
            f.write(text)
    else:
        dest.write(text)


def load_reduced_set(src: Union[str, os.PathLike, TextIO]) -> ReducedSet:
    text = open(src, encoding="ascii").read() if isinstance(src, (str, os.PathLike)) else src.read()
    rows = [ln.split("\t") for ln in text.splitlines() if ln and not ln.startswith("#")]
    arr = np.array([[int(c, 16) for c in r] for r in rows], dtype=np.uint64).reshape(-1, 3)
    vals = arr.view(np.float64)
    return ReducedSet(vals[:, 0].copy(), vals[:, 1].copy(), vals[:, 2].copy(), np.ones(len(vals), dtype=np.int64))
