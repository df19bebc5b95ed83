import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crpoly.formats import BFLOAT16, FP5, POSIT16, TValue, decode_array, round_array
from crpoly.intervals import (
    Infeasible,
    ReducedConstraints,
    ReducedSet,
    build_reduced_set,
    calc_reduced_intervals,
    calc_rounding_intervals,
    combine_reduced_intervals,
    dump_reduced_set,
    h_from_ordinal,
    h_ordinal,
    load_reduced_set,
    next_down_h,
    next_up_h,
    rounding_interval,
)
from crpoly.oracle import reference_table
from crpoly.reduction import get_recipe
from crpoly.tables import SHIPPED

SIXTEEN = [k for k in SHIPPED if k[0] != "binary32"]


def test_fp5_interval_of_one():
    assert rounding_interval(TValue(FP5, 0b00100)) == (0.875, 1.125)


def test_odd_output_excludes_its_midpoints():
    lo, hi = rounding_interval(TValue(BFLOAT16, 0x3E8B))
    assert lo == next_up_h(np.array([0.2705078125]))[0]
    assert (lo, hi) == (0.27050781250000006, 0.27246093749999994)


def test_infinity_and_posit_extremes():
    lo, hi = rounding_interval(TValue(BFLOAT16, 0x7F80))
    assert round_array(BFLOAT16, np.array([lo]))[0] == 0x7F80
    assert round_array(BFLOAT16, np.array([next_down_h(np.array([lo]))[0]]))[0] == 0x7F7F
    assert rounding_interval(TValue(POSIT16, 0x0000)) == (0.0, 0.0)
    assert rounding_interval(TValue(POSIT16, 0x7FFF))[1] == np.finfo(np.float64).max


def test_nan_outputs_are_rejected():
    with pytest.raises(ValueError):
        rounding_interval(TValue(BFLOAT16, 0x7FC0))


def _finite_non_nan(fmt):
    def ok(b):
        v = decode_array(fmt, np.array([b]))[0]
        return not np.isnan(v)

    return st.integers(0, fmt.mask).filter(ok)


@settings(max_examples=300, deadline=None)
@given(st.data())
@pytest.mark.parametrize("fmt", [BFLOAT16, POSIT16, FP5])
def test_interval_is_exactly_the_preimage(fmt, data):
    b = data.draw(_finite_non_nan(fmt))
    if fmt.kind == "ieee" and decode_array(fmt, np.array([b]))[0] == 0:
        return  # both zeros share one interval; covered by same_result
    lo, hi = rounding_interval(TValue(fmt, b))
    inside = np.array([lo, hi, (lo + hi) / 2])
    assert (round_array(fmt, inside) == b).all()
    outside = np.array([next_down_h(np.array([lo]))[0], next_up_h(np.array([hi]))[0]])
    outside = outside[np.isfinite(outside)]
    assert (round_array(fmt, outside) != b).all()


def test_ordinals_round_trip():
    v = np.array([-np.inf, -1.5, -0.0, 0.0, 5e-324, 1.0, np.finfo(float).max])
    o = h_ordinal(v)
    assert (np.diff(o) >= 0).all()
    assert np.array_equal(h_from_ordinal(o)[1:], v[1:])


def test_calc_rounding_intervals_uses_the_oracle():
    L = calc_rounding_intervals("log10", BFLOAT16, [TValue(BFLOAT16, 0x3FEF)])
    assert L.y_bits.tolist() == [0x3E8B]


@pytest.mark.parametrize("fmt,function", SIXTEEN)
def test_reduced_intervals_are_sound_and_minimally_shrunk(fmt, function):
    r = get_recipe(function, fmt)
    bits, ref = reference_table(function, r.format)
    special, _ = r.classify_special_array(bits)
    bits, ref = bits[~special][::7], ref[~special][::7]
    L = calc_rounding_intervals(function, r.format, bits, ref)
    Lp = calc_reduced_intervals(L, r)
    x = decode_array(r.format, bits)
    _, ctx = r.reduce_array(x)
    for end in (Lp.lo, Lp.hi):
        y = r.compensate_array(end, ctx)
        assert ((y >= L.lo) & (y <= L.hi)).all()
    # one step further out either leaves [l, h] or passes the algebraic candidate
    cand = np.minimum(r.compensate_inverse_array(L.lo, ctx), r.compensate_inverse_array(L.hi, ctx))
    below = next_down_h(Lp.lo)
    y = r.compensate_array(below, ctx)
    assert (((y < L.lo) | (y > L.hi)) | (below < cand)).all()


@pytest.mark.parametrize(
    "fmt,function,size",
    [("bfloat16", "ln", 128), ("bfloat16", "exp2", 1936), ("bfloat16", "sqrt", 256), ("bfloat16", "sinpi", 16129)],
)
def test_reduced_set_sizes(fmt, function, size):
    r = get_recipe(function, fmt)
    lam = build_reduced_set(r, r.non_special_bits())
    assert len(lam) == size
    assert int(lam.count.sum()) == len(r.non_special_bits())
    assert (lam.lo <= lam.hi).all()
    assert (np.diff(lam.x) > 0).all()


def test_combining_intersects_and_detects_conflicts():
    Lp = ReducedConstraints(np.array([0.5, 0.25, 0.5]), np.array([1.0, 0.0, 1.5]), np.array([2.0, 1.0, 3.0]), np.arange(3))
    lam = combine_reduced_intervals(Lp)
    assert lam.x.tolist() == [0.25, 0.5]
    assert lam.lo.tolist() == [0.0, 1.5] and lam.hi.tolist() == [1.0, 2.0]
    assert lam.count.tolist() == [1, 2]
    bad = ReducedConstraints(np.array([0.5, 0.5]), np.array([0.0, 2.0]), np.array([1.0, 3.0]), np.arange(2))
    with pytest.raises(Infeasible):
        combine_reduced_intervals(bad)


def test_tsv_round_trip(tmp_path):
    r = get_recipe("log2", BFLOAT16)
    lam = build_reduced_set(r, r.non_special_bits())
    path = tmp_path / "lam.tsv"
    dump_reduced_set(lam, path)
    back = load_reduced_set(path)
    for f in ("x", "lo", "hi"):
        assert np.array_equal(getattr(back, f), getattr(lam, f))
    buf = io.StringIO()
    dump_reduced_set(lam, buf)
    assert buf.getvalue() == path.read_text()
    assert buf.getvalue().splitlines()[0] == "# x_prime\tlo\thi"


def test_reduced_set_helpers():
    lam = ReducedSet(np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([1.0, 2.0]), np.array([1, 1]))
    both = ReducedSet.concat([lam, lam.copy()])
    assert len(both) == 4
    assert list(lam) == [(0.0, 0.0, 1.0), (1.0, 1.0, 2.0)]
