from decimal import Decimal
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crpoly.formats import (
    BFLOAT16,
    BINARY32,
    FP5,
    POSIT16,
    Special,
    TValue,
    all_bits,
    bits_in_range,
    decode,
    decode_array,
    decode_float,
    enumerate_values,
    exact_decimal,
    from_hex,
    get_format,
    midpoint_h,
    next_down,
    next_up,
    round_array,
    round_to_format,
    same_result,
    to_hex,
)

from independent import bfloat16_value, posit16_value, round_bfloat16_positive, round_posit16


# -- descriptors ----------------------------------------------------------


def test_descriptor_fields():
    assert (BFLOAT16.total_bits, BFLOAT16.exponent_bits, BFLOAT16.fraction_bits) == (16, 8, 7)
    assert BINARY32.precision == 24
    assert POSIT16.exponent_bits == 1
    assert FP5.fraction_bits == 2


def test_format_lookup_and_aliases():
    assert get_format("bf16") is BFLOAT16
    assert get_format("float") is BINARY32
    with pytest.raises(KeyError):
        get_format("fp7")


def test_posit16_extremes():
    assert POSIT16.max_finite == 2**28
    assert POSIT16.min_positive == Fraction(1, 2**28)


# -- decoding ----------------------------------------------------------------


def test_fp5_positive_finite_values():
    vals = sorted(v.value for v in enumerate_values(FP5, lambda t: t.is_finite and t.value > 0))
    assert vals == [Fraction(k, 4) for k in (1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14)]


def test_posit_example_pattern():
    assert decode(POSIT16, 0b0000011011000000) == Fraction(11, 1024)


def test_specials():
    assert decode(BFLOAT16, 0x7F80) is Special.POS_INF
    assert decode(BFLOAT16, 0xFF80) is Special.NEG_INF
    assert decode(BFLOAT16, 0x7FC0) is Special.NAN
    assert decode(POSIT16, 0x8000) is Special.NAR
    assert decode(BFLOAT16, 0x8000) == 0


def test_bfloat16_decode_matches_independent_decoder():
    bits = np.arange(65536)
    x = decode_array(BFLOAT16, bits)
    finite = [b for b in range(65536) if (b >> 7) & 0xFF != 0xFF]
    assert all(Fraction(float(x[b])) == bfloat16_value(b) for b in finite)


def test_posit16_decode_matches_independent_decoder():
    x = decode_array(POSIT16, np.arange(65536))
    assert all(Fraction(float(x[b])) == posit16_value(b) for b in range(65536) if b != 0x8000)
    assert np.isnan(x[0x8000])


@pytest.mark.parametrize("fmt", [FP5, BFLOAT16, POSIT16])
def test_every_pattern_round_trips(fmt):
    bits = all_bits(fmt)
    x = decode_array(fmt, bits)
    back = round_array(fmt, x)
    finite = np.isfinite(x) & (x != 0)
    assert np.array_equal(back[finite], bits[finite])


def test_binary32_unit_interval_count():
    assert len(bits_in_range(BINARY32, 1.0, 2.0)) == 1 << 23


# -- rounding -----------------------------------------------------------------


def test_bfloat16_overflow_and_ties():
    assert round_to_format(BFLOAT16, Fraction(10**39)).bits == 0x7F80
    # 1 + 2^-8 lies halfway between 1 and 1 + 2^-7: ties to even
    assert round_to_format(BFLOAT16, 1 + Fraction(1, 256)).bits == 0x3F80
    assert round_to_format(BFLOAT16, 1 + Fraction(3, 256)).bits == 0x3F82


def test_posit_saturates():
    assert round_to_format(POSIT16, Fraction(10**30)).bits == 0x7FFF
    assert round_to_format(POSIT16, Fraction(1, 10**30)).bits == 0x0001
    assert round_to_format(POSIT16, Special.POS_INF).bits == 0x8000


@settings(max_examples=300, deadline=None)
@given(st.fractions(min_value=Fraction(1, 2**120), max_value=Fraction(2**120)))
def test_bfloat16_rounding_is_nearest(v):
    d = Decimal(v.numerator) / Decimal(v.denominator)
    assert round_to_format(BFLOAT16, v).bits == round_bfloat16_positive(d)


@settings(max_examples=300, deadline=None)
@given(st.fractions(min_value=Fraction(-(2**30)), max_value=Fraction(2**30)).filter(lambda v: v != 0))
def test_posit16_rounding_is_nearest(v):
    d = Decimal(v.numerator) / Decimal(v.denominator)
    assert round_to_format(POSIT16, v).bits == round_posit16(d)


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
@pytest.mark.parametrize("fmt", [BFLOAT16, POSIT16, BINARY32, FP5])
def test_vector_and_scalar_rounding_agree(fmt, x):
    assert int(round_array(fmt, np.array([x]))[0]) == round_to_format(fmt, x).bits


# -- neighbours and midpoints ------------------------------------------------


def test_neighbours():
    one = TValue(BFLOAT16, 0x3F80)
    assert next_up(one).bits == 0x3F81
    assert next_down(one).bits == 0x3F7F
    assert next_up(TValue(POSIT16, 0x7FFF)) is None


def test_midpoint_between_adjacent_values():
    a, b = TValue(BFLOAT16, 0x3E8A), TValue(BFLOAT16, 0x3E8B)
    assert midpoint_h(a, b) == 0.2705078125
    with pytest.raises(ValueError):
        midpoint_h(a, TValue(BFLOAT16, 0x3E8C))


# -- comparison and text -------------------------------------------------------


def test_same_result_treats_zeros_and_nans_as_equal():
    assert same_result(BFLOAT16, [0x0000, 0x7FC0, 0x3F80], [0x8000, 0xFFC1, 0x3F81]).tolist() == [True, True, False]


def test_hex_round_trip():
    assert to_hex(BFLOAT16, 0x3E8B) == "0x3E8B"
    assert from_hex(POSIT16, "0x06C0").bits == 0x06C0


@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_exact_decimal_is_lossless(x):
    assert float(exact_decimal(x)) == x
    assert Fraction(exact_decimal(x)) == Fraction(x)


def test_decode_float():
    assert decode_float(BFLOAT16, 0x3F75) == 0.95703125
