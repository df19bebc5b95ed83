"""Acceptance criteria 1-9, one test (or parametrized group) per criterion."""

import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from crpoly.formats import BFLOAT16, BINARY32, FP5, POSIT16, TValue, exact_decimal, round_to_format
from crpoly.intervals import Infeasible, ReducedSet, build_reduced_set, calc_rounding_intervals, rounding_interval
from crpoly.lp import LPInfeasible, check_solution, solve_lp
from crpoly.oracle import OracleConfig, oracle_round, oracle_stability_check, oracle_value, reference_table
from crpoly.polygen import GenerationLimit, PolynomialSpec, generate_with_sampling, refine_and_generate
from crpoly.reduction import get_recipe
from crpoly.rlibm import CompiledFunction, shipped, validate_exhaustive
from crpoly.tables import published_coefficients, table_strings

from test_lp import _feasible_vertex, _grid_point, instances
from test_polygen import independently_satisfies, near_exact_sets

BF16_FUNCTIONS = ["ln", "log2", "log10", "exp", "exp2", "exp10", "sqrt", "cbrt", "sinpi", "cospi"]
POSIT_FUNCTIONS = ["ln", "log2", "log10", "sqrt", "sinpi", "cospi"]


@pytest.mark.criterion(1, "bfloat16 exhaustive correctness for ten functions")
@pytest.mark.parametrize("function", BF16_FUNCTIONS)
def test_criterion_1_bfloat16(function):
    report = validate_exhaustive(shipped(function, BFLOAT16))
    assert report.total == 65536
    assert report.mismatches == [], report.text(BFLOAT16)[:2000]


@pytest.mark.criterion(2, "posit16 exhaustive correctness for six functions")
@pytest.mark.parametrize("function", POSIT_FUNCTIONS)
def test_criterion_2_posit16(function):
    report = validate_exhaustive(shipped(function, POSIT16))
    assert report.total == 65536
    assert report.mismatches == [], report.text(POSIT16)[:2000]


@pytest.mark.criterion(3, "binary32 log2 on [1,2), all 2^23 inputs")
def test_criterion_3_binary32_log2():
    report = validate_exhaustive(shipped("log2", BINARY32))
    assert report.total == 1 << 23
    assert report.mismatches == []


@pytest.mark.criterion(4, "FP5 walkthrough: interval of 1.0 and a feasible linear ln")
def test_criterion_4_fp5():
    t0 = time.perf_counter()
    assert rounding_interval(TValue(FP5, 0b00100)) == (0.875, 1.125)
    recipe = get_recipe("ln", FP5)
    bits = recipe.non_special_bits()
    assert len(bits) == 11
    L = calc_rounding_intervals("ln", FP5, bits)
    lam = build_reduced_set(recipe, bits, L.y_bits)
    cs = refine_and_generate(lam, PolynomialSpec.single((0, 1)))
    cf = CompiledFunction(recipe, cs)
    got = cf.evaluate_bits(bits)
    assert got.tolist() == L.y_bits.tolist()
    assert validate_exhaustive(cf).ok
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.criterion(5, "double rounding through binary32 is wrong; direct rounding is right")
def test_criterion_5_double_rounding():
    x = TValue(BFLOAT16, 0xBC95)
    assert x.to_float() == -0.0181884765625
    direct = oracle_round(OracleConfig("exp10"), x, BFLOAT16)
    assert direct.to_float() == 0.95703125
    via_binary32 = round_to_format(BFLOAT16, round_to_format(BINARY32, oracle_value("exp10", x.value)).value)
    assert via_binary32.to_float() == 0.9609375
    assert shipped("exp10", BFLOAT16)(x).bits == direct.bits


@pytest.mark.criterion(6, "bfloat16 ln: odd degree 5 infeasible, odd degree 7 feasible")
def test_criterion_6_degree_gap():
    recipe = get_recipe("ln", BFLOAT16)
    lam = build_reduced_set(recipe, recipe.non_special_bits())
    with pytest.raises(Infeasible):
        refine_and_generate(lam, PolynomialSpec.single((1, 3, 5)))
    cs = refine_and_generate(lam, PolynomialSpec.single((1, 3, 5, 7)))
    assert validate_exhaustive(CompiledFunction(recipe, cs)).ok


@pytest.mark.criterion(7, "sampling loop converges for binary32 log2 with < 50,000 constraints")
def test_criterion_7_sampling():
    recipe = get_recipe("log2", BINARY32)
    spec = published_coefficients("binary32", "log2").spec
    log = []
    cs = generate_with_sampling(recipe, spec, sample_size=5000, rng_seed=42, log=log.append)
    print("\n".join(log))
    assert cs.metadata["constraints"] < 50_000
    report = validate_exhaustive(CompiledFunction(recipe, cs))
    assert report.total == 1 << 23 and report.ok


@pytest.mark.criterion(8, "LP and refinement soundness properties")
@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(near_exact_sets())
def test_criterion_8_refined_sets_verify_and_shrink(case):
    terms, lam = case
    seen = []
    try:
        cs = refine_and_generate(lam, PolynomialSpec.single(terms), max_iterations=40, observer=lambda k, i, lo, hi: seen.append((lo, hi)))
    except (Infeasible, GenerationLimit):
        cs = None
    if cs is not None:
        assert independently_satisfies(cs, lam)
    for (lo0, hi0), (lo1, hi1) in zip(seen, seen[1:]):
        assert (lo1 >= lo0).all() and (hi1 <= hi0).all()


@pytest.mark.criterion(8, "LP and refinement soundness properties")
@settings(max_examples=100, deadline=None)
@given(instances())
def test_criterion_8_lp_matches_brute_force(problem):
    try:
        res = solve_lp(problem)
    except LPInfeasible:
        assert _grid_point(problem) is None and not _feasible_vertex(problem)
        return
    assert check_solution(problem, res.coefficients)
    assert _feasible_vertex(problem)


@pytest.mark.criterion(8, "LP and refinement soundness properties")
@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_criterion_8_exact_round_trips(x):
    assert Fraction(exact_decimal(x)) == Fraction(x)
    assert float(exact_decimal(x)) == x


@pytest.mark.criterion(8, "LP and refinement soundness properties")
def test_criterion_8_published_strings_round_trip():
    from crpoly.tables import SHIPPED

    for fmt, function in SHIPPED:
        for strings in table_strings(fmt, function):
            for s in strings:
                assert Fraction(exact_decimal(float(s))) == Fraction(s)


@pytest.mark.criterion(9, "oracle stable between 2000 and 500 bits on every 16-bit input")
@pytest.mark.parametrize("fmt,function", [("bfloat16", f) for f in BF16_FUNCTIONS] + [("posit16", f) for f in POSIT_FUNCTIONS])
def test_criterion_9_oracle_stability(fmt, function):
    recipe = get_recipe(function, fmt)
    bits, high = reference_table(function, recipe.format, precision=2000)
    _, low = reference_table(function, recipe.format, precision=500)
    unstable = bits[high != low]
    assert unstable.size == 0, [hex(b) for b in unstable[:10]]
    # the scalar check agrees on a spread of finite inputs
    cfg = OracleConfig(function)
    for b in bits[::4093]:
        x = TValue(recipe.format, int(b))
        if x.is_finite and recipe.classify_special(x) is None:
            assert oracle_stability_check(cfg, x, recipe.format)
