from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crpoly.lp import BOX, LPInfeasible, LPLimit, RationalLPProblem, check_solution, solve_lp

small = st.fractions(min_value=-4, max_value=4, max_denominator=8)


@st.composite
def instances(draw):
    terms = draw(st.sampled_from([(0, 1), (0, 2), (1, 2), (1, 3)]))
    n_rows = draw(st.integers(1, 5))
    rows = []
    for _ in range(n_rows):
        x = draw(small)
        a, b = draw(small), draw(small)
        rows.append((x, min(a, b), max(a, b)))
    return RationalLPProblem.build(terms, rows)


def _feasible_vertex(problem, bound=Fraction(64)):
    """Exact brute force: a 2-D polygon is nonempty iff one of its vertices is."""
    lines = []  # a0*c0 + a1*c1 = b
    for x, lo, hi in problem.rows:
        a = tuple(x**d for d in problem.terms)
        lines += [(a, lo), (a, hi)]
    lines += [((Fraction(1), Fraction(0)), s * bound) for s in (1, -1)]
    lines += [((Fraction(0), Fraction(1)), s * bound) for s in (1, -1)]
    for (a, b), (c, d) in combinations(lines, 2):
        det = a[0] * c[1] - a[1] * c[0]
        if det == 0:
            continue
        c0 = (b * c[1] - a[1] * d) / det
        c1 = (a[0] * d - b * c[0]) / det
        if abs(c0) <= bound and abs(c1) <= bound and check_solution(problem, (c0, c1)):
            return True
    return False


def _grid_point(problem):
    grid = [Fraction(k, 4) for k in range(-64, 65)]
    for c0 in grid:
        for c1 in grid:
            if check_solution(problem, (c0, c1)):
                return (c0, c1)
    return None


def test_constant_cannot_meet_disjoint_intervals():
    with pytest.raises(LPInfeasible):
        solve_lp(RationalLPProblem.build((0,), [(0, 1, 2), (1, 3, 4)]))


def test_linear_fit_through_two_intervals():
    res = solve_lp(RationalLPProblem.build((0, 1), [(0, 1, 2), (1, 3, 4)]))
    assert res.coefficients == (Fraction(3, 2), Fraction(2))
    assert res.margin == 1


def test_contradictory_rows_at_the_same_point():
    with pytest.raises(LPInfeasible):
        solve_lp(RationalLPProblem.build((0, 1), [(1, 0, 1), (1, 2, 3)]))


def test_degenerate_point_intervals():
    res = solve_lp(RationalLPProblem.build((0, 1), [(0, 1, 1), (2, 5, 5)]))
    assert res.coefficients == (Fraction(1), Fraction(2))
    assert 0 <= res.margin <= 1  # zero-width rows do not limit the scaled margin


def test_empty_problem_and_validation():
    assert solve_lp(RationalLPProblem.build((1,), [])).coefficients == (0,)
    with pytest.raises(ValueError):
        RationalLPProblem.build((1, 0), [])
    with pytest.raises(ValueError):
        RationalLPProblem.build((0,), [(0, 2, 1)])


def test_iteration_cap_is_reported_separately():
    rows = [(Fraction(k, 16), Fraction(k * k, 256), Fraction(k * k, 256) + Fraction(1, 10**6)) for k in range(16)]
    with pytest.raises(LPLimit):
        solve_lp(RationalLPProblem.build((0, 1, 2), rows), max_iterations=1)


def test_from_arrays_is_lossless():
    x = np.array([0.1, 0.2])
    p = RationalLPProblem.from_arrays((1,), x, x, x + 1)
    assert p.rows[0][0] == Fraction(0.1)


def test_warm_start_reuses_the_basis():
    rows = [(Fraction(k, 8), Fraction(k, 8) - Fraction(1, 100), Fraction(k, 8) + Fraction(1, 100)) for k in range(1, 9)]
    p = RationalLPProblem.build((0, 1, 3), rows)
    first = solve_lp(p)
    again = solve_lp(p, warm_basis=first.basis)
    assert again.iterations == 0
    assert again.coefficients == first.coefficients


@settings(max_examples=150, deadline=None)
@given(instances())
def test_agrees_with_brute_force(problem):
    grid = _grid_point(problem)
    exact = _feasible_vertex(problem)
    try:
        res = solve_lp(problem)
    except LPInfeasible:
        assert grid is None
        assert not exact
        return
    assert check_solution(problem, res.coefficients)
    assert all(abs(c) <= BOX for c in res.coefficients)
    assert exact
