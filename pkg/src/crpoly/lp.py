"""Exact rational linear programming for polynomial coefficient synthesis.

The feasibility system  lo_i <= sum_j c_j x_i**d_j <= hi_i  is embedded in a
max-margin program with a normalized slack s:

    maximize  s
    subject to   a_i.c + w_i s <= hi_i
                -a_i.c + w_i s <= -lo_i          (w_i = (hi_i - lo_i) / 2)
                 s <= 1,  |c_j| <= BOX

The original system is feasible iff the optimum s* is >= 0.  The program is
solved through its dual (min b.y, M y = e_s, y >= 0) with a revised primal
simplex whose basis matrix is only (n+1) x (n+1): pivots, ratio tests and the
basis inverse are exact ``Fraction`` arithmetic, while candidate selection is
priced in binary64 and then confirmed exactly.  Every dual-feasible basis is a
weak-duality bound, so a negative dual objective without box columns is a
definitive infeasibility certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

BOX = Fraction(2) ** 64


class LPInfeasible(Exception):
    """The constraint system has no solution."""


class LPLimit(Exception):
    """The solver stopped on a resource limit (iterations or coefficient box)."""


@dataclass(frozen=True)
class RationalLPProblem:
    """Rows (x, lo, hi) in exact rationals and the monomial degrees."""

    terms: tuple
    rows: tuple

    def __post_init__(self):
        if not self.terms:
            raise ValueError("at least one term is required")
        if list(self.terms) != sorted(set(self.terms)) or self.terms[0] < 0:
            raise ValueError("terms must be distinct, sorted, nonnegative integers")
        for x, lo, hi in self.rows:
            if lo > hi:
                raise ValueError(f"row at x={x} has lo > hi")

    @classmethod
    def build(cls, terms: Sequence[int], rows) -> "RationalLPProblem":
        return cls(tuple(int(t) for t in terms), tuple((Fraction(x), Fraction(lo), Fraction(hi)) for x, lo, hi in rows))

    @classmethod
    def from_arrays(cls, terms, x, lo, hi) -> "RationalLPProblem":
        """Exact conversion from binary64 arrays (lossless)."""
        rows = tuple(
            (Fraction(float(a)), Fraction(float(b)), Fraction(float(c))) for a, b, c in zip(np.asarray(x), np.asarray(lo), np.asarray(hi))
        )
        return cls(tuple(int(t) for t in terms), rows)


@dataclass
class LPResult:
    coefficients: tuple  # Fractions aligned with terms
    margin: Fraction
    iterations: int
    basis: tuple = field(repr=False, default=())


def _common(values: Sequence[Fraction]):
    """(integer numerators, common positive denominator)."""
    den = 1
    for v in values:
        den = den * v.denominator // math.gcd(den, v.denominator)
    return [v.numerator * (den // v.denominator) for v in values], den


class _RowData:
    """Exact and binary64 views of the constraint rows."""

    def __init__(self, problem: RationalLPProblem):
        self.terms = problem.terms
        n = len(self.terms)
        self.m = m = len(problem.rows)
        self.x = [r[0] for r in problem.rows]
        self.lo = [r[1] for r in problem.rows]
        self.hi = [r[2] for r in problem.rows]
        self.w = [(h - l) / 2 for l, h in zip(self.lo, self.hi)]
        self.xf = np.array([float(v) for v in self.x], dtype=np.float64)
        self.lof = np.array([float(v) for v in self.lo], dtype=np.float64)
        self.hif = np.array([float(v) for v in self.hi], dtype=np.float64)
        self.wf = np.array([float(v) for v in self.w], dtype=np.float64)
        with np.errstate(over="ignore"):
            self.Af = np.stack([self.xf ** d for d in self.terms], axis=1) if m else np.zeros((0, n))
        self.row_norm = np.sqrt((self.Af ** 2).sum(axis=1) + self.wf ** 2)
        self.row_norm = np.where(self.row_norm > 0, self.row_norm, 1.0)
        # integer forms for exact bulk checks
        self.X = [v.numerator for v in self.x]
        self.Q = [v.denominator for v in self.x]
        self.F = [l.denominator * h.denominator // math.gcd(l.denominator, h.denominator) for l, h in zip(self.lo, self.hi)]
        self.L = [l.numerator * (f // l.denominator) for l, f in zip(self.lo, self.F)]
        self.H = [h.numerator * (f // h.denominator) for h, f in zip(self.hi, self.F)]


class _Simplex:
    def __init__(self, problem: RationalLPProblem, max_iterations: int):
        self.p = problem
        self.rows = _RowData(problem)
        self.n = len(problem.terms)
        self.k_cap = 2 * self.n
        self.k_rows = 2 * self.n + 1
        self.K = self.k_rows + 2 * self.rows.m
        self.max_iterations = max_iterations
        self.iterations = 0

    # -- columns: r_k (length n+1) and cost b_k
    def column(self, k: int):
        n = self.n
        r = [Fraction(0)] * (n + 1)
        if k < n:
            r[k] = Fraction(1)
            return r, BOX
        if k < 2 * n:
            r[k - n] = Fraction(-1)
            return r, BOX
        if k == self.k_cap:
            r[n] = Fraction(1)
            return r, Fraction(1)
        i, upper = self._row_of(k)
        x = self.rows.x[i]
        sgn = 1 if upper else -1
        for j, d in enumerate(self.p.terms):
            r[j] = sgn * x**d
        r[n] = self.rows.w[i]
        return r, (self.rows.hi[i] if upper else -self.rows.lo[i])

    def _row_of(self, k: int):
        i = k - self.k_rows
        m = self.rows.m
        return (i, True) if i < m else (i - m, False)

    def key_of(self, k: int):
        if k <= self.k_cap:
            return ("fixed", k)
        i, upper = self._row_of(k)
        return ("up" if upper else "lo", self.rows.x[i])

    def is_box(self, k: int) -> bool:
        return k < 2 * self.n

    # -- basis handling
    def cold_start(self):
        n = self.n
        self.basis = list(range(n)) + [self.k_cap]
        self.Binv = [[Fraction(int(i == j)) for j in range(n + 1)] for i in range(n + 1)]
        self.y = [Fraction(0)] * n + [Fraction(1)]

    def warm_start(self, keys) -> bool:
        lookup = {}
        for i, x in enumerate(self.rows.x):
            lookup[("up", x)] = self.k_rows + i
            lookup[("lo", x)] = self.k_rows + self.rows.m + i
        basis = []
        for key in keys:
            if key[0] == "fixed":
                basis.append(key[1])
            elif key in lookup:
                basis.append(lookup[key])
            else:
                return False
        if len(basis) != self.n + 1 or len(set(basis)) != len(basis):
            return False
        cols = [self.column(k)[0] for k in basis]
        Binv = _invert([[cols[c][r] for c in range(self.n + 1)] for r in range(self.n + 1)])
        if Binv is None:
            return False
        y = [Binv[i][self.n] for i in range(self.n + 1)]
        if any(v < 0 for v in y):
            return False
        self.basis, self.Binv, self.y = basis, Binv, y
        return True

    def prices(self):
        """pi = b_B^T B^{-1} (exact)."""
        bB = [self.column(k)[1] for k in self.basis]
        n1 = self.n + 1
        return [sum((bB[i] * self.Binv[i][j] for i in range(n1) if bB[i] and self.Binv[i][j]), Fraction(0)) for j in range(n1)]

    def objective(self):
        return sum((self.column(k)[1] * v for k, v in zip(self.basis, self.y) if v), Fraction(0))

    def reduced_cost(self, k: int, pi) -> Fraction:
        r, b = self.column(k)
        return b - sum((pi[j] * r[j] for j in range(self.n + 1) if r[j]), Fraction(0))

    def float_reduced_costs(self, pi) -> np.ndarray:
        pf = np.array([float(v) for v in pi], dtype=np.float64)
        c, s = pf[: self.n], pf[self.n]
        R = self.rows
        with np.errstate(over="ignore", invalid="ignore"):
            v = R.Af @ c if R.m else np.zeros(0)
            up = (R.hif - v - R.wf * s) / R.row_norm
            lo = (-R.lof + v - R.wf * s) / R.row_norm
        big = float(BOX)
        out = np.concatenate([big - c, big + c, [1.0 - s], up, lo])
        return np.where(np.isnan(out), -np.inf, out)

    def exact_violations(self, pi) -> list:
        """Every column with a negative reduced cost, checked in exact integers."""
        n = self.n
        bad = [k for k in range(self.k_rows) if self.reduced_cost(k, pi) < 0]
        nums, D = _common(pi)
        P, Ps = nums[:n], nums[n]
        terms = self.p.terms
        dmax = terms[-1]
        R = self.rows
        m = R.m
        for i in range(m):
            X, Q = R.X[i], R.Q[i]
            N = 0
            for Pj, d in zip(P, terms):
                if Pj:
                    N += Pj * X**d * Q ** (dmax - d)
            Qd = Q**dmax
            H, L, F = R.H[i], R.L[i], R.F[i]
            slack = (H - L) * Ps * Qd
            if 2 * H * D * Qd - 2 * F * N - slack < 0:
                bad.append(self.k_rows + i)
            if -2 * L * D * Qd + 2 * F * N - slack < 0:
                bad.append(self.k_rows + m + i)
        return bad

    def box_weight(self) -> bool:
        return any(self.is_box(k) and v > 0 for k, v in zip(self.basis, self.y))

    # -- main loop
    def run(self) -> LPResult:
        n1 = self.n + 1
        stall = 0
        best = None
        bland = False
        while True:
            pi = self.prices()
            obj = self.objective()
            if obj < 0 and not self.box_weight():
                raise LPInfeasible(f"margin bound {float(obj):.3g} < 0 certifies infeasibility")
            if best is None or obj < best:
                best, stall = obj, 0
            else:
                stall += 1
                if stall > 3 * n1 + 20:
                    bland = True
            entering = self._choose(pi, bland)
            if entering is None:
                return self._finish(pi, obj)
            if self.iterations >= self.max_iterations:
                raise LPLimit(f"iteration cap {self.max_iterations} reached")
            self.iterations += 1
            self._pivot(entering)

    def _choose(self, pi, bland: bool) -> Optional[int]:
        d = self.float_reduced_costs(pi)
        cand = np.nonzero(d < 0)[0]
        if bland:
            cand = np.sort(cand)
        else:
            cand = cand[np.argsort(d[cand], kind="stable")]
        in_basis = set(self.basis)
        for k in cand[:32]:
            k = int(k)
            if k not in in_basis and self.reduced_cost(k, pi) < 0:
                return k
        bad = [k for k in self.exact_violations(pi) if k not in in_basis]
        if not bad:
            return None
        return min(bad) if bland else min(bad, key=lambda k: (d[k], k))

    def _pivot(self, k: int):
        r, _ = self.column(k)
        n1 = self.n + 1
        Binv = self.Binv
        u = [sum((Binv[i][j] * r[j] for j in range(n1) if r[j] and Binv[i][j]), Fraction(0)) for i in range(n1)]
        best = None
        for i in range(n1):
            if u[i] > 0:
                ratio = self.y[i] / u[i]
                key = (ratio, self.basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            # dual unbounded along the ray (-u on the basis, +1 on k)
            box = self.is_box(k) or any(self.is_box(b) and u[i] < 0 for i, b in enumerate(self.basis))
            if box:
                raise LPLimit("infeasibility depends on the coefficient box")
            raise LPInfeasible("dual unbounded: contradictory constraints")
        p = best[1]
        theta = self.y[p] / u[p]
        piv = u[p]
        row_p = [v / piv for v in Binv[p]]
        for i in range(n1):
            if i == p or not u[i]:
                continue
            ui = u[i]
            Binv[i] = [a - ui * b for a, b in zip(Binv[i], row_p)]
            self.y[i] -= ui * theta
        Binv[p] = row_p
        self.y[p] = theta
        self.basis[p] = k

    def _finish(self, pi, obj) -> LPResult:
        margin = pi[self.n]
        if margin < 0:
            if self.box_weight():
                raise LPLimit("optimum is limited by the coefficient box")
            raise LPInfeasible(f"maximum margin {float(margin):.3g} < 0")
        return LPResult(tuple(pi[: self.n]), margin, self.iterations, tuple(self.key_of(k) for k in self.basis))


def _invert(M):
    """Exact Gauss-Jordan inverse, or None when singular."""
    n = len(M)
    A = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c] != 0), None)
        if p is None:
            return None
        A[c], A[p] = A[p], A[c]
        piv = A[c][c]
        A[c] = [v / piv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c]:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [row[n:] for row in A]


def solve_lp(problem: RationalLPProblem, warm_basis=None, max_iterations: int = 20000) -> LPResult:
    """A feasible coefficient vector for ``problem`` (the max-margin one).

    Raises :class:`LPInfeasible` when no coefficients satisfy every row and
    :class:`LPLimit` when the iteration cap or the coefficient box stops the
    search before a definitive answer.
    """
    if not problem.rows:
        return LPResult(tuple(Fraction(0) for _ in problem.terms), Fraction(1), 0)
    sx = _Simplex(problem, max_iterations)
    if not (warm_basis and sx.warm_start(warm_basis)):
        sx.cold_start()
    return sx.run()


def check_solution(problem: RationalLPProblem, coefficients: Sequence[Fraction]) -> bool:
    """Exact substitution check of every row."""
    for x, lo, hi in problem.rows:
        v = sum((c * x**d for c, d in zip(coefficients, problem.terms)), Fraction(0))
        if not lo <= v <= hi:
            return False
    return True
