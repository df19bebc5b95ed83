"""Polynomial specifications, binary64 evaluation and coefficient synthesis.

``refine_and_generate`` is the search-and-refine loop: solve the exact LP on
a working copy of the reduced constraints, round the rational coefficients to
binary64, evaluate exactly as the shipped code will, and tighten any violated
bound by one binary64 ulp before solving again.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np

from crpoly.formats import exact_decimal
from crpoly.intervals import Infeasible, ReducedSet, build_reduced_set
from crpoly.lp import LPInfeasible, LPLimit, RationalLPProblem, solve_lp
from crpoly.oracle import DEFAULT_PRECISION

__all__ = [
    "Piece",
    "PolynomialSpec",
    "CoefficientSet",
    "GenerationLimit",
    "Infeasible",
    "horner_eval",
    "horner_eval_array",
    "refine_and_generate",
    "generate_with_sampling",
    "solve_lp",
    "save_artifact",
    "load_artifact",
    "artifact_text",
]

SCHEME = "nested"


class GenerationLimit(Exception):
    """The refinement or sampling loop hit its iteration cap."""


@dataclass(frozen=True)
class Piece:
    """Polynomial used for reduced inputs up to ``upper`` (``<=`` if inclusive, else ``<``)."""

    upper: float
    inclusive: bool
    terms: tuple

    def __post_init__(self):
        terms = tuple(int(t) for t in self.terms)
        if not terms or list(terms) != sorted(set(terms)) or terms[0] < 0:
            raise ValueError(f"terms must be a nonempty sorted set of nonnegative degrees, got {self.terms}")
        object.__setattr__(self, "terms", terms)


@dataclass(frozen=True)
class PolynomialSpec:
    """Ordered pieces; a reduced input uses the first piece whose bound admits it."""

    pieces: tuple

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise ValueError("a spec needs at least one piece")
        for a, b in zip(pieces, pieces[1:]):
            if not (a.upper < b.upper or (a.upper == b.upper and not a.inclusive and b.inclusive)):
                raise ValueError("piece bounds must increase")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def single(cls, terms: Sequence[int]) -> "PolynomialSpec":
        return cls((Piece(math.inf, True, tuple(terms)),))

    @classmethod
    def parse_terms(cls, text: str) -> "PolynomialSpec":
        """``"1,3,5"`` or piecewise ``"1@0.006;1,3,5,7"`` (bound after ``@``, ``<`` prefix for strict)."""
        pieces = []
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if "@" in chunk:
                degs, bound = chunk.split("@", 1)
                strict = bound.startswith("<")
                upper = float(bound.lstrip("<"))
                pieces.append(Piece(upper, not strict, tuple(int(d) for d in degs.split(","))))
            else:
                pieces.append(Piece(math.inf, True, tuple(int(d) for d in chunk.split(","))))
        return cls(tuple(pieces))

    def piece_index_array(self, x: np.ndarray) -> np.ndarray:
        """Index of the dispatching piece per input (len(pieces) when none applies)."""
        idx = np.full(len(x), len(self.pieces), dtype=np.int64)
        for k in reversed(range(len(self.pieces))):
            p = self.pieces[k]
            hit = (x <= p.upper) if p.inclusive else (x < p.upper)
            idx = np.where(hit, k, idx)
        return idx


def _pow_steps(x: np.ndarray, k: int) -> np.ndarray:
    """x**k by k-1 left-to-right multiplications (1 for k = 0)."""
    if k == 0:
        return np.ones_like(x)
    r = x
    for _ in range(k - 1):
        r = r * x
    return r


def horner_eval_array(terms: Sequence[int], coeffs: Sequence[float], x) -> np.ndarray:
    """Nested Horner evaluation in binary64.

    P(x) = x**d0 * (c0 + x**g1 * (c1 + x**g2 * (c2 + ...))) where g are the
    degree gaps.  Equal gaps share one precomputed power, so odd terms
    evaluate as x*Q(x*x) and even terms as Q(x*x).
    """
    x = np.asarray(x, dtype=np.float64)
    terms = list(terms)
    coeffs = [float(c) for c in coeffs]
    gaps = [b - a for a, b in zip(terms, terms[1:])]
    shared = {g: _pow_steps(x, g) for g in set(gaps)}
    acc = np.full_like(x, coeffs[-1])
    for k in range(len(coeffs) - 2, -1, -1):
        acc = acc * shared[gaps[k]] + coeffs[k]
    if terms[0]:
        acc = _pow_steps(x, terms[0]) * acc
    return acc


def horner_eval(terms: Sequence[int], coeffs: Sequence[float], x: float) -> float:
    return float(horner_eval_array(terms, coeffs, np.array([x]))[0])


@dataclass(frozen=True)
class CoefficientSet:
    """Binary64 coefficients per piece, aligned with the piece terms."""

    spec: PolynomialSpec
    coefficients: tuple
    metadata: dict = field(default_factory=dict, compare=False)
    scheme: str = SCHEME

    def __post_init__(self):
        coeffs = tuple(tuple(float(c) for c in cs) for cs in self.coefficients)
        if len(coeffs) != len(self.spec.pieces):
            raise ValueError("one coefficient list per piece is required")
        for p, cs in zip(self.spec.pieces, coeffs):
            if len(cs) != len(p.terms):
                raise ValueError(f"piece with terms {p.terms} got {len(cs)} coefficients")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def from_strings(cls, spec: PolynomialSpec, coefficients, metadata=None) -> "CoefficientSet":
        """Exact decimal strings are converted with correct rounding."""
        return cls(spec, tuple(tuple(float(s) for s in cs) for cs in coefficients), dict(metadata or {}))

    def evaluate_array(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        idx = self.spec.piece_index_array(x)
        out = np.full(len(x), np.nan)
        for k, (p, cs) in enumerate(zip(self.spec.pieces, self.coefficients)):
            sel = idx == k
            if sel.any():
                out[sel] = horner_eval_array(p.terms, cs, x[sel])
        return out

    def evaluate(self, x: float) -> float:
        return float(self.evaluate_array(np.array([x]))[0])

    def with_metadata(self, **kw) -> "CoefficientSet":
        md = dict(self.metadata)
        md.update(kw)
        return replace(self, metadata=md)


def violations(cs: CoefficientSet, lam: ReducedSet) -> np.ndarray:
    """Mask of reduced constraints that binary64 evaluation misses."""
    v = cs.evaluate_array(lam.x)
    return ~((v >= lam.lo) & (v <= lam.hi))


# ---------------------------------------------------------------------------
# search and refine


def _refine_piece(
    terms: tuple,
    lam: ReducedSet,
    max_iterations: int,
    lp_iterations: int,
    observer: Optional[Callable],
    piece_index: int,
):
    if len(lam) == 0:
        return tuple(0.0 for _ in terms), 0
    ulo, uhi = lam.lo.copy(), lam.hi.copy()
    basis = None
    for it in range(1, max_iterations + 1):
        if observer is not None:
            observer(piece_index, it, ulo.copy(), uhi.copy())
        problem = RationalLPProblem.from_arrays(terms, lam.x, ulo, uhi)
        try:
            res = solve_lp(problem, warm_basis=basis, max_iterations=lp_iterations)
        except LPInfeasible as e:
            raise Infeasible(f"terms {list(terms)}: {e}") from None
        except LPLimit as e:
            raise GenerationLimit(f"terms {list(terms)}: {e}") from None
        basis = res.basis
        coeffs = tuple(float(c) for c in res.coefficients)
        vals = horner_eval_array(terms, coeffs, lam.x)
        below = vals < lam.lo
        above = vals > lam.hi
        if not (below.any() or above.any()):
            return coeffs, it
        ulo[below] = np.nextafter(ulo[below], np.inf)
        uhi[above] = np.nextafter(uhi[above], -np.inf)
        empty = ulo > uhi
        if empty.any():
            raise Infeasible(
                f"terms {list(terms)}: refinement emptied {int(empty.sum())} constraint(s)",
                [float(v) for v in lam.x[empty]],
            )
    raise GenerationLimit(f"terms {list(terms)}: no verified coefficients after {max_iterations} refinements")


def refine_and_generate(
    lam: ReducedSet,
    spec: PolynomialSpec,
    max_iterations: int = 2000,
    lp_iterations: int = 20000,
    observer: Optional[Callable] = None,
) -> CoefficientSet:
    """Coefficients whose binary64 evaluation satisfies every constraint in ``lam``.

    ``observer(piece, iteration, lo, hi)`` is called with the working bounds
    before each LP solve.  Raises :class:`Infeasible` when the LP has no
    solution and :class:`GenerationLimit` on the iteration caps.
    """
    if len(lam) == 0:
        raise ValueError("no constraints to fit")
    idx = spec.piece_index_array(lam.x)
    if (idx == len(spec.pieces)).any():
        raise ValueError("some reduced inputs fall outside every piece")
    coeffs, iters = [], []
    for k, piece in enumerate(spec.pieces):
        cs, it = _refine_piece(piece.terms, lam.take(idx == k), max_iterations, lp_iterations, observer, k)
        coeffs.append(cs)
        iters.append(it)
    result = CoefficientSet(spec, tuple(coeffs), {"constraints": int(len(lam)), "iterations": iters})
    bad = violations(result, lam)
    if bad.any():  # cannot happen: each piece was verified above
        raise AssertionError("verified coefficients fail re-verification")
    return result


def generate_with_sampling(
    recipe,
    spec: PolynomialSpec,
    sample_size: int = 5000,
    rng_seed: int = 0,
    inputs=None,
    outputs=None,
    max_rounds: int = 50,
    jobs: int = 1,
    log: Optional[Callable[[str], None]] = None,
    precision: int = DEFAULT_PRECISION,
) -> CoefficientSet:
    """Fit on a random sample of inputs, validate on all, add counterexamples, repeat.

    ``inputs``/``outputs`` default to the recipe's non-special inputs and their
    reference results.  The sample is drawn uniformly without replacement with
    ``numpy.random.default_rng(rng_seed)``.
    """
    from crpoly.oracle import reference_table
    from crpoly.rlibm import CompiledFunction

    if inputs is None:
        all_in, all_out = reference_table(recipe.function, recipe.format, domain=recipe.input_domain, precision=precision)
        special, _ = recipe.classify_special_array(all_in)
        inputs, outputs = all_in[~special], all_out[~special]
    inputs = np.asarray(inputs, dtype=np.int64)
    outputs = np.asarray(outputs, dtype=np.int64)
    rng = np.random.default_rng(rng_seed)
    n = len(inputs)
    if sample_size >= n:
        chosen = np.ones(n, dtype=bool)
    else:
        chosen = np.zeros(n, dtype=bool)
        chosen[rng.choice(n, size=sample_size, replace=False)] = True
    total_iters = 0
    for round_no in range(1, max_rounds + 1):
        lam = build_reduced_set(recipe, inputs[chosen], outputs[chosen])
        cs = refine_and_generate(lam, spec)
        total_iters += sum(cs.metadata["iterations"])
        cf = CompiledFunction(recipe, cs)
        got = cf.evaluate_bits(inputs, jobs=jobs)
        wrong = got != outputs
        if log is not None:
            log(f"round {round_no}: {int(chosen.sum())} inputs, {len(lam)} constraints, {int(wrong.sum())} mismatches")
        if not wrong.any():
            return cs.with_metadata(
                seed=int(rng_seed),
                sample_size=int(sample_size),
                sampled_inputs=int(chosen.sum()),
                constraints=int(len(lam)),
                rounds=round_no,
                iterations=total_iters,
            )
        chosen |= wrong
    raise GenerationLimit(f"sampling did not converge within {max_rounds} rounds")


# ---------------------------------------------------------------------------
# artifact files


def _bits64(v: float) -> str:
    return f"0x{int(np.float64(v).view(np.uint64)):016X}"


def _from_bits64(text: str) -> float:
    return float(np.uint64(int(text, 16)).view(np.float64))


def artifact_dict(cs: CoefficientSet, function: str, fmt: str, recipe_id: str, lower: float) -> dict:
    pieces = []
    lo = lower
    lo_inclusive = True
    for p, coeffs in zip(cs.spec.pieces, cs.coefficients):
        pieces.append(
            {
                "domain": {
                    "lower": _bits64(lo),
                    "lower_inclusive": lo_inclusive,
                    "upper": _bits64(p.upper),
                    "upper_inclusive": p.inclusive,
                },
                "terms": list(p.terms),
                "coefficients": [{"decimal": exact_decimal(c), "hex": _bits64(c)} for c in coeffs],
            }
        )
        lo, lo_inclusive = p.upper, not p.inclusive
    return {
        "function": function,
        "format": fmt,
        "recipe": recipe_id,
        "scheme": cs.scheme,
        "pieces": pieces,
        "metadata": {k: cs.metadata[k] for k in sorted(cs.metadata)},
    }


def artifact_text(cs: CoefficientSet, function: str, fmt: str, recipe_id: str, lower: float) -> str:
    return json.dumps(artifact_dict(cs, function, fmt, recipe_id, lower), indent=2) + "\n"


def save_artifact(path: Union[str, os.PathLike], cs: CoefficientSet, function: str, fmt: str, recipe_id: str, lower: float):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(artifact_text(cs, function, fmt, recipe_id, lower))


def load_artifact(path: Union[str, os.PathLike]):
    """Returns (CoefficientSet, header dict with function/format/recipe)."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    try:
        pieces, coeffs = [], []
        for p in data["pieces"]:
            pieces.append(Piece(_from_bits64(p["domain"]["upper"]), bool(p["domain"]["upper_inclusive"]), tuple(p["terms"])))
            vals = [_from_bits64(c["hex"]) for c in p["coefficients"]]
            for c, v in zip(p["coefficients"], vals):
                if Fraction(c["decimal"]) != Fraction(v):
                    raise ValueError(f"coefficient {c['hex']} disagrees with its decimal form")
            coeffs.append(tuple(vals))
        cs = CoefficientSet(PolynomialSpec(tuple(pieces)), tuple(coeffs), dict(data.get("metadata", {})), data.get("scheme", SCHEME))
    except (KeyError, TypeError) as e:
        raise ValueError(f"malformed coefficient artifact: {e}") from None
    if cs.scheme != SCHEME:
        raise ValueError(f"unsupported evaluation scheme {cs.scheme!r}")
    header = {k: data.get(k) for k in ("function", "format", "recipe")}
    return cs, header
