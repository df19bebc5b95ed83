"""Shipped correctly rounded functions and their exhaustive validation.

A :class:`CompiledFunction` evaluates a pattern in five steps: special-case
lookup, range reduction, polynomial evaluation, output compensation and a
final rounding to the output format.  Everything between decoding and the
final rounding happens in binary64, exactly as during generation.
"""

from __future__ import annotations

import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, TextIO, Union

import numpy as np

from crpoly.formats import FormatDescriptor, TValue, decode_array, round_array, same_result, to_hex
from crpoly.oracle import DEFAULT_PRECISION, reference_bits, reference_table
from crpoly.polygen import CoefficientSet
from crpoly.reduction import FunctionRecipe, get_recipe
from crpoly.tables import SHIPPED, published_coefficients

_CHUNK = 1 << 16

# Workers inherit the function through fork: recipes hold special-case
# predicates that do not pickle.
_WORKER_CF = None


def _fork_map(cf, func, parts, jobs):
    global _WORKER_CF
    if "fork" not in multiprocessing.get_all_start_methods():
        return [func(p) for p in parts]
    _WORKER_CF = cf
    try:
        with ProcessPoolExecutor(max_workers=jobs, mp_context=multiprocessing.get_context("fork")) as pool:
            return list(pool.map(func, parts))
    finally:
        _WORKER_CF = None


def _evaluate_part(bits):
    return _WORKER_CF._evaluate_chunk(bits)


def _validate_part(args):
    bits, precision, fast = args
    cf = _WORKER_CF
    expected = reference_bits(cf.recipe.function, cf.in_format, cf.out_format, bits, precision, fast)
    got = cf._evaluate_chunk(bits)
    return len(bits), _mismatches(cf, bits, got, expected)


def _mismatches(cf, bits, got, expected):
    bad = np.nonzero(~same_result(cf.out_format, got, expected))[0]
    return [Mismatch(int(bits[k]), int(got[k]), int(expected[k])) for k in bad]


@dataclass(frozen=True)
class CompiledFunction:
    recipe: FunctionRecipe
    coeffs: CoefficientSet
    in_format: Optional[FormatDescriptor] = None
    out_format: Optional[FormatDescriptor] = None

    def __post_init__(self):
        if self.in_format is None:
            object.__setattr__(self, "in_format", self.recipe.format)
        if self.out_format is None:
            object.__setattr__(self, "out_format", self.recipe.format)

    @property
    def name(self) -> str:
        return f"{self.recipe.function}/{self.in_format.name}"

    def _evaluate_chunk(self, bits: np.ndarray) -> np.ndarray:
        special, special_out = self.recipe.classify_special_array(bits)
        out = special_out.astype(np.int64)
        pending = ~special
        if pending.any():
            x = decode_array(self.in_format, bits[pending])
            xr, ctx = self.recipe.reduce_array(x)
            y = self.coeffs.evaluate_array(xr)
            with np.errstate(all="ignore"):
                out[pending] = round_array(self.out_format, self.recipe.compensate_array(y, ctx))
        return out

    def evaluate_bits(self, bits, jobs: int = 1) -> np.ndarray:
        """Result patterns for an array of input patterns."""
        bits = np.asarray(bits, dtype=np.int64)
        if jobs <= 1 or len(bits) <= _CHUNK:
            return self._evaluate_chunk(bits)
        parts = np.array_split(bits, jobs)
        return np.concatenate(_fork_map(self, _evaluate_part, parts, jobs))

    def evaluate(self, x: TValue) -> TValue:
        if x.format != self.in_format:
            raise ValueError(f"{x!r} is not a {self.in_format.name} value")
        return TValue(self.out_format, int(self._evaluate_chunk(np.array([x.bits], dtype=np.int64))[0]))

    def __call__(self, x: TValue) -> TValue:
        return self.evaluate(x)


@dataclass(frozen=True)
class Mismatch:
    bits: int
    got: int
    expected: int


@dataclass
class ValidationReport:
    function: str
    format: str
    recipe: str
    total: int
    mismatches: list = field(default_factory=list)

    @property
    def correct(self) -> int:
        return self.total - len(self.mismatches)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def summary(self) -> str:
        return f"{self.function} on {self.format}: {self.correct}/{self.total} correct"

    def text(self, fmt: FormatDescriptor) -> str:
        lines = [
            f"function: {self.function}",
            f"format: {self.format}",
            f"recipe: {self.recipe}",
            f"total: {self.total}",
            f"correct: {self.correct}",
            f"mismatches: {len(self.mismatches)}",
            "# input\tgot\texpected",
        ]
        lines += [f"{to_hex(fmt, m.bits)}\t{to_hex(fmt, m.got)}\t{to_hex(fmt, m.expected)}" for m in self.mismatches]
        return "\n".join(lines) + "\n"

    def write(self, dest: Union[str, os.PathLike, TextIO], fmt: FormatDescriptor) -> None:
        if hasattr(dest, "write"):
            dest.write(self.text(fmt))
            return
        with open(dest, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.text(fmt))


def validate_exhaustive(cf: CompiledFunction, precision: int = DEFAULT_PRECISION, jobs: int = 1) -> ValidationReport:
    """Compare against the correctly rounded reference on every input pattern.

    The recipe decides the input set: all patterns of a 16-bit format, or
    the restricted range of a wider one.  With ``jobs > 1`` the inputs are
    split across worker processes, each computing its own reference slice;
    otherwise the memoized reference table is used.  Mismatches are sorted by
    input bits either way.
    """
    if jobs > 1:
        bits = cf.recipe.input_bits()
        fast = cf.in_format.total_bits > 16
        parts = [(p, precision, fast) for p in np.array_split(bits, jobs * 4)]
        results = _fork_map(cf, _validate_part, parts, jobs)
        total = sum(n for n, _ in results)
        mism = [m for _, ms in results for m in ms]
    else:
        bits, expected = reference_table(
            cf.recipe.function, cf.in_format, cf.out_format, domain=cf.recipe.input_domain, precision=precision
        )
        total = len(bits)
        mism = _mismatches(cf, bits, cf.evaluate_bits(bits), expected)
    mism.sort(key=lambda m: m.bits)
    return ValidationReport(cf.recipe.function, cf.in_format.name, cf.recipe.recipe_id, int(total), mism)


@dataclass(frozen=True)
class BenchResult:
    inputs: int
    repeats: int
    mean_ns: float
    min_ns: float

    def text(self) -> str:
        return f"inputs: {self.inputs}\nrepeats: {self.repeats}\nmean_ns_per_input: {self.mean_ns:.3f}\nmin_ns_per_input: {self.min_ns:.3f}\n"


def bench(cf: CompiledFunction, iterations: int = 5) -> BenchResult:
    """Wall-clock cost per input of the vectorized pipeline (informational)."""
    if iterations < 1:
        raise ValueError("iterations must be positive")
    bits = cf.recipe.input_bits()
    times = []
    for _ in range(iterations):
        t0 = time.perf_counter_ns()
        cf.evaluate_bits(bits)
        times.append((time.perf_counter_ns() - t0) / len(bits))
    return BenchResult(int(len(bits)), iterations, float(np.mean(times)), float(min(times)))


def shipped_functions():
    """(format name, function) pairs that have published coefficients."""
    return SHIPPED


def shipped(function: str, fmt: Union[str, FormatDescriptor]) -> CompiledFunction:
    """The shipped function built from the published coefficient table."""
    recipe = get_recipe(function, fmt)
    return CompiledFunction(recipe, published_coefficients(recipe.format.name, function))
