"""Correctly rounded elementary functions for small number formats.

Polynomials are synthesized from exact rounding intervals with an exact
rational LP, then checked exhaustively against an MPFR reference.
"""

from crpoly.formats import BFLOAT16, BINARY32, FP5, POSIT16, FormatDescriptor, TValue, get_format
from crpoly.polygen import CoefficientSet, PolynomialSpec, refine_and_generate
from crpoly.reduction import get_recipe
from crpoly.rlibm import CompiledFunction, shipped, validate_exhaustive

__version__ = "0.1.0"

__all__ = [
    "BFLOAT16",
    "BINARY32",
    "FP5",
    "POSIT16",
    "CoefficientSet",
    "CompiledFunction",
    "FormatDescriptor",
    "PolynomialSpec",
    "TValue",
    "get_format",
    "get_recipe",
    "refine_and_generate",
    "shipped",
    "validate_exhaustive",
]
