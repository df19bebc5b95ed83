"""Command-line front end: ``crpoly generate | validate | bench``.

Options can also come from a JSON config file (``--config``); keys use the
long option names with dashes or underscores, and explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from crpoly.formats import get_format
from crpoly.intervals import Infeasible, build_reduced_set, dump_reduced_set
from crpoly.oracle import DEFAULT_PRECISION, FUNCTIONS
from crpoly.polygen import (
    GenerationLimit,
    PolynomialSpec,
    generate_with_sampling,
    load_artifact,
    refine_and_generate,
    save_artifact,
)
from crpoly.reduction import get_recipe
from crpoly.rlibm import CompiledFunction, bench, validate_exhaustive
from crpoly.tables import SHIPPED, published_coefficients

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_UNKNOWN_RECIPE = 4
EXIT_BAD_ARTIFACT = 5
EXIT_LIMIT = 6

DEFAULTS = {
    "function": None,
    "format": None,
    "variant": None,
    "terms": None,
    "coeffs": "appendix",
    "sample": None,
    "seed": 0,
    "precision": DEFAULT_PRECISION,
    "jobs": None,
    "output": None,
    "dump_lambda": None,
    "iterations": 5,
}


class UsageError(Exception):
    pass


class UnknownRecipe(Exception):
    pass


class BadArtifact(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crpoly", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        # defaults are None so that config-file values can fill the gaps
        p.add_argument("--config", help="JSON file with option values")
        p.add_argument("--function", default=None, help=", ".join(FUNCTIONS))
        p.add_argument("--format", default=None, help="fp5, bfloat16, posit16 or binary32")
        p.add_argument("--variant", default=None, help="alternative range reduction, when one exists")
        p.add_argument("--precision", type=int, default=None, help="oracle precision in bits (default 2000)")
        p.add_argument("--output", "-o", default=None)

    gen = sub.add_parser("generate", help="synthesize coefficients and write an artifact")
    common(gen)
    gen.add_argument("--terms", default=None, help='degrees, e.g. "1,3,5" or piecewise "1@0.006;1,3,5,7"')
    gen.add_argument("--sample", type=int, default=None, help="fit on a random sample and validate-augment")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--jobs", type=int, default=None)
    gen.add_argument("--dump-lambda", default=None, help="write the reduced constraints as TSV")

    val = sub.add_parser("validate", help="check coefficients against the oracle on every input")
    common(val)
    val.add_argument("--coeffs", default=None, help='"appendix" for the published tables, or an artifact path')
    val.add_argument("--jobs", type=int, default=None)

    ben = sub.add_parser("bench", help="time the evaluation pipeline")
    common(ben)
    ben.add_argument("--coeffs", default=None, help='"appendix" for the published tables, or an artifact path')
    ben.add_argument("--iterations", type=int, default=None)
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge hard defaults, config file values and explicit flags, in that order."""
    opts = dict(DEFAULTS)
    if args.config:
        cfg = _load_config(args.config)
        unknown = set(cfg) - set(DEFAULTS) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        opts.update({k: v for k, v in cfg.items() if k != "command"})
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None:
            opts[k] = v
    if opts["jobs"] is None:
        opts["jobs"] = os.cpu_count() or 1
    return opts


def _recipe(opts):
    if not opts["function"] or not opts["format"]:
        raise UsageError("--function and --format are required")
    try:
        fmt = get_format(opts["format"])
        return get_recipe(opts["function"], fmt, opts["variant"])
    except KeyError as e:
        raise UnknownRecipe(e.args[0] if e.args else str(e)) from None


def _compiled(opts) -> CompiledFunction:
    source = opts["coeffs"]
    if source != "appendix":
        try:
            cs, header = load_artifact(source)
        except (OSError, ValueError) as e:
            raise BadArtifact(f"cannot load {source}: {e}") from None
        for key in ("function", "format"):
            if opts[key] is None:
                opts[key] = header.get(key)
        recipe = _recipe(opts)
        if header.get("recipe") and header["recipe"] != recipe.recipe_id:
            raise BadArtifact(f"{source} was generated for {header['recipe']}, not {recipe.recipe_id}")
        return CompiledFunction(recipe, cs)
    recipe = _recipe(opts)
    if (recipe.format.name, recipe.function) not in SHIPPED:
        raise UnknownRecipe(f"no published coefficients for {recipe.function} on {recipe.format.name}")
    return CompiledFunction(recipe, published_coefficients(recipe.format.name, recipe.function))


def _default_spec(recipe) -> PolynomialSpec:
    key = (recipe.format.name, recipe.function)
    if key not in SHIPPED:
        raise UsageError(f"--terms is required for {recipe.function} on {recipe.format.name}")
    return published_coefficients(*key).spec


def cmd_generate(opts, out) -> int:
    recipe = _recipe(opts)
    try:
        spec = PolynomialSpec.parse_terms(opts["terms"]) if opts["terms"] else _default_spec(recipe)
    except ValueError as e:
        raise UsageError(f"bad --terms: {e}") from None
    sample = opts["sample"]
    if sample is None and recipe.format.total_bits > 16:
        sample = 5000
    try:
        if sample is None:
            lam = build_reduced_set(recipe, recipe.non_special_bits(), precision=opts["precision"])
            if opts["dump_lambda"]:
                dump_reduced_set(lam, opts["dump_lambda"])
            cs = refine_and_generate(lam, spec)
        else:
            cs = generate_with_sampling(
                recipe,
                spec,
                sample_size=int(sample),
                rng_seed=int(opts["seed"]),
                jobs=int(opts["jobs"]),
                log=lambda line: print(line, file=out),
                precision=opts["precision"],
            )
            if opts["dump_lambda"]:
                print("note: --dump-lambda is ignored with --sample", file=out)
    except Infeasible as e:
        print(f"status: infeasible ({e})", file=out)
        return EXIT_INFEASIBLE
    except GenerationLimit as e:
        print(f"status: limit reached ({e})", file=out)
        return EXIT_LIMIT
    path = opts["output"] or f"{recipe.format.name}-{recipe.function}.json"
    save_artifact(path, cs, recipe.function, recipe.format.name, recipe.recipe_id, recipe.reduced_domain[0])
    md = cs.metadata
    print("status: feasible", file=out)
    print(f"constraints: {md['constraints']}", file=out)
    print(f"iterations: {md['iterations']}", file=out)
    if "rounds" in md:
        print(f"rounds: {md['rounds']}", file=out)
    print(f"artifact: {path}", file=out)
    return EXIT_OK


def cmd_validate(opts, out) -> int:
    cf = _compiled(opts)
    report = validate_exhaustive(cf, precision=opts["precision"], jobs=int(opts["jobs"]))
    if opts["output"]:
        report.write(opts["output"], cf.in_format)
        print(report.summary(), file=out)
        print(f"report: {opts['output']}", file=out)
    else:
        report.write(out, cf.in_format)
    return EXIT_OK if report.ok else EXIT_MISMATCH


def cmd_bench(opts, out) -> int:
    cf = _compiled(opts)
    iterations = int(opts["iterations"])
    if iterations < 1:
        raise UsageError("--iterations must be positive")
    text = f"function: {cf.recipe.function}\nformat: {cf.in_format.name}\n" + bench(cf, iterations).text()
    if opts["output"]:
        with open(opts["output"], "w", encoding="utf-8") as f:
            f.write(text)
    out.write(text)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "validate": cmd_validate, "bench": cmd_bench}


def run(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        opts = resolve_options(args)
        return COMMANDS[args.command](opts, out)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except UnknownRecipe as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNKNOWN_RECIPE
    except BadArtifact as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_ARTIFACT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
