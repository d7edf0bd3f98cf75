"""Command-line interface.

Exit codes: 0 success, 1 input or validation error, 2 non-convergence (the
result is still printed), 3 a verification command found a violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .axioms import check_n_var_axioms, check_two_var_axioms
from .engine import SCALARS, ConvergenceConfig, compare_rates, extend_mean, make_evaluator, random_cycle_mapping
from .errors import MeanExtError
from .means import parse_mean_spec
from .spd import OPERATOR_KINDS, OperatorMean, SandwichConfig, load_matrices, sandwich_verify, spd_domain
from .traces import fmt, trace_csv, trace_records

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_VIOLATION = 0, 1, 2, 3
TOLERANCE_ENV = "MEANEXT_TOLERANCE"


class InputError(Exception):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def _guard(field, fn, *args):
    try:
        return fn(*args)
    except (MeanExtError, ValueError, OSError) as exc:
        raise InputError(field, str(exc)) from None


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; exit status 2 is reserved for non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_mean(p):
    p.add_argument("--mean", required=True,
                   help="arithmetic | geometric | harmonic | logarithmic | power:<p>")


def _add_inputs(p, matrices=True):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--values", help="comma-separated positive reals")
    g.add_argument("--input", help="CSV file with one positive real per line")
    if matrices:
        g.add_argument("--matrices", help='JSON file {"dimension": d, "matrices": [[...], ...]}')


def _add_run(p):
    p.add_argument("--scheme", default="neighbor",
                   help="variation | variation-recursive | neighbor | cycle:<seed> (default neighbor)")
    p.add_argument("--tolerance", type=float, default=None,
                   help=f"relative spread threshold (default ${TOLERANCE_ENV} or 1e-12 scalars / 1e-10 matrices)")
    p.add_argument("--max-iterations", type=int, default=10_000)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="write to this file instead of stdout")


def build_parser():
    parser = _Parser(prog="meanext", description="Iterative n-variable extensions of two-variable means.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extend", help="compute the n-variable mean")
    _add_mean(p)
    _add_inputs(p)
    _add_run(p)

    p = sub.add_parser("trace", help="export the per-step trace of one run")
    _add_mean(p)
    _add_inputs(p)
    _add_run(p)

    p = sub.add_parser("compare-schemes", help="limits and convergence rates of all schemes on one input")
    _add_mean(p)
    _add_inputs(p, matrices=False)
    _add_run(p)
    p.add_argument("--mappings", type=int, default=10, help="number of random cycle mappings (default 10)")

    p = sub.add_parser("axioms", help="randomized mean-axiom checks")
    _add_mean(p)
    p.add_argument("--n", type=int, default=2, help="2 checks the two-variable mean, >= 3 its extension")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--low", type=float, default=1e-3)
    p.add_argument("--high", type=float, default=1e3)
    p.add_argument("--check-tolerance", type=float, default=None,
                   help="relative tolerance of the checks (default 1e-12 for n=2, 1e-10 otherwise)")
    _add_run(p)
    p.set_defaults(scheme="variation")

    p = sub.add_parser("sandwich", help="equal-norm sandwich verification on SPD matrices")
    _add_mean(p)
    p.add_argument("--matrices", required=True)
    p.add_argument("--t-max", type=int, default=30)
    p.add_argument("--tolerance", type=float, default=1e-12)
    p.add_argument("--max-iterations", type=int, default=10_000)
    p.add_argument("--loewner-tolerance", type=float, default=1e-10)
    p.add_argument("--format", choices=("json",), default="json")
    p.add_argument("--output")
    return parser


# --------------------------------------------------------------------------
# input handling
# --------------------------------------------------------------------------

def _tolerance(args):
    if args.tolerance is not None:
        return args.tolerance
    env = os.environ.get(TOLERANCE_ENV)
    if env:
        return _guard(TOLERANCE_ENV, float, env)
    return None


def _config(args, capture_trace=False):
    tol = _tolerance(args)
    field = "--tolerance" if tol is not None and not tol > 0 else "--max-iterations"
    return _guard(field, ConvergenceConfig, tol, args.max_iterations, capture_trace)


def _parse_values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError("--values", str(exc)) from None


def _read_csv(path):
    def read():
        with open(path, newline="") as fh:
            return [float(row[0]) for row in csv.reader(fh) if row and row[0].strip()]

    return _guard("--input", read)


def _load(args):
    """Return (mean, inputs, is_matrix)."""
    matrices = getattr(args, "matrices", None)
    mean = _guard("--mean", parse_mean_spec, args.mean)
    if matrices:
        if mean.kind not in OPERATOR_KINDS:
            raise InputError("--mean", f"matrix input needs an operator mean ({', '.join(OPERATOR_KINDS)})")
        return OperatorMean(mean.kind), _guard("--matrices", load_matrices, matrices), True
    values = _parse_values(args.values) if args.values is not None else _read_csv(args.input)
    if len(values) < 2:
        raise InputError("--values" if args.values is not None else "--input", "need at least two values")
    return mean, values, False


def _source(args):
    for flag in ("matrices", "input", "values"):
        if getattr(args, flag, None) is not None:
            return f"--{flag}"
    return "--values"


def _scheme(args, n):
    text = args.scheme.strip()
    if text in ("variation", "variation-recursive", "neighbor"):
        return text, None
    if text.startswith("cycle:"):
        try:
            seed = int(text[len("cycle:"):])
        except ValueError:
            raise InputError("--scheme", f"cycle seed must be an integer, got {text!r}") from None
        if n < 3:
            raise InputError("--scheme", "cycle schemes need at least three inputs")
        mapping = random_cycle_mapping(n, seed)
        return mapping, mapping
    raise InputError("--scheme", f"unknown scheme {text!r}")


def _element_json(value):
    if hasattr(value, "data"):
        return np.asarray(value.data).tolist()
    return float(value)


def _emit(args, text):
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _header(args, mean, mapping, config, n, is_matrix):
    domain = spd_domain() if is_matrix else SCALARS
    return {
        "mean": mean.name,
        "domain": "spd" if is_matrix else "scalar",
        "scheme": args.scheme,
        "mapping": mapping.to_dict() if mapping is not None else None,
        "n": n,
        "tolerance": config.tolerance_for(domain),
        "max_iterations": config.max_iterations,
    }


def cmd_extend(args):
    mean, inputs, is_matrix = _load(args)
    scheme, mapping = _scheme(args, len(inputs))
    config = _config(args)
    res = _guard(_source(args), extend_mean, mean, inputs, scheme, config)
    head = _header(args, mean, mapping, config, len(inputs), is_matrix)
    if args.format == "json":
        doc = {"command": "extend", **head, "value": _element_json(res.value), "iterations": res.iterations,
               "converged": res.converged, "final_spread": res.spread_history[-1],
               "final_rel_spread": res.final_rel_spread}
        _emit(args, _dumps(doc))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if mapping is not None:
            buf.write(f"# mapping={json.dumps(mapping.to_dict())}\n")
        if is_matrix:
            d = res.value.dimension
            cols = [f"value_{r}_{c}" for r in range(d) for c in range(d)]
            vals = [fmt(v) for v in res.value.data.reshape(-1)]
        else:
            cols, vals = ["value"], [fmt(res.value)]
        w.writerow(["mean", "scheme", "n", *cols, "iterations", "converged", "rel_spread"])
        w.writerow([mean.name, args.scheme, len(inputs), *vals, res.iterations, str(res.converged).lower(),
                    fmt(res.final_rel_spread)])
        _emit(args, buf.getvalue())
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_trace(args):
    mean, inputs, is_matrix = _load(args)
    scheme, mapping = _scheme(args, len(inputs))
    config = _config(args, capture_trace=True)
    res = _guard(_source(args), extend_mean, mean, inputs, scheme, config)
    head = _header(args, mean, mapping, config, len(inputs), is_matrix)
    head.update(iterations=res.iterations, converged=res.converged)
    records = trace_records(res)
    if args.format == "json":
        _emit(args, _dumps({"command": "trace", "header": head, "records": records}))
    else:
        lines = [f"{k}={json.dumps(v)}" for k, v in head.items()]
        _emit(args, trace_csv(records, lines))
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_compare(args):
    mean, inputs, _ = _load(args)
    n = len(inputs)
    if n < 3:
        raise InputError(_source(args), "compare-schemes needs at least three values")
    if args.mappings < 1:
        raise InputError("--mappings", "must be >= 1")
    config = _config(args)
    rng = np.random.default_rng(args.seed)
    mappings = [random_cycle_mapping(n, rng) for _ in range(args.mappings)]
    sorted_inputs = sorted(inputs)

    runs = {}
    for name in ("neighbor", "variation"):
        runs[name] = _guard(_source(args), extend_mean, mean, inputs, name, config)
    for i, mp in enumerate(mappings):
        runs[f"cycle:{i}"] = extend_mean(mean, inputs, mp, config)
    rates = compare_rates(mean, sorted_inputs, mappings, config)

    names = sorted(runs)
    ok = all(runs[k].converged for k in names)
    if args.format == "json":
        doc = {
            "command": "compare-schemes",
            "mean": mean.name,
            "n": n,
            "seed": args.seed,
            "tolerance": runs["neighbor"].tolerance,
            "schemes": {
                k: {"value": runs[k].value, "iterations": runs[k].iterations, "converged": runs[k].converged}
                for k in names
            },
            "mappings": {f"cycle:{i}": mp.to_dict() for i, mp in enumerate(mappings)},
            "steps_to_tolerance": {
                "neighbor": rates.steps_to_tolerance[0],
                **{f"cycle:{i}": s for i, s in enumerate(rates.steps_to_tolerance[1:])},
            },
            "sandwich_violations": [
                {"scheme": f"cycle:{j}", "step": k, "extremum": which, "baseline": b, "cycle": c}
                for j, k, which, b, c in rates.violations
            ],
        }
        _emit(args, _dumps(doc))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scheme", "step", "min", "max", "spread"])
        labels = ["neighbor"] + [f"cycle:{i}" for i in range(len(mappings))]
        for j, label in enumerate(labels):
            for k in range(rates.min_table.shape[0]):
                w.writerow([label, k, fmt(rates.min_table[k, j]), fmt(rates.max_table[k, j]),
                            fmt(rates.spread_table[k, j])])
        _emit(args, buf.getvalue())
    if not ok:
        return EXIT_NONCONVERGED
    return EXIT_VIOLATION if rates.violations else EXIT_OK


def cmd_axioms(args):
    mean = _guard("--mean", parse_mean_spec, args.mean)
    box = (args.low, args.high)
    if args.n == 2:
        tol = args.check_tolerance if args.check_tolerance is not None else 1e-12
        report = _guard("--low/--high", check_two_var_axioms, mean, args.samples, box, args.seed, tol)
    else:
        if args.n < 3:
            raise InputError("--n", "must be 2 or at least 3")
        scheme, _ = _scheme(args, args.n)
        tol = args.check_tolerance if args.check_tolerance is not None else 1e-10
        evaluator = make_evaluator(mean, scheme, _config(args))
        report = _guard("--low/--high", check_n_var_axioms, evaluator, args.n, args.samples, box, tol, args.seed)
    if args.format == "json":
        _emit(args, _dumps({"command": "axioms", "mean": mean.name, "scheme": args.scheme if args.n > 2 else None,
                            "seed": args.seed, **report.to_dict()}))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axiom", "passed", "counterexample"])
        for name, r in report.to_dict()["axioms"].items():
            w.writerow([name, str(r["passed"]).lower(), json.dumps(r["counterexample"])])
        _emit(args, buf.getvalue())
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_sandwich(args):
    mean = _guard("--mean", parse_mean_spec, args.mean)
    if mean.kind not in OPERATOR_KINDS:
        raise InputError("--mean", f"sandwich needs an operator mean ({', '.join(OPERATOR_KINDS)})")
    mats = _guard("--matrices", load_matrices, args.matrices)
    engine = _guard("--tolerance", ConvergenceConfig, args.tolerance, args.max_iterations)
    try:
        config = SandwichConfig(t_max=args.t_max, engine=engine, loewner_tolerance=args.loewner_tolerance)
    except MeanExtError as exc:
        raise InputError("--t-max", str(exc)) from None
    report = _guard("--matrices", sandwich_verify, OperatorMean(mean.kind), mats, config)
    _emit(args, _dumps({"command": "sandwich", **report.to_dict()}))
    if not report.converged:
        return EXIT_NONCONVERGED
    return EXIT_OK if report.all_verdicts else EXIT_VIOLATION


COMMANDS = {
    "extend": cmd_extend,
    "trace": cmd_trace,
    "compare-schemes": cmd_compare,
    "axioms": cmd_axioms,
    "sandwich": cmd_sandwich,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"meanext {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
