"""Command-line interface.

Exit codes:
    0  success
    2  malformed input, unknown preset or invalid configuration
    3  numerical failure at every support size
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .exceptions import InvalidInputError, NumericalFailure
from .family import FAMILIES
from .glm import Dataset
from .selection import SelectorConfig, abess
from .simulation import PRESETS, ExperimentConfig, config_fields, preset, run_experiment

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("grid values must be positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spliceglm",
        description="Best-subset selection for GLMs by splicing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="select a subset on a CSV dataset")
    fit.add_argument("--input", required=True, help="CSV file with a header row")
    fit.add_argument("--response", required=True, help="name of the response column")
    fit.add_argument("--family", choices=FAMILIES, default="gaussian")
    fit.add_argument("--s-max", type=_positive_int)
    fit.add_argument("--k-max", type=_positive_int, default=5)
    fit.add_argument("--tau", type=float)
    fit.add_argument("--screening-size", type=_positive_int)
    fit.add_argument("--no-screening", action="store_true")
    fit.add_argument("--no-intercept", action="store_true")
    fit.add_argument("--output", help="write JSON here instead of stdout")
    fit.add_argument("--quiet", action="store_true")

    sim = sub.add_parser("simulate", help="run a synthetic recovery experiment")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help=f"one of {', '.join(sorted(PRESETS))}")
    src.add_argument("--config", help="JSON document or key=value file")
    sim.add_argument("--replications", type=_positive_int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--n-grid", type=_int_list)
    sim.add_argument("--output-dir", default=".")
    sim.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    sim.add_argument("--s-max", type=_positive_int)
    sim.add_argument("--k-max", type=_positive_int)
    sim.add_argument("--tau", type=float)
    sim.add_argument("--timing", action="store_true",
                     help="record runtime columns (makes output run-dependent)")
    sim.add_argument("--quiet", action="store_true")
    return parser


def read_csv(path, response):
    """Parse a numeric CSV; returns (X, y, predictor names)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}")
    if not rows:
        raise CliError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if response not in header:
        raise CliError(f"response column {response!r} not found in header {header}")
    if len(set(header)) != len(header):
        raise CliError("duplicate column names in header")
    body = rows[1:]
    if not body:
        raise CliError(f"{path} has no data rows")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise CliError(f"row {i} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i - 2, j] = float(cell)
            except ValueError:
                raise CliError(f"non-numeric value {cell!r} in column {header[j]!r}, row {i}")
            if not math.isfinite(values[i - 2, j]):
                raise CliError(f"non-finite value in column {header[j]!r}, row {i}")
    r = header.index(response)
    names = [h for k, h in enumerate(header) if k != r]
    if not names:
        raise CliError("no predictor columns besides the response")
    return np.delete(values, r, axis=1), values[:, r], names


def _check_response(y, family, name):
    if family == "logistic":
        if not np.all((y == 0) | (y == 1)):
            raise CliError(f"logistic response {name!r} must be coded 0/1")
        if np.all(y == y[0]):
            raise CliError(f"degenerate response: {name!r} is constant, nothing to classify")
    elif family == "poisson":
        if not (np.all(y >= 0) and np.all(y == np.round(y))):
            raise CliError(f"poisson response {name!r} must be nonnegative integers")
        if np.all(y == 0):
            raise CliError(f"degenerate response: {name!r} is identically zero")


def fit_command(args) -> int:
    X, y, names = read_csv(args.input, args.response)
    _check_response(y, args.family, args.response)
    n, p = X.shape
    if n < 16 and (args.tau is None or args.s_max is None):
        raise CliError(f"n={n} < 16: pass both --tau and --s-max explicitly")
    try:
        data = Dataset.from_raw(X, y, args.family, fit_intercept=not args.no_intercept,
                                names=names)
    except InvalidInputError as exc:
        column = getattr(exc, "column", None)
        if column is not None:
            raise CliError(f"column {names[column]!r} is identically zero")
        raise CliError(str(exc))
    screening = None if args.no_screening else (args.screening_size or "auto")
    cfg = SelectorConfig(
        s_max=args.s_max if args.s_max is not None else "auto",
        k_max=args.k_max, tau=args.tau, screening_size=screening,
    )
    try:
        result = abess(data, cfg)
    except NumericalFailure as exc:
        raise CliError(f"numerical failure at every support size: {exc}", EXIT_NUMERICAL)
    except InvalidInputError as exc:
        raise CliError(str(exc))

    def raw(coef):
        return data.to_raw_scale(coef)

    chosen = raw(result.selected)
    support = [int(j) for j in np.flatnonzero(chosen.beta)]
    path = []
    for f in result.per_size:
        entry = {
            "size": f.size,
            "gic": None if math.isinf(f.gic) else f.gic,
            "loss": None if math.isinf(f.loss) else f.loss,
            "support": [names[j] for j in f.active] if not f.failed else None,
            "splicing_iters": f.splicing_iters,
            "converged": f.converged,
            "failed": f.failed,
        }
        path.append(entry)
    doc = {
        "family": args.family,
        "n": n,
        "p": p,
        "selected_size": result.selected_size,
        "support": [names[j] for j in support],
        "coefficients": {names[j]: float(chosen.beta[j]) for j in support},
        "intercept": chosen.intercept,
        "gic_path": path,
        "diagnostics": {
            "s_max": len(result.per_size),
            "k_max": args.k_max,
            "tau": args.tau,
            "screening_size": screening,
            "converged": result.selected_fit.converged,
            "failed_sizes": [f.size for f in result.per_size if f.failed],
            "col_scale": {names[j]: float(data.col_scale[j]) for j in range(p)},
        },
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        if not args.quiet:
            print(f"selected {doc['support']} -> {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_scalar(text):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [_parse_scalar(t) for t in text.split(",") if t.strip()]
    return text


def load_config(path) -> dict:
    """Read a JSON document or a flat ``key = value`` file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            doc[key.strip()] = _parse_scalar(value)
    if not isinstance(doc, dict):
        raise CliError(f"config {path} must be a mapping")
    unknown = set(doc) - set(config_fields()) - {"preset"}
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    return doc


def simulate_command(args) -> int:
    overrides = {}
    for key in ("replications", "seed", "s_max", "k_max", "tau"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if args.n_grid is not None:
        overrides["n_grid"] = args.n_grid
    if args.timing:
        overrides["record_runtime"] = True
    try:
        if args.preset is not None:
            cfg = preset(args.preset, **overrides)
        else:
            doc = load_config(args.config)
            base = doc.pop("preset", None)
            doc.update(overrides)
            if base is not None:
                cfg = preset(base, **doc)
            else:
                doc.setdefault("name", os.path.splitext(os.path.basename(args.config))[0])
                cfg = ExperimentConfig(**doc)
    except (InvalidInputError, TypeError) as exc:
        raise CliError(f"invalid configuration: {exc}")
    rows = run_experiment(cfg, output_dir=args.output_dir, threads=args.threads)
    if not args.quiet:
        exact = np.mean([r.exact for r in rows])
        print(f"{cfg.name}: {len(rows)} replications, exact recovery {exact:.3f}, "
              f"CSV files in {args.output_dir}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = fit_command if args.command == "fit" else simulate_command
    try:
        return handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
