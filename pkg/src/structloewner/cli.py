"""Command line interface.

Exit codes: 0 on success, 2 for data errors (bad input files, invalid
assumptions), 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from .data import InterpolationData, tangential_sample
from .errors import DataError, NumericalError
from .harness import (
    BANDS,
    FrequencyGrid,
    bode_csv,
    bode_grid,
    driving_points,
    extra_points,
    error_metrics,
    run_experiment,
    write_text_atomic,
)
from .models import MODEL_NAMES, build_named_model
from .projection import FullModel
from .solver import realize
from .structure import StructuredRealization, parse_structure

EXIT_DATA = 2
EXIT_NUMERIC = 3


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from None


def _load_realization(path) -> StructuredRealization:
    d = _read_json(path)
    try:
        return FullModel.from_dict(d) if "N" in d else StructuredRealization.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path} is not a realization file: {exc}") from None


def _params(items):
    """``["N=50", "zeta=0.1"]`` -> ``{"N": 50, "zeta": 0.1}``."""
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise DataError(f"model parameter must be key=value, got {item!r}")
        try:
            num = float(val)
        except ValueError:
            raise DataError(f"model parameter {key} needs a number, got {val!r}") from None
        out[key] = int(num) if num.is_integer() and "." not in val and "e" not in val.lower() else num
    return out


def _named_model(name, params):
    try:
        return build_named_model(name, **params)
    except TypeError as exc:
        raise DataError(f"bad parameters for {name}: {exc}") from None


def _load_evaluator(spec, params=None):
    """A benchmark name or a realization/model JSON file."""
    if spec in MODEL_NAMES:
        return _named_model(spec, params or {})[0]
    return _load_realization(spec)


def _emit(text, out):
    if out:
        try:
            write_text_atomic(out, text)
        except OSError as exc:
            raise DataError(f"cannot write {out}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _band(text):
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise DataError(f"band must be 'a,b', got {text!r}") from None
    if not 0 < a < b:
        raise DataError("band needs 0 < a < b")
    return a, b


def cmd_model(args):
    _, model, _ = _named_model(args.name, _params(args.param))
    _emit(model.to_json(), args.out)


def cmd_sample(args):
    oracle = _load_evaluator(args.model, _params(args.param))
    if args.band:
        band = _band(args.band)
    elif args.model in BANDS:
        band = BANDS[args.model]
    else:
        raise DataError("--band is required for model files")
    mu, sigma = driving_points(band[0], band[1], args.n, conjugate=args.conjugate)
    if args.extra:
        w = extra_points(band[0], band[1], args.extra)
        pts = np.ravel([[1j * x, -1j * x] for x in w]) if args.conjugate else 1j * w
        if args.extra_side == "left":
            mu = np.concatenate([mu, pts])
        else:
            sigma = np.concatenate([sigma, pts])
    data = tangential_sample(oracle, mu, sigma, hermite="both" if args.hermite else False)
    _emit(data.to_json(), args.out)


def cmd_realize(args):
    data = InterpolationData.from_dict(_read_json(args.data))
    structure = parse_structure(args.structure)
    R = realize(
        data,
        structure,
        method=args.method,
        make_real=True if args.real else False,
        qf=args.qf,
        qg=args.qg,
        tol=args.tol,
    )
    _emit(R.to_json(), args.out)


def cmd_eval(args):
    R = _load_realization(args.rom)
    grid = FrequencyGrid.parse(args.grid)
    _emit(bode_csv(bode_grid(R, grid)), args.out)


def cmd_compare(args):
    a = _load_evaluator(args.a)
    b = _load_evaluator(args.b)
    grid = FrequencyGrid.parse(args.grid)
    rep = error_metrics(a, b, grid)
    d = rep.to_dict()
    d["grid"] = grid.to_text()
    _emit(json.dumps(d, indent=2), args.out)


def cmd_experiment(args):
    opts = {}
    if args.qf is not None:
        opts["qf"] = args.qf
    if args.qg is not None:
        opts["qg"] = args.qg
    if args.complex:
        opts["make_real"] = False
    if args.param:
        opts["model"] = _params(args.param)
    res = run_experiment(args.name, args.n, args.method, opts, out_dir=args.out_dir)
    print(json.dumps(res.summary(), indent=2))


def build_parser():
    p = argparse.ArgumentParser(prog="structloewner", description="Structured realizations from transfer-function samples.")
    sub = p.add_subparsers(dest="command", required=True)

    mo = sub.add_parser("model", help="export a benchmark model as JSON")
    mo.add_argument("--name", required=True, choices=MODEL_NAMES)
    mo.add_argument("--param", action="append", help="generator parameter key=value (repeatable)")
    mo.add_argument("--out")
    mo.set_defaults(func=cmd_model)

    s = sub.add_parser("sample", help="sample a benchmark or model file")
    s.add_argument("--model", required=True, help=f"one of {', '.join(MODEL_NAMES)} or a model JSON file")
    s.add_argument("--n", type=int, required=True, help="number of frequencies (even)")
    s.add_argument("--band", help="frequency band 'a,b' in rad/s")
    s.add_argument("--conjugate", action="store_true", help="add complex conjugate points")
    s.add_argument("--extra", type=int, default=0, help="extra frequencies for additional-point groups")
    s.add_argument("--extra-side", choices=["left", "right"], default="right")
    s.add_argument("--hermite", action="store_true", help="record derivative data on both sides")
    s.add_argument("--param", action="append", help="generator parameter key=value (repeatable)")
    s.add_argument("--out", help="output JSON (default stdout)")
    s.set_defaults(func=cmd_sample)

    r = sub.add_parser("realize", help="build a structured realization from data")
    r.add_argument("--data", required=True)
    r.add_argument("--structure", required=True, help='basis functions, e.g. "s,-1,-exp(-s)"')
    r.add_argument("--method", default="auto", choices=["auto", "k2", "additional", "hermite"])
    r.add_argument("--qf", type=int)
    r.add_argument("--qg", type=int)
    r.add_argument("--real", action="store_true", help="require a real realization")
    r.add_argument("--tol", type=float, default=1e-10, help="relative rank threshold for truncation")
    r.add_argument("--out")
    r.set_defaults(func=cmd_realize)

    e = sub.add_parser("eval", help="frequency response of a realization as CSV")
    e.add_argument("--rom", required=True)
    e.add_argument("--grid", required=True, help="kind:start:end:count, e.g. log:0.1:10:500")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="error between two realizations or models on a grid")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--grid", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    x = sub.add_parser("experiment", help="run a benchmark experiment")
    x.add_argument("--name", required=True, choices=sorted(BANDS))
    x.add_argument("--n", type=int, required=True)
    x.add_argument("--method", default="additional", choices=["loewner", "k2", "additional", "hermite", "auto"])
    x.add_argument("--qf", type=int)
    x.add_argument("--qg", type=int)
    x.add_argument("--param", action="append", help="generator parameter key=value (repeatable)")
    x.add_argument("--complex", action="store_true", help="skip the real-valued transformation")
    x.add_argument("--out-dir", help="directory for bode.csv, rom.json and report.json")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
