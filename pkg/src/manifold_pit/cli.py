"""``simlab`` command-line interface.

Subcommands: ``simulate`` (the three studies), ``sample`` (exact draws from
a model), ``transform`` (apply a model's transform or its inverse),
``gof`` (fixed or fitted goodness of fit) and ``calibrate`` (Monte Carlo
null tables).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import models as M
from .errors import ManifoldPitError
from .geometry import real_to_shape, shape_to_real
from .gof import DEFAULT_TEST, gof_fitted, gof_fixed
from .seeding import derive_seed
from .simlab import SCENARIOS, StudyConfig, check_summary, records_csv, run_study, summary_json
from .transforms import build_transform
from .uniformity import STATISTICS, calibrate_null

FAMILY_SPACE = {
    "fisher": "sphere",
    "pn": "sphere",
    "acg": "projective",
    "matrix_fisher": "rotation",
    "md": "shape",
    "dirichlet": "simplex",
    "tangent_gaussian": "halfplane",
    "lognormal_radial": "halfplane",
}


# ---------------------------------------------------------------------------
# Parameters and models
# ---------------------------------------------------------------------------


def _floats(text):
    return np.array([float(v) for v in str(text).split(",")])


def parse_params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def model_from_params(family: str, params: dict):
    """Model for a family from ``key=value`` strings (vectors comma separated)."""
    if family == "fisher":
        return M.FisherModel(_floats(params.get("mu", "0,0,1")), float(params.get("kappa", 10)))
    if family == "pn":
        return M.ProjectedNormalModel(_floats(params.get("mean", "0,0,2.6")))
    if family == "acg":
        return M.AcgModel(_floats(params.get("A", "1,0,0,0,1,0,0,0,4")).reshape(3, 3))
    if family == "matrix_fisher":
        return M.MatrixFisherModel(_floats(params.get("M", "1,0,0,0,1,0,0,0,1")).reshape(3, 3),
                                   float(params.get("kappa", 2)))
    if family == "md":
        k = int(params.get("k", 5))
        if "mu" in params:
            mu = real_to_shape(_floats(params["mu"])[None])[0]
        else:
            from .geometry import landmarks_to_shape

            mu = landmarks_to_shape(M.regular_polygon(k)[None])[0]
        return M.MardiaDrydenModel(mu, float(params.get("kappa", 0.125)), k)
    if family == "dirichlet":
        return M.DirichletModel(_floats(params.get("alpha", "2,1,1")))
    if family == "tangent_gaussian":
        return M.TangentGaussianModel(_floats(params.get("cov", "1,0,0,1")).reshape(2, 2))
    if family == "lognormal_radial":
        return M.LogNormalRadialModel(float(params.get("mean_log", 0)), float(params.get("sd_log", 0.5)))
    raise ManifoldPitError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# Point I/O: one point per row, real coordinates
# ---------------------------------------------------------------------------


def points_to_rows(space: str, x) -> np.ndarray:
    if space == "shape":
        return shape_to_real(x)
    if space == "rotation":
        return np.asarray(x, dtype=float).reshape(len(x), 9)
    return np.asarray(x, dtype=float)


def rows_to_points(space: str, rows) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if space == "shape":
        return real_to_shape(rows)
    if space == "rotation":
        return rows.reshape(-1, 3, 3)
    return rows


def format_rows(rows, fmt: str) -> str:
    rows = np.asarray(rows, dtype=float)
    if fmt == "json":
        return json.dumps([[float(v) for v in r] for r in rows]) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    return buf.getvalue()


def read_rows(path: str) -> np.ndarray:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("["):
        return np.asarray(json.loads(text), dtype=float)
    return np.array([[float(v) for v in row] for row in csv.reader(io.StringIO(text)) if row])


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _report_text(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=1, sort_keys=True) + "\n"
    keys = sorted(report)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    w.writerow([report[k] for k in keys])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = StudyConfig(study=args.study, n=args.n, reps=args.reps, seed=args.seed, out=args.out,
                      B=args.B, pn_norm=args.pn_norm, workers=args.workers,
                      scenarios=tuple(v.strip() for v in args.scenarios.split(",")))
    result = run_study(cfg)
    if args.out is None:
        text = records_csv(result.records) if args.format == "csv" else summary_json(result.summary)
        sys.stdout.write(text)
    if args.check:
        problems = check_summary(result.summary)
        for p in problems:
            print(f"threshold violated: {p}", file=sys.stderr)
        if problems:
            return 2
    return 0


def cmd_sample(args) -> int:
    model = model_from_params(args.family, parse_params(args.param))
    x = M.sample(model, args.n, derive_seed(args.seed, 0))
    _emit(format_rows(points_to_rows(FAMILY_SPACE[args.family], x), args.format), args.out)
    return 0


def cmd_transform(args) -> int:
    model = model_from_params(args.family, parse_params(args.param))
    space = FAMILY_SPACE[args.family]
    x = rows_to_points(space, read_rows(args.input))
    T = build_transform(model, method=args.method)
    y = T.inverse(x) if args.inverse else T.forward(x)
    _emit(format_rows(points_to_rows(space, y), args.format), args.out)
    return 0


def cmd_gof(args) -> int:
    space = FAMILY_SPACE[args.family]
    x = rows_to_points(space, read_rows(args.input))
    test = args.test or DEFAULT_TEST[space]
    if args.fitted:
        if args.family not in ("fisher", "md"):
            raise ManifoldPitError("fitted mode supports the fisher and md families")
        rep = gof_fitted(x, "fisher" if args.family == "fisher" else "md", test, B=args.B,
                         seed=derive_seed(args.seed, 1))
    else:
        rep = gof_fixed(x, model_from_params(args.family, parse_params(args.param)), test)
    report = {"family": args.family, "test": test, "n": rep.n, "statistic": rep.statistic,
              "p_value": rep.p_value, "reference": rep.reference, "B": args.B, "seed": args.seed}
    _emit(_report_text(report, args.format), args.out)
    return 0


def cmd_calibrate(args) -> int:
    table = calibrate_null(args.test, args.n, args.reps, args.seed)
    _emit(table.to_json(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a simulation study")
    p.add_argument("--study", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default=None, help="output directory (summary to stdout if omitted)")
    p.add_argument("--B", type=int, default=0, help="bootstrap replicates for the fitted scenario")
    p.add_argument("--pn-norm", type=float, default=StudyConfig.pn_norm)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--scenarios", default=",".join(SCENARIOS), help="comma-separated subset of true,fitted,alternative")
    p.add_argument("--check", action="store_true", help="exit with status 2 if a threshold is violated")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_simulate)

    def model_args(q):
        q.add_argument("--family", required=True, choices=sorted(FAMILY_SPACE))
        q.add_argument("--param", action="append", metavar="KEY=VALUE")
        q.add_argument("--format", choices=("csv", "json"), default="csv")
        q.add_argument("--out", default=None)

    p = sub.add_parser("sample", help="draw exact samples from a model")
    model_args(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("transform", help="apply a model's transform to points")
    model_args(p)
    p.add_argument("--input", required=True, help="CSV or JSON rows, '-' for stdin")
    p.add_argument("--inverse", action="store_true")
    p.add_argument("--method", default="default", help="simplex construction: radial or exp")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("gof", help="goodness of fit of points to a model")
    model_args(p)
    p.add_argument("--input", required=True)
    p.add_argument("--test", choices=sorted(STATISTICS), default=None)
    p.add_argument("--fitted", action="store_true", help="fit the family to the data first")
    p.add_argument("--B", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("calibrate", help="Monte Carlo null quantile table")
    p.add_argument("--test", required=True, choices=sorted(STATISTICS))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ManifoldPitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
