"""Command-line interface: ``metricdcov <command> [options]``."""

from __future__ import annotations

import argparse
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import inference
from .centering import double_center
from .dataio import (
    CATEGORICAL,
    NUMERIC,
    DatasetSpec,
    IngestError,
    dumps,
    ingest,
    make_report,
    read_counts_csv,
)
from .dcov import (
    KERNEL6_MAX_N,
    DegenerateMarginalError,
    dcov_definition_oracle,
    dcov_kernel6_oracle,
    dcov_stats,
    dcov_tensor_oracle,
)
from .metrics import MetricError, MetricSpec, distance_matrix, parse_metric
from .negtype import NotNegativeTypeError, embed_sample, negtype_check

# metric families known to be of negative type, before any power transform
KNOWN_NEGATIVE_TYPE = ("euclidean", "discrete")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _columns(text: Optional[str]) -> list[str]:
    if not text:
        return []
    return [c.strip() for c in text.split(",") if c.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--metric-x", default="euclidean",
                   help="euclidean | minkowski:p | chebyshev | discrete | precomputed:path")
    g.add_argument("--metric-y", default="euclidean")
    g.add_argument("--power", type=float, default=1.0, help="snowflake exponent r in (0, 1]")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--output", choices=("json", "text"), default="json")
    g.add_argument("--timing", action="store_true", help="add wall-clock runtime to the report")

    data = _Parser(add_help=False)
    d = data.add_argument_group("data")
    d.add_argument("--data", help="CSV file with a header row")
    d.add_argument("--x", dest="x_columns", help="comma-separated x columns")
    d.add_argument("--y", dest="y_columns", help="comma-separated y columns")
    d.add_argument("--x-type", choices=(NUMERIC, CATEGORICAL), default=NUMERIC)
    d.add_argument("--y-type", choices=(NUMERIC, CATEGORICAL), default=NUMERIC)

    parser = _Parser(prog="metricdcov", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("dcov", parents=[common, data], help="distance covariance and correlation")
    p.add_argument("--oracles", action="store_true", help="also evaluate the independent oracles")

    p = sub.add_parser("test", parents=[common, data], help="test of independence")
    p.add_argument("--method", choices=("permutation", "asymptotic"), default="permutation")
    p.add_argument("--permutations", type=int, default=999)
    p.add_argument("--mc-draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("diagnose", parents=[common, data], help="negative-type check and embedding")
    p.add_argument("--side", choices=("x", "y"), default="x")
    p.add_argument("--tol", type=float, default=1e-9)

    p = sub.add_parser("categorical", parents=[common, data], help="contingency-table closed forms")
    p.add_argument("--table", help="contingency CSV: header ',y1,y2..', rows 'x,count,..'")

    p = sub.add_parser("calibrate", parents=[common], help="rejection-rate experiment")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--generator", choices=sorted(inference.GENERATORS), default="independent")
    p.add_argument("--method", choices=("permutation", "asymptotic"), default="permutation")
    p.add_argument("--permutations", type=int, default=199)
    p.add_argument("--mc-draws", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("demo-covdist", parents=[common],
                       help="dependent variables whose distances are uncorrelated")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--permutations", type=int, default=199)
    p.add_argument("--seed", type=int, default=0)
    return parser


# --------------------------------------------------------------------------


def _metrics(args) -> tuple[MetricSpec, MetricSpec]:
    return parse_metric(args.metric_x, args.power), parse_metric(args.metric_y, args.power)


def _dataset(args, mx: MetricSpec, my: MetricSpec) -> DatasetSpec:
    return DatasetSpec(
        path=args.data,
        x_columns=_columns(args.x_columns),
        y_columns=_columns(args.y_columns),
        x_type=args.x_type,
        y_type=args.y_type,
        metric_x=mx,
        metric_y=my,
    )


def _config(args, mx: Optional[MetricSpec] = None, my: Optional[MetricSpec] = None) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("timing",)}
    if mx is not None:
        cfg["metric_x"] = mx.describe()
    if my is not None:
        cfg["metric_y"] = my.describe()
    return cfg


def _centered(args):
    mx, my = _metrics(args)
    x, y = ingest(_dataset(args, mx, my))
    Dx = distance_matrix(mx, x, args.threads)
    Dy = distance_matrix(my, y, args.threads)
    return mx, my, x, y, Dx, Dy


def _maybe_not_negative_type(spec: MetricSpec, D) -> bool:
    if spec.kind in KNOWN_NEGATIVE_TYPE or (spec.kind == "minkowski" and spec.p <= 2):
        return False
    return not negtype_check(D).is_negative_type


def cmd_dcov(args) -> tuple[dict, dict, list[str]]:
    mx, my, x, y, Dx, Dy = _centered(args)
    Kc, Lc = double_center(Dx), double_center(Dy)
    r = dcov_stats(Kc, Lc)
    results = {
        "n": r.n,
        "dcov": r.dcov,
        "dvar_x": r.dvar_x,
        "dvar_y": r.dvar_y,
        "dcor": r.dcor,
        "energy_x": Kc.grand_mean,
        "energy_y": Lc.grand_mean,
    }
    if args.oracles:
        oracles = {"definition": dcov_definition_oracle(Dx, Dy)}
        if r.n <= KERNEL6_MAX_N:
            oracles["kernel6"] = dcov_kernel6_oracle(x, y, mx, my)
        try:
            oracles["tensor"] = dcov_tensor_oracle(embed_sample(Dx), embed_sample(Dy))
        except NotNegativeTypeError:
            oracles["tensor"] = None
        results["oracles"] = oracles
    return _config(args, mx, my), results, []


def cmd_test(args) -> tuple[dict, dict, list[str]]:
    mx, my, x, y, Dx, Dy = _centered(args)
    Kc, Lc = double_center(Dx), double_center(Dy)
    if args.method == "permutation":
        res = inference.permutation_test(Kc, Lc, args.permutations, args.seed, args.threads)
    else:
        res = inference.asymptotic_test(Kc, Lc, args.mc_draws, args.seed)
    warnings = []
    flagged = [s for s, spec, D in (("x", mx, Dx), ("y", my, Dy)) if _maybe_not_negative_type(spec, D)]
    if flagged:
        warnings.append(
            f"metric on {'/'.join(flagged)} is not of negative type on this sample; "
            "dcov may be negative and the test need not be consistent "
            f"(two-sided p-value {res.p_value_two_sided:.4g})"
        )
    results = res.to_dict()
    results["reject"] = res.p_value <= args.alpha
    results["alpha"] = args.alpha
    results["not_negative_type"] = flagged
    return _config(args, mx, my), results, warnings


def cmd_diagnose(args) -> tuple[dict, dict, list[str]]:
    mx, my, x, y, Dx, Dy = _centered(args)
    D = Dx if args.side == "x" else Dy
    report = negtype_check(D, args.tol)
    results = {"side": args.side, "n": D.n, **report.to_dict()}
    if report.is_negative_type:
        emb = embed_sample(D, args.tol)
        err = np.abs(emb.squared_distances() - D.entries)
        results["embedding"] = {
            "dim": emb.dim,
            "max_abs_error": float(err.max()),
            "coordinates": emb.coordinates,
        }
    return _config(args, mx, my), results, []


def cmd_categorical(args) -> tuple[dict, dict, list[str]]:
    if args.table:
        xcat, ycat, counts = read_counts_csv(args.table)
        table = inference.ContingencyTable(xcat, ycat, counts)
    else:
        if not args.data:
            raise IngestError("categorical needs --table or --data with --x/--y columns")
        args.x_type = args.y_type = CATEGORICAL
        spec = parse_metric("discrete")
        x, y = ingest(_dataset(args, spec, spec))
        table = inference.ContingencyTable.from_labels(list(x.points), list(y.points))
    closed = inference.categorical_dcov(table)
    try:
        chi2 = inference.pearson_chisq(table)
    except ValueError:
        chi2 = None
    results = {
        "n": table.n,
        "x_categories": list(table.x_categories),
        "y_categories": list(table.y_categories),
        "counts": table.counts,
        "dcov": closed.dcov,
        "statistic": closed.statistic,
        "pearson_chi2": chi2,
    }
    return _config(args), results, []


def cmd_calibrate(args) -> tuple[dict, dict, list[str]]:
    rep = inference.calibrate(
        generator=args.generator,
        n=args.n,
        trials=args.trials,
        alpha=args.alpha,
        method=args.method,
        seed=args.seed,
        permutations=args.permutations,
        mc_draws=args.mc_draws,
        workers=args.threads,
    )
    return _config(args), rep.to_dict(), []


def cmd_demo_covdist(args) -> tuple[dict, dict, list[str]]:
    rep = inference.uncorrelated_distances_demo(args.n, args.seed, args.permutations)
    return _config(args), rep.to_dict(), []


COMMANDS = {
    "dcov": cmd_dcov,
    "test": cmd_test,
    "diagnose": cmd_diagnose,
    "categorical": cmd_categorical,
    "calibrate": cmd_calibrate,
    "demo-covdist": cmd_demo_covdist,
}


def _text(report: dict) -> str:
    lines = [f"{report['command']}"]
    res = report["results"]
    if report["command"] == "test":
        lines.append(f"  normalized statistic (null expectation 1): {res['statistic']:.6g}")
        lines.append(f"  p-value ({res['method']}): {res['p_value']:.6g}")
        lines.append(f"  dcov: {res['raw_dcov']:.6g}")
        lines.append(f"  reject at alpha={res['alpha']:g}: {res['reject']}")
    else:
        for k, v in res.items():
            if isinstance(v, list) and len(v) > 12:
                v = f"[{len(v)} values]"
            if isinstance(v, dict):
                v = {kk: (f"[{len(vv)} values]" if isinstance(vv, list) else vv) for kk, vv in v.items()}
            lines.append(f"  {k}: {v}")
    lines.append(f"  seed: {report['seed']}")
    for w in report.get("warnings", []):
        lines.append(f"  warning: {w}")
    return "\n".join(lines) + "\n"


def run_command(argv: Sequence[str], stdout=None, stderr=None) -> tuple[int, Optional[dict]]:
    """Run one CLI invocation; returns the exit code and the report (if any)."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return 2, None
    except SystemExit as exc:  # --help
        return int(exc.code or 0), None
    if args.command is None:
        stderr.write(parser.format_help())
        return 2, None
    start = time.perf_counter()
    try:
        config, results, warnings = COMMANDS[args.command](args)
    except (IngestError, MetricError, DegenerateMarginalError, NotNegativeTypeError, ValueError, OSError) as exc:
        stderr.write(f"metricdcov {args.command}: error: {exc}\n")
        return 1, None
    runtime = time.perf_counter() - start if args.timing else None
    report = make_report(args.command, config, results, seed=getattr(args, "seed", None), runtime=runtime)
    if warnings:
        report["warnings"] = warnings
        for w in warnings:
            stderr.write(f"warning: {w}\n")
    stdout.write(dumps(report) if args.output == "json" else _text(report))
    return 0, report


def main(argv: Optional[Sequence[str]] = None) -> int:
    code, _ = run_command(sys.argv[1:] if argv is None else argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
