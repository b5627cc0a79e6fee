"""Command-line entry point: ``pairedlab <subcommand> ...``.

Every command is deterministic given its flags and ``--seed`` (default from
``$PAIREDLAB_SEED``). Outputs are UTF-8 CSV (with a leading ``# schema``
comment line) or JSON.
"""

from __future__ import annotations

import argparse
import dataclasses
import csv
import io
import json
import sys
from pathlib import Path

from . import calibration as cal
from . import distributions as dist
from . import engine
from .errors import PairedLabError, ParameterDomainError
from .ingest import diagnose_matrix, diagnostics_to_csv, load_score_matrix
from .rng import RandomStream, default_seed
from .significance import WilcoxonOptions

DESK_REPLICATES = 10_000
GRIDS = ("all", "asymmetric", "heavy", "light", "discrete", "demo-table1")


def _emit(text: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _replicates(args, full: int, desk: int = DESK_REPLICATES) -> int:
    if args.replicates is not None:
        return args.replicates
    return desk if args.desk else full


def _wilcoxon_options(args) -> WilcoxonOptions:
    return WilcoxonOptions(args.zero_policy, args.exact_threshold, not args.no_continuity_correction)


def _families(args) -> dict | None:
    if not args.family:
        return None
    if args.grid in ("all", "demo-table1"):
        raise ParameterDomainError("--family needs a single-dimension --grid")
    dims = cal.DIMENSIONS if args.grid == "all" else (args.grid,)
    return {d: tuple(args.family) for d in dims}


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    replicates = _replicates(args, 100_000)
    config = engine.SimulationConfig(
        replicates=replicates, alpha=args.alpha, seed=args.seed, tests=tuple(args.tests),
        wilcoxon_options=_wilcoxon_options(args), workers=args.workers,
    )
    if args.grid == "demo-table1":
        cells = engine.demo_table1_cells(args.n)
    else:
        dims = cal.DIMENSIONS if args.grid == "all" else (args.grid,)
        cells = engine.grid_cells(dims, _families(args), args.n, ibb_policy=args.ibb_policy)
    report = engine.run_cells(engine.SimulationConfig(
        cells, config.replicates, config.alpha, config.seed, config.tests,
        config.wilcoxon_options, config.workers,
    ))
    if args.pool:
        report = engine.with_pooled_rows(report)
    _emit(report.to_json() + "\n" if args.format == "json" else report.to_csv(), args.output)
    if args.table:
        print(report.table(), file=sys.stderr)
    return 0


def _clt_spec(args) -> dist.DistributionSpec:
    if args.spec:
        return dist.spec_from_config(Path(args.spec).read_text(encoding="utf-8"))
    presets = {
        "normal": lambda: cal.standardize(dist.normal(), 0.0, 1.0),
        "asymmetric": lambda: cal.calibrate_skewness("tgh", args.target or 3.0, sd=1.0),
        "heavy": lambda: cal.calibrate_tails("sgn", args.target or 15.0, sd=1.0),
        "discrete": lambda: cal.calibrate_ibb(dist.ibb_support("RR", int(args.target or 10))),
        "multimodal": lambda: cal.standardize(dist.bimodal(args.target or 2.0), 0.0, 1.0),
    }
    return presets[args.preset]()


def cmd_clt(args) -> int:
    spec = _clt_spec(args)
    replicates = _replicates(args, 1_000_000, 100_000)
    stream = RandomStream(args.seed)
    summary = io.StringIO()
    summary.write("# pairedlab clt v1\n")
    w = csv.writer(summary, lineterminator="\n")
    w.writerow(["n", "replicates", "degenerate", "ks_distance", "left_tail", "right_tail", "spec"])
    outdir = Path(args.output) if args.output not in (None, "-") else None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
    results = {}
    for i, n in enumerate(args.n):
        tsd = engine.t_sampling_distribution(spec, n, replicates, stream.child(i))
        left, right = tsd.tail_masses(args.alpha)
        results[n] = tsd
        w.writerow([n, replicates, tsd.degenerate, f"{tsd.ks_distance:.6g}",
                    f"{left:.6g}", f"{right:.6g}", spec.describe()])
        if outdir is not None:
            edges, counts = tsd.histogram(args.bins, tuple(args.range))
            (outdir / f"clt_n{n}.csv").write_text(
                engine.histogram_csv(edges, counts, f"pairedlab clt histogram n={n} {spec.describe()}"),
                encoding="utf-8",
            )
    if args.format == "json":
        text = json.dumps({
            "schema": "pairedlab.clt/1", "spec": spec.describe(),
            "rows": [{"n": n, "replicates": replicates, "degenerate": r.degenerate,
                      "ks_distance": r.ks_distance} for n, r in results.items()],
        }, indent=2) + "\n"
    else:
        text = summary.getvalue()
    if outdir is not None:
        (outdir / ("clt_ks.json" if args.format == "json" else "clt_ks.csv")).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_moments_reference(args) -> int:
    replicates = _replicates(args, 100_000)
    stream = RandomStream(args.seed)
    rows = []
    for i, kappa in enumerate(args.kappa):
        ref = engine.symmetric_skewness_reference(kappa, args.n, replicates, stream.child(i), args.family)
        q = ref.quantiles()
        rows.append({"kappa": kappa, "n": args.n, "family": args.family, "replicates": replicates,
                     "mean": ref.mean, "sd": ref.sd,
                     **{f"q{p}": v for p, v in zip(("025", "25", "50", "75", "975"), q)}})
        if args.histogram_dir:
            out = Path(args.histogram_dir)
            out.mkdir(parents=True, exist_ok=True)
            edges, counts = ref.histogram()
            (out / f"skewness_kappa{kappa:g}_n{args.n}.csv").write_text(
                engine.histogram_csv(edges, counts, f"pairedlab skewness reference kappa={kappa:g}"),
                encoding="utf-8",
            )
    if args.format == "json":
        text = json.dumps({"schema": "pairedlab.moments-reference/1", "rows": rows}, indent=2) + "\n"
    else:
        buf = io.StringIO()
        buf.write("# pairedlab moments-reference v1\n")
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: f"{v:.6g}" if isinstance(v, float) else v for k, v in r.items()})
        text = buf.getvalue()
    _emit(text, args.output)
    return 0


def cmd_diagnose(args) -> int:
    matrix = load_score_matrix(args.scores, args.input_format)
    rows = diagnose_matrix(matrix, args.n, RandomStream(args.seed), args.resamples,
                           args.alpha, _wilcoxon_options(args), args.threshold)
    if args.format == "json":
        text = json.dumps({"schema": "pairedlab.diagnose/1", "rows": [r.row() for r in rows]},
                          indent=2) + "\n"
    else:
        text = diagnostics_to_csv(rows)
    _emit(text, args.output)
    return 0


def cmd_calibrate(args) -> int:
    dims = cal.DIMENSIONS if args.dimension == "all" else (args.dimension,)
    grid = cal.DepartureGrid()
    levels, failed = [], []
    for d in dims:
        families = tuple(args.family) if args.family else cal.DEFAULT_FAMILIES[d]
        for fam in families:
            for label, target in zip(grid.labels, grid.targets(d)):
                try:
                    levels += cal.calibrate_grid(d, (fam,), _single_level(grid, d, label, target),
                                                 ibb_policy=args.ibb_policy)
                except PairedLabError as exc:
                    failed.append(str(exc))
    text = cal.levels_to_json(levels) + "\n" if args.format == "json" else cal.levels_to_csv(levels)
    _emit(text, args.output)
    for msg in failed:
        print(f"pairedlab calibrate: {msg}", file=sys.stderr)
    return 1 if failed else 0


def _single_level(grid: cal.DepartureGrid, dimension: str, label: str, target) -> cal.DepartureGrid:
    field = {"asymmetric": "asymmetry", "heavy": "heavy_tails",
             "light": "light_tails", "discrete": "discreteness"}[dimension]
    return dataclasses.replace(grid, labels=(label,), **{field: (target,)})


def cmd_support(args) -> int:
    support = dist.ibb_support(args.metric, args.k)
    if args.format == "json":
        text = json.dumps({"schema": "pairedlab.support/1", "metric": support.metric.value,
                           "k": support.k, "size": len(support), "values": list(support.values)}) + "\n"
    else:
        text = f"# pairedlab support v1 metric={support.metric.value} k={support.k} size={len(support)}\n"
        text += "value\n" + "".join(f"{v:.3f}\n" for v in support.values)
    _emit(text, args.output)
    return 0


# --------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                   help="64-bit seed (default: $PAIREDLAB_SEED or a fixed constant)")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("-o", "--output", default=None, help="output file (or directory for clt)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--desk", action="store_true", help="desk-scale preset (fewer replicates)")
    p.add_argument("--workers", type=int, default=1)


def _wilcoxon_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--zero-policy", choices=("drop", "pratt"), default="drop")
    p.add_argument("--exact-threshold", type=int, default=50)
    p.add_argument("--no-continuity-correction", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairedlab", description="Paired t / Wilcoxon Type I error laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Type I error rates over the departure grids")
    _common(p)
    _wilcoxon_flags(p)
    p.add_argument("--grid", choices=GRIDS, default="all")
    p.add_argument("--family", action="append",
                   help="family for the selected grid (agn, tgh, sgn, P, RR); repeatable")
    p.add_argument("--n", type=int, nargs="+", default=list(engine.SAMPLE_SIZES))
    p.add_argument("--tests", nargs="+", choices=engine.TESTS, default=list(engine.TESTS))
    p.add_argument("--ibb-policy", choices=("raise", "clip"), default="clip",
                   help="what to do when a P@k support cannot reach sd 0.22 (default: clip)")
    p.add_argument("--pool", action="store_true", help="append rows pooling families per dimension")
    p.add_argument("--table", action="store_true", help="also print a pivot table to stderr")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("clt", help="empirical t sampling distributions and KS distances")
    _common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--spec", help="key = value distribution config file")
    src.add_argument("--preset", choices=("normal", "asymmetric", "heavy", "discrete", "multimodal"),
                     default="asymmetric")
    p.add_argument("--target", type=float, default=None, help="preset level (gamma, kappa, k or delta)")
    p.add_argument("--n", type=int, nargs="+", default=[5, 10, 50])
    p.add_argument("--bins", type=int, default=120)
    p.add_argument("--range", type=float, nargs=2, default=[-6.0, 6.0])
    p.set_defaults(func=cmd_clt)

    p = sub.add_parser("moments-reference",
                       help="sample-skewness distribution under symmetric populations")
    _common(p)
    p.add_argument("--kappa", type=float, nargs="+", default=[0.0, 0.5, 1.5, 3.0, 5.0, 15.0, 30.0])
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--family", choices=("sgn", "tgh"), default="sgn")
    p.add_argument("--histogram-dir", default=None)
    p.set_defaults(func=cmd_moments_reference)

    p = sub.add_parser("diagnose", help="per-pair diagnostics for a score matrix")
    _common(p)
    _wilcoxon_flags(p)
    p.add_argument("scores", help="score matrix (wide CSV or long 'system topic score')")
    p.add_argument("--input-format", choices=("auto", "wide", "long"), default="auto")
    p.add_argument("--n", type=int, default=50, help="topics to resample to for the moments")
    p.add_argument("--resamples", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("calibrate", help="solved shape parameters for the departure grids")
    _common(p)
    p.add_argument("--dimension", choices=("all", *cal.DIMENSIONS), default="all")
    p.add_argument("--family", action="append")
    p.add_argument("--ibb-policy", choices=("raise", "clip"), default="raise")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("support", help="metric-difference support for IBB")
    _common(p)
    p.add_argument("--metric", default="P", help="P or RR")
    p.add_argument("--k", type=int, default=10)
    p.set_defaults(func=cmd_support)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = default_seed()
    if args.replicates is not None and args.replicates < 1:
        parser.error("--replicates must be >= 1")
    if not 0 < args.alpha < 1:
        parser.error("--alpha must be in (0, 1)")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except (PairedLabError, OSError, ValueError) as exc:
        print(f"pairedlab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
