"""Command-line interface.

Exit codes: 0 the command ran, 1 usage error, 2 data error, 3 the null was
rejected and ``--fail-on-reject`` was given.
"""

from __future__ import annotations

import argparse
import sys
import time
from importlib import metadata

import numpy as np

from . import critical
from .detector import CvSource, TestConfig, binary_segmentation, run_test
from .estimators import DegenerateSeriesError
from .harness import BREAK_KINDS, HETERO_CASES, PRESETS, ExperimentSpec, power_experiment, size_experiment
from .io import FORMATS, TRANSFORMS, DataError, IngestSpec, ReportDocument, emit_report, load_series
from .simulate import Break, ExplosiveOverflowError, RcaParams, RcaSimSpec, simulate_rca
from .stats import TrimSpec, WeightSpec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_REJECT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _loglog_weight() -> WeightSpec:
    def w(t):
        x = t * (1 - t)
        return np.sqrt(x * np.log(np.log(1 / x)))
    return WeightSpec.custom(w, name="loglog")


def _trim(text: str | None) -> TrimSpec | None:
    if text is None:
        return None
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        return TrimSpec(parts[0], parts[0])
    if len(parts) != 2:
        raise UsageError("--trim takes R or R1,R2")
    return TrimSpec(*parts)


def _break(text: str) -> Break:
    try:
        fields = dict(item.split("=", 1) for item in text.split(","))
        tau = float(fields.pop("tau"))
        opt = {k: float(fields.pop(k)) for k in ("beta", "scale1", "scale2") if k in fields}
        inclusive = fields.pop("inclusive", "0").lower() in ("1", "true", "yes")
    except (KeyError, ValueError):
        raise UsageError(f"cannot parse --break {text!r}; expected tau=F[,beta=B,...]") from None
    if fields:
        raise UsageError(f"unknown --break fields: {sorted(fields)}")
    return Break(tau, inclusive=inclusive, **opt)


def _config(args) -> TestConfig:
    trim = _trim(args.trim)
    weight = _loglog_weight() if args.weight == "loglog" else None
    statistic = "weighted" if weight is not None else critical.family_for_kappa(args.kappa)
    kappa = 0.0 if weight is not None else args.kappa
    kind = args.cv_source
    if kind is None:
        if weight is not None:
            kind = "fnl" if args.hetero else "simulated"
        else:
            kind = TestConfig.for_kappa(kappa, hetero=args.hetero).cv_source.kind
    reps = args.reps or (5000 if statistic == "darling-erdos" else 20_000)
    if kind == "cached" and not args.cv_cache:
        raise UsageError("--cv-source cached needs --cv-cache PATH")
    src = {"analytic": lambda: CvSource.analytic(),
           "simulated": lambda: CvSource.simulated(reps, args.grid, args.seed),
           "fnl": lambda: CvSource.fnl(args.L, args.seed),
           "cached": lambda: CvSource.cached(args.cv_cache, reps, args.grid, args.seed)}[kind]()
    return TestConfig(statistic, kappa, weight=weight, trim=trim, hetero=args.hetero,
                      alpha=args.alpha, cv_source=src)


def _add_test_flags(p):
    p.add_argument("input", help="CSV file")
    p.add_argument("--column", default="0", help="column name or zero-based index")
    p.add_argument("--transform", choices=TRANSFORMS, default="none")
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--trim", help="R or R1,R2 (default ceil((ln N)^2))")
    p.add_argument("--weight", choices=("power", "loglog"), default="power",
                   help="(t(1-t))^kappa, or (t(1-t) ln ln(1/(t(1-t))))^(1/2)")
    p.add_argument("--hetero", action="store_true", help="heteroskedasticity-robust statistic")
    p.add_argument("--cv-source", choices=("analytic", "simulated", "fnl", "cached"))
    p.add_argument("--cv-cache", help="critical value cache file")
    p.add_argument("--L", type=int, default=200, help="draws for fnl critical values")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--grid", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fail-on-reject", action="store_true")


def _add_output_flags(p, formats=FORMATS):
    p.add_argument("--format", choices=formats, default="structured")
    p.add_argument("--out", help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rcacusum", description="Weighted CUSUM change point tests for RCA(1) data")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate an RCA(1) path as CSV")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--sigma1-sq", type=float, default=0.01)
    p.add_argument("--sigma2-sq", type=float, default=0.5)
    p.add_argument("--break", dest="breaks", action="append", default=[],
                   help="tau=F[,beta=B][,scale1=S][,scale2=S][,inclusive=1]; repeatable")
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--y0", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("test", help="test one series for a change")
    _add_test_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("segment", help="binary segmentation")
    _add_test_flags(p)
    p.add_argument("--min-segment", type=int, default=20)
    _add_output_flags(p)

    p = sub.add_parser("cv", help="table of limit critical values")
    p.add_argument("--kappa", type=float, nargs="+", default=[0.0, 0.25, 0.45, 0.5, 0.75, 0.85, 1.0])
    p.add_argument("--alpha", type=float, nargs="+", default=[0.05, 0.10])
    p.add_argument("--reps", type=int, default=20_000)
    p.add_argument("--grid", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    _add_output_flags(p, ("structured", "delimited"))

    p = sub.add_parser("bench", help="Monte Carlo size or power study")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--beta", type=float, nargs="+")
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--kappa", type=float, nargs="+")
    p.add_argument("--delta", type=float, nargs="+")
    p.add_argument("--break-kind", choices=sorted(BREAK_KINDS), default="none")
    p.add_argument("--case", choices=sorted(HETERO_CASES), default="HomoHomo")
    p.add_argument("--homoskedastic", action="store_true", help="use the homoskedastic statistics")
    p.add_argument("--cv-mode", choices=("default", "asymptotic"), default="default")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--L", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _add_output_flags(p, ("structured", "delimited"))
    return parser


def _write(data: bytes, out: str | None):
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _meta(args, started: float) -> dict:
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    return {"version": version, "numpy": np.__version__, "args": vars(args),
            "elapsed_s": round(time.perf_counter() - started, 3)}


def _cmd_simulate(args) -> int:
    spec = RcaSimSpec(RcaParams(args.beta, args.sigma1_sq, args.sigma2_sq), args.n,
                      tuple(_break(b) for b in args.breaks), args.burn_in, args.y0, args.seed)
    series = simulate_rca(spec)
    lines = ["y"] + [repr(float(v)) for v in series.values]
    _write(("\n".join(lines) + "\n").encode(), args.out)
    return EXIT_OK


def _ingest(args):
    column = int(args.column) if args.column.lstrip("-").isdigit() else args.column
    return load_series(IngestSpec(args.input, column, args.transform))


def _cmd_test(args, started) -> int:
    config = _config(args)
    series = _ingest(args)
    report = run_test(series, config)
    doc = ReportDocument("test", config.to_dict(), [report], meta=_meta(args, started))
    doc.meta["series"] = {k: v for k, v in series.meta.items() if k != "dates"}
    _write(emit_report(doc, args.format), args.out)
    return EXIT_REJECT if args.fail_on_reject and report.reject else EXIT_OK


def _cmd_segment(args, started) -> int:
    config = _config(args)
    series = _ingest(args)
    found = binary_segmentation(series, config, args.min_segment)
    doc = ReportDocument("segment", config.to_dict(), changepoints=found, meta=_meta(args, started))
    dates = series.meta.get("dates")
    if dates:
        doc.meta["break_dates"] = [dates[k] for k in found.indices]
    _write(emit_report(doc, args.format), args.out)
    return EXIT_REJECT if args.fail_on_reject and len(found) else EXIT_OK


def _cmd_cv(args, started) -> int:
    table = critical.asymptotic_table(args.kappa, args.alpha, args.reps, args.grid, args.seed)
    entries = [{"family": f, "kappa": k, "alpha": a, "value": v,
                "provenance": table.provenance[(f, k, a)]} for (f, k, a), v in table.entries.items()]
    doc = ReportDocument("cv", {"reps": args.reps, "grid": args.grid, "seed": args.seed},
                         tables={"critical_values": {"entries": entries,
                                                     "delimited": table.to_delimited()}},
                         meta=_meta(args, started))
    _write(emit_report(doc, args.format), args.out)
    return EXIT_OK


def _cmd_bench(args, started) -> int:
    base = PRESETS[args.preset]() if args.preset else ExperimentSpec()
    fields = {"betas": args.beta, "n_list": args.n, "kappas": args.kappa, "deltas": args.delta}
    over = {k: tuple(v) for k, v in fields.items() if v is not None}
    spec = ExperimentSpec(**{**base.__dict__, **over, "break_kind": args.break_kind,
                             "hetero_case": args.case, "alpha": args.alpha, "reps": args.reps,
                             "L": args.L, "seed": args.seed, "workers": args.workers,
                             "cv_mode": args.cv_mode,
                             "variance_mode": "homoskedastic" if args.homoskedastic else "robust"})
    table = size_experiment(spec) if spec.break_kind == "none" else power_experiment(spec)
    doc = ReportDocument("bench", table.spec,
                         tables={"rejection": {**table.to_dict(), "delimited": table.to_delimited()}},
                         meta=_meta(args, started))
    _write(emit_report(doc, args.format), args.out)
    return EXIT_OK


def main(argv=None) -> int:
    started = time.perf_counter()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return _cmd_simulate(args)
        handler = {"test": _cmd_test, "segment": _cmd_segment, "cv": _cmd_cv, "bench": _cmd_bench}
        return handler[args.command](args, started)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DegenerateSeriesError, ExplosiveOverflowError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
