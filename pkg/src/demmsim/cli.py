"""Experiment runner: layer sweeps and single GEMMs on engines and baselines.

Emits one report row per (layer x engine) with cycle breakdowns, utilization
and oracle-verification status, as versioned CSV or JSON.  Engine outputs are
checked against the exact dense reference during the run unless verification
is explicitly disabled, in which case the report says so.

Exit codes: 0 success, 2 bad flags or unreadable/invalid input files,
3 dimension mismatch, 4 oracle verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import (
    OUTPUT_STATIONARY,
    WEIGHT_STATIONARY,
    SystolicConfig,
    systolic_cycles,
)
from .engine import CycleReport, DemmConfig, PipelineTrace, reconfigure_density_check, run_gemm
from .formats import SparsityPattern, unpack
from .gemm import DimensionMismatchError, GemmDims, dense_matmul
from .workloads import (
    LayerFileError,
    LayerSpec,
    load_layer_file,
    packaged_layer_file,
    synthesize_problem,
)

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "schema_version", "workload", "layer_index", "layer_name", "engine",
    "pattern", "pattern_supported", "r", "kdim", "cdim",
    "preload_cycles", "compute_cycles", "drain_cycles", "total_cycles",
    "issued_row_ops", "mac_utilization", "useful_macs",
    "verified", "approximate_baseline", "seed",
]

REPORT_CAVEATS = [
    "Baseline rows come from generic analytical systolic models, not from any "
    "published accelerator's internals; compare trends, not absolute deltas.",
    "Engine boundary bandwidth (non-zero/address feed, output collection) is "
    "assumed ideal.",
    "Partial sums across k-tiles accumulate at zero modeled cycle cost.",
    "All figures are raw cycle counts, unscaled by clock frequency.",
]

_BASELINE_KINDS = {
    "dense-ws": (WEIGHT_STATIONARY, False),
    "dense-os": (OUTPUT_STATIONARY, False),
    "sparse-ws": (WEIGHT_STATIONARY, True),
    "sparse-os": (OUTPUT_STATIONARY, True),
}


def _parse_engine(text: str) -> DemmConfig:
    kind, _, rest = text.partition(":")
    if kind != "demm" or not rest:
        raise ValueError(f"bad engine {text!r}, expected demm:N,M,C,k")
    return DemmConfig.parse(rest)


def _parse_baseline(text: str) -> tuple[str, str, int, int]:
    kind, _, shape = text.partition(":")
    if kind not in _BASELINE_KINDS or not shape:
        raise ValueError(
            f"bad baseline {text!r}, expected <{'|'.join(_BASELINE_KINDS)}>:<RxC>"
        )
    try:
        rows, cols = (int(part) for part in shape.lower().split("x"))
    except ValueError as exc:
        raise ValueError(f"bad baseline shape {shape!r}, expected RxC") from exc
    return text, kind, rows, cols


def _parse_overflow(text: str) -> float:
    key, _, value = text.partition("=")
    if key != "mean" or not value:
        raise ValueError(f"bad overflow spec {text!r}, expected mean=<float>")
    mean = float(value)
    if mean < 0:
        raise ValueError("overflow mean must be non-negative")
    return mean


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="demmsim",
        description="Simulate sparse-dense GEMM workloads on the decoupled "
        "engine and on analytical systolic baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_text in (
        ("run", cmd_run, "run one workload at one sparsity pattern"),
        ("sweep-density", cmd_sweep_density,
         "run one workload at each listed pattern, reporting per-pattern totals"),
    ):
        p = sub.add_parser(name, help=help_text)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--layers", metavar="FILE",
                         help="layer shape file (path, or shipped name like resnet50)")
        src.add_argument("--gemm", metavar="RxKxC", type=GemmDims.parse,
                         help="single synthetic GEMM problem")
        p.add_argument("--pattern", metavar="N:M", action="append", default=[],
                       type=SparsityPattern.parse,
                       help="weight sparsity pattern (repeatable for sweeps)")
        p.add_argument("--engine", metavar="demm:N,M,C,k", action="append", default=[],
                       type=_parse_engine,
                       help="engine config (repeatable; default demm:8,128,64,8)")
        p.add_argument("--baseline", metavar="KIND:RxC", action="append", default=[],
                       type=_parse_baseline,
                       help="analytical baseline, kind one of "
                            f"{', '.join(_BASELINE_KINDS)} (repeatable)")
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--trace", metavar="FILE",
                       help="dump per-cycle engine traces (small runs only)")
        verify = p.add_mutually_exclusive_group()
        verify.add_argument("--verify", dest="verify", action="store_true",
                            default=True, help="check engine outputs against the "
                            "dense oracle (default)")
        verify.add_argument("--no-verify", dest="verify", action="store_false",
                            help="skip oracle checks; rows report verified=skipped")
        p.add_argument("--overflow-dist", metavar="mean=F", type=_parse_overflow,
                       dest="overflow_mean", default=None,
                       help="emulate unstructured pruning: Poisson non-zeros per "
                            "block with this mean instead of exact-N:M weights")
        p.add_argument("--batch", type=int, default=1,
                       help="streamed dimension for fc layers")
        p.set_defaults(func=fn)
    return parser


def _resolve_workload(args) -> tuple[str, list[LayerSpec], int]:
    """Workload name, layer list, and the batch to lower fc layers with."""
    if args.gemm is not None:
        dims = args.gemm
        spec = LayerSpec(name=f"gemm:{dims}", kind="fc",
                         in_channels=dims.kdim, out_channels=dims.r)
        return "gemm", [spec], dims.cdim
    path = Path(args.layers)
    if not path.is_file():
        packaged = packaged_layer_file(args.layers)
        if packaged is None:
            raise LayerFileError(f"layer file not found: {args.layers}")
        path = packaged
    return path.stem, load_layer_file(path), args.batch


def _simulate(
    workload: str,
    specs: list[LayerSpec],
    pattern: SparsityPattern,
    args,
    batch: int,
    traces: list[tuple[str, PipelineTrace]] | None,
) -> list[dict]:
    engines = args.engine or [DemmConfig(8, 128, 64, 8)]
    rows = []
    for index, spec in enumerate(specs):
        problem = synthesize_problem(spec, pattern, args.seed, batch,
                                     args.overflow_mean)
        oracle = dense_matmul(unpack(problem.a), problem.b) if args.verify else None
        base = {
            "schema_version": SCHEMA_VERSION,
            "workload": workload,
            "layer_index": index,
            "layer_name": spec.name,
            "pattern": str(pattern),
            "r": problem.dims.r,
            "kdim": problem.dims.kdim,
            "cdim": problem.dims.cdim,
            "seed": args.seed,
        }
        for cfg in engines:
            trace = PipelineTrace() if traces is not None else None
            out, report = run_gemm(problem.a, problem.b, cfg, trace)
            if trace is not None:
                traces.append((f"{workload}/{spec.name}/{cfg}", trace))
            if oracle is None:
                verified = "skipped"
            else:
                verified = "true" if np.array_equal(out, oracle) else "false"
            supported = (None if args.overflow_mean is not None
                         else reconfigure_density_check(cfg, pattern))
            rows.append(base | _report_fields(report) | {
                "engine": str(cfg),
                "pattern_supported": supported,
                "verified": verified,
                "approximate_baseline": False,
            })
        for label, kind, pe_rows, pe_cols in args.baseline:
            speedup = pattern.m / pattern.n if _BASELINE_KINDS[kind][1] else 1.0
            cfg = SystolicConfig(pe_rows, pe_cols, _BASELINE_KINDS[kind][0], speedup)
            report = systolic_cycles(problem.dims, cfg)
            rows.append(base | _report_fields(report) | {
                "engine": label,
                "pattern_supported": None,
                "verified": None,
                "approximate_baseline": True,
            })
    return rows


def _report_fields(report: CycleReport) -> dict:
    return {
        "preload_cycles": report.preload_cycles,
        "compute_cycles": report.compute_cycles,
        "drain_cycles": report.drain_cycles,
        "total_cycles": report.total_cycles,
        "issued_row_ops": report.issued_row_ops,
        "useful_macs": report.useful_macs,
        "mac_utilization": report.mac_utilization,
    }


def _summarize(rows: list[dict]) -> list[dict]:
    """One row per engine, summed over layers (used by sweep-density)."""
    order: list[str] = []
    groups: dict[str, list[dict]] = {}
    for row in rows:
        if row["engine"] not in groups:
            order.append(row["engine"])
            groups[row["engine"]] = []
        groups[row["engine"]].append(row)
    summaries = []
    for engine in order:
        members = groups[engine]
        first = members[0]
        totals = {key: sum(m[key] for m in members)
                  for key in ("preload_cycles", "compute_cycles", "drain_cycles",
                              "total_cycles", "issued_row_ops", "useful_macs")}
        verdicts = {m["verified"] for m in members}
        if verdicts == {None}:
            verified = None
        elif "false" in verdicts:
            verified = "false"
        elif verdicts == {"true"}:
            verified = "true"
        else:
            verified = "skipped"
        if first["approximate_baseline"]:
            _, kind, pe_rows, pe_cols = _parse_baseline(engine)
            macs = pe_rows * pe_cols
        else:
            macs = _parse_engine(engine).multipliers
        summaries.append({
            "schema_version": SCHEMA_VERSION,
            "workload": first["workload"],
            "layer_index": None,
            "layer_name": "all-layers",
            "engine": engine,
            "pattern": first["pattern"],
            "pattern_supported": first["pattern_supported"],
            "r": None, "kdim": None, "cdim": None,
            **totals,
            "mac_utilization": totals["useful_macs"] / (totals["total_cycles"] * macs),
            "verified": verified,
            "approximate_baseline": first["approximate_baseline"],
            "seed": first["seed"],
        })
    return summaries


def _write_reports(rows: list[dict], args, command: str) -> Path:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        path = out_dir / "results.csv"
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow({col: _csv_cell(row[col]) for col in CSV_COLUMNS})
    else:
        path = out_dir / "results.json"
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "seed": args.seed,
            "verify": args.verify,
            "overflow_mean": args.overflow_mean,
            "caveats": REPORT_CAVEATS,
            "rows": rows,
        }
        path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _write_traces(traces: list[tuple[str, PipelineTrace]], path: str) -> None:
    with open(path, "w") as fh:
        for label, trace in traces:
            fh.write(f"run={label}\n")
            fh.write(trace.dump())


def _finish(rows: list[dict], args, command: str,
            traces: list[tuple[str, PipelineTrace]] | None) -> int:
    report_path = _write_reports(rows, args, command)
    if traces is not None:
        _write_traces(traces, args.trace)
    failed = [row for row in rows if row["verified"] == "false"]
    for row in failed:
        print(f"VERIFICATION FAILED: {row['layer_name']} on {row['engine']}",
              file=sys.stderr)
    print(f"wrote {len(rows)} rows to {report_path}")
    return 4 if failed else 0


def cmd_run(args) -> int:
    if len(args.pattern) != 1:
        print("run needs exactly one --pattern (use sweep-density for several)",
              file=sys.stderr)
        return 2
    workload, specs, batch = _resolve_workload(args)
    traces = [] if args.trace else None
    rows = _simulate(workload, specs, args.pattern[0], args, batch, traces)
    return _finish(rows, args, "run", traces)


def cmd_sweep_density(args) -> int:
    if not args.pattern:
        print("sweep-density needs at least one --pattern", file=sys.stderr)
        return 2
    workload, specs, batch = _resolve_workload(args)
    traces = [] if args.trace else None
    rows = []
    for pattern in args.pattern:
        rows.extend(_summarize(
            _simulate(workload, specs, pattern, args, batch, traces)))
    return _finish(rows, args, "sweep-density", traces)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LayerFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DimensionMismatchError as exc:
        print(f"error: dimension mismatch: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
