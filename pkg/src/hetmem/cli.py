"""``hetmem`` command line: classify, allocate, simulate, sweep, report.

Exit codes: 0 success, 2 usage, 3 bad configuration or input,
4 solver defect, 5 simulation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from ._numbers import fmt3
from .allocator import load_plan, plan_to_document
from .exceptions import ConfigError, InstanceTooLarge, SimulationError, SolverDefect
from .memspec import MemoryPool, bundled_pool, bundled_pool_names, load_pool
from .pipeline import ENGINES, allocate, classification_line_size, run, sweep, sweep_csv
from .workload import Workload, bundled_workload, bundled_workload_names, classify_sites, load_workload

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_SOLVER = 4
EXIT_SIMULATION = 5

DEFAULT_BASELINE = "cache_256kB"
DEFAULT_SWEEP_SIZES = (32, 64, 96, 128, 160)


def _read_path(text: str, what: str) -> str:
    try:
        return Path(text).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {text!r}: {exc.strerror}") from None


def resolve_pool(text: str) -> MemoryPool:
    """A pool document path, or the name of a bundled pool."""
    if Path(text).is_file():
        return load_pool(_read_path(text, "pool"), name=Path(text).stem)
    if text in bundled_pool_names():
        return bundled_pool(text)
    raise ConfigError(f"no pool file or bundled pool named {text!r} (bundled: {', '.join(bundled_pool_names())})")


def resolve_workload(text: str) -> Workload:
    if Path(text).is_file():
        return load_workload(_read_path(text, "workload"))
    if text in bundled_workload_names():
        return bundled_workload(text)
    raise ConfigError(
        f"no workload file or bundled workload named {text!r} (bundled: {', '.join(bundled_workload_names())})"
    )


def parse_binding(text: str) -> tuple:
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected NAME=INT, got {text!r}")
    try:
        return name.strip(), int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"binding {name.strip()!r} needs an integer, got {value!r}") from None


def _int_list(text: str) -> list:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty size list")
    return out


# -- output --------------------------------------------------------------------


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _emit(args, outputs: dict, stdout) -> None:
    """Write ``{filename: text}`` under ``--out`` or concatenate to stdout."""
    if args.out is None:
        for text in outputs.values():
            stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in outputs.items():
        (out / name).write_text(text, encoding="utf-8")


# -- subcommands -----------------------------------------------------------------


def _bindings(args) -> dict:
    return dict(args.bind or [])


def cmd_classify(args, stdout) -> int:
    workload = resolve_workload(args.workload)
    pool = resolve_pool(args.pool) if args.pool else None
    line = args.line_size or (classification_line_size(pool) if pool else 64)
    env = workload.bind(_bindings(args))
    profiles = workload.profiles(env)
    flags = workload.cache_flags(profiles, line)
    site_rows = []
    variables = []
    for p in profiles:
        sites = classify_sites(p, workload.nests, line)
        variables.append(
            {
                "variable": p.name,
                "override": p.cache_friendly.value,
                "cache_friendly": flags[p.name],
                "sites": [
                    {
                        "nest": s.nest,
                        "access": s.access,
                        "mode": s.mode.value,
                        "innermost": s.innermost,
                        "stride_bytes": s.stride_bytes,
                        "classification": s.result.value,
                    }
                    for s in sites
                ],
            }
        )
        for s in sites:
            stride = "" if s.stride_bytes is None else s.stride_bytes
            site_rows.append([p.name, flags[p.name], s.nest, s.access, s.mode.value, s.innermost or "", stride,
                              s.result.value])
    if args.format == "csv":
        header = ["variable", "cache_friendly", "nest", "access", "mode", "innermost", "stride_bytes",
                  "classification"]
        _emit(args, {"classify.csv": _csv_text(header, site_rows)}, stdout)
    else:
        doc = {"workload": workload.name, "line_size_bytes": line, "bindings": env, "variables": variables}
        _emit(args, {"classify.json": _json_text(doc)}, stdout)
    return EXIT_OK


def cmd_allocate(args, stdout) -> int:
    workload = resolve_workload(args.workload)
    pool = resolve_pool(args.pool)
    a = allocate(workload, pool, _bindings(args), line_size_bytes=args.line_size, solver=args.solver)
    if args.format == "csv":
        doc = plan_to_document(a.plan, a.model)
        rows = [[r["variable"], r["target"], r["target_index"], r["footprint_bytes"], r["cache_friendly"],
                 r["cost_pj"]] for r in doc["placement"]]
        header = ["variable", "target", "target_index", "footprint_bytes", "cache_friendly", "cost_pj"]
        _emit(args, {"plan.csv": _csv_text(header, rows)}, stdout)
    else:
        _emit(args, {"plan.json": _json_text(plan_to_document(a.plan, a.model))}, stdout)
    return EXIT_OK


def _report_document(workload, pool, result) -> dict:
    return {
        "benchmark": workload.name,
        "configuration": pool.name,
        "bindings": result.bindings,
        "energy": result.energy.to_document(),
        "plan": plan_to_document(result.allocation.plan, result.allocation.model),
        "cross_check": [d.to_document() for d in result.discrepancies],
    }


def cmd_simulate(args, stdout) -> int:
    workload = resolve_workload(args.workload)
    pool = resolve_pool(args.pool)
    plan = load_plan(_read_path(args.plan, "plan")) if args.plan else None
    result = run(workload, pool, _bindings(args), plan=plan, engine=args.engine)
    problems = result.stats.bookkeeping_errors(pool)
    if problems:
        raise SimulationError("; ".join(problems))
    if args.format == "csv":
        header = ["module", *next(iter(result.stats.modules.values())).as_dict()]
        rows = [[name, *m.as_dict().values()] for name, m in result.stats.modules.items()]
        e = result.energy.to_document()
        outputs = {
            "stats.csv": _csv_text(header, rows),
            "energy.csv": _csv_text(list(e), [list(e.values())]),
        }
    else:
        outputs = {
            "stats.json": _json_text(result.stats.to_document()),
            "energy.json": _json_text(_report_document(workload, pool, result)),
        }
    _emit(args, outputs, stdout)
    return EXIT_OK


def _long_rows(rows) -> list:
    out = []
    for r in rows:
        for metric in ("t_mem_ns", "e_static_pj", "e_dyn_pj", "e_tot_pj"):
            norm = "norm_" + metric.replace("_pj", "").replace("_ns", "")
            out.append([r["benchmark"], r["configuration"], r["parameter"], r["size"], metric, fmt3(r[metric]),
                        f"{float(r[norm]):.6f}"])
    return out


def cmd_sweep(args, stdout) -> int:
    workload = resolve_workload(args.workload)
    pools = [resolve_pool(p) for p in args.pool]
    baseline = args.baseline
    if baseline not in {p.name for p in pools}:
        pools.insert(0, resolve_pool(baseline))
    rows = sweep(workload, pools, args.sizes, baseline, parameter=args.parameter, jobs=args.jobs)
    if args.long:
        header = ["benchmark", "configuration", "parameter", "size", "metric", "value", "normalized"]
        _emit(args, {"sweep_long.csv": _csv_text(header, _long_rows(rows))}, stdout)
    else:
        _emit(args, {"sweep.csv": sweep_csv(rows)}, stdout)
    return EXIT_OK


def cmd_report(args, stdout) -> int:
    workload = resolve_workload(args.workload)
    docs, rows = [], []
    for name in args.pool:
        pool = resolve_pool(name)
        result = run(workload, pool, _bindings(args), engine=args.engine)
        docs.append(_report_document(workload, pool, result))
        e = result.energy.to_document()
        rows.append([workload.name, pool.name, *e.values()])
    if args.format == "csv":
        header = ["benchmark", "configuration", *docs[0]["energy"]]
        _emit(args, {"report.csv": _csv_text(header, rows)}, stdout)
    else:
        _emit(args, {"report.json": _json_text(docs)}, stdout)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetmem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workload", required=True, help="workload document path or bundled workload name")
    common.add_argument("--bind", action="append", type=parse_binding, metavar="NAME=INT",
                        help="override a workload parameter (repeatable)")
    common.add_argument("--out", help="write output files into this directory instead of stdout")
    common.add_argument("--format", choices=("doc", "csv"), default="doc")

    p = sub.add_parser("classify", parents=[common], help="cache-friendliness of every variable and access")
    p.add_argument("--pool", help="take the line size from this pool")
    p.add_argument("--line-size", type=int, help="line size in bytes (default: the pool's, else 64)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("allocate", parents=[common], help="solve the placement problem")
    p.add_argument("--pool", required=True)
    p.add_argument("--line-size", type=int)
    p.add_argument("--solver", choices=("exact", "exhaustive"), default="exact")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", parents=[common], help="simulate a plan and account energy")
    p.add_argument("--pool", required=True)
    p.add_argument("--plan", help="plan document (default: allocate first)")
    p.add_argument("--engine", choices=ENGINES, default="fast")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="configurations x sizes, normalised to a baseline")
    p.add_argument("--pool", action="append", required=True, help="configuration (repeatable)")
    p.add_argument("--baseline", default=DEFAULT_BASELINE)
    p.add_argument("--sizes", type=_int_list, default=list(DEFAULT_SWEEP_SIZES))
    p.add_argument("--parameter", default="N")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--long", action="store_true", help="plot-ready long-format table")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="full energy report per configuration")
    p.add_argument("--pool", action="append", required=True)
    p.add_argument("--engine", choices=ENGINES, default="fast")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args, stdout)
    except SolverDefect as exc:
        print(f"hetmem: solver defect: {exc}", file=stderr)
        return EXIT_SOLVER
    except SimulationError as exc:
        print(f"hetmem: simulation error: {exc}", file=stderr)
        return EXIT_SIMULATION
    except (ConfigError, InstanceTooLarge) as exc:
        print(f"hetmem: {exc}", file=stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
