"""Command-line driver.

Every subcommand writes its artifacts into ``--out`` (default: the
``ABMLEVELS_OUT`` environment variable, else the current directory) and
prints a short report.  Exit status is 0 on success, 1 on any model, data
or run error, and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import Optional

from .empirical import (
    DatasetError, dumps_result, load_binding, load_dataset, validate_inter_level, validate_multi_level,
)
from .engine import RunError, run
from .enumeration import EnumerationBoundError
from .ensemble import (
    SamplingPlan, TableFormatError, exact_frequencies, frequency, read_table, sample, write_table,
)
from .levels import (
    MeasurementError, RegionPartition, check_table, loads_cells, parse_inter_level, partition, sweep,
)
from .lexing import ParseError
from .matcher import match_trace
from .model import ModelSpec, Schedule, format_model
from .modelparse import parse_model
from .patterns import PatternLibrary, parse_pattern_file
from .tracefile import TraceFormatError, read_trace, write_trace
from .values import parse_value

OUT_ENV = "ABMLEVELS_OUT"

DEMOS = {
    "toggle": {"horizon": 3, "n": 10, "about": "two cells inverting a flag each step"},
    "coin": {"horizon": 1, "n": 10000, "about": "one fair coin toss"},
    "adopt": {"horizon": 3, "n": 10000, "about": "two voters copying each other in random order"},
    "schedule": {"horizon": 3, "n": 1, "about": "fixture whose outcome depends on the update schedule"},
    "theft": {"horizon": 4, "n": 10, "about": "three agents, one steals at step 2"},
    "marriage": {"horizon": 3, "n": 10, "about": "men propose, women accept"},
    "segregation": {
        "horizon": 10, "n": 200, "about": "Schelling-style colour switching on an 8x8 torus",
        "grid": {"intolerance": ["0.10", "0.20", "0.30", "0.40", "0.50"]},
    },
}


class CliError(Exception):
    pass


def _formatter(prog):
    return argparse.HelpFormatter(prog, width=80, max_help_position=30)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from exc


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_model(path) -> ModelSpec:
    return parse_model(_read(path))


def _load_patterns(paths, spec: ModelSpec) -> PatternLibrary:
    lib = PatternLibrary()
    for path in paths or ():
        part = parse_pattern_file(_read(path), spec, lib.macros)
        for name in part.patterns:
            if name in lib.patterns:
                raise CliError(f"pattern {name!r} defined in more than one file")
        lib.macros.update(part.macros)
        lib.patterns.update(part.patterns)
    return lib


def _kv(text: str) -> tuple[str, str]:
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    return name, value


def _params(pairs) -> dict:
    return {k: parse_value(v) for k, v in pairs or ()}


def _grid(pairs) -> dict:
    return {k: [parse_value(x) for x in v.split(",")] for k, v in pairs or ()}


def _fmt_float(x) -> str:
    return "NA" if x is None else f"{x:.6f}"


# --- subcommands -----------------------------------------------------------------


def cmd_parse(args) -> int:
    spec = _load_model(args.model)
    lib = _load_patterns(args.pattern, spec)
    if args.pattern:
        print(lib.format(), end="")
    else:
        print(format_model(spec), end="")
    return 0


def cmd_run(args) -> int:
    spec = _load_model(args.model)
    if args.schedule:
        spec = ModelSpec(spec.name, spec.params, spec.globals, spec.agent_types, spec.population, spec.topology,
                         Schedule(args.schedule, spec.schedule.order if args.schedule == "async-fixed" else (),
                                  spec.schedule.mode))
    trace = run(spec, _params(args.param), seed=args.seed, horizon=args.horizon)
    path = _out_dir(args) / f"{spec.name}-seed{args.seed}-h{args.horizon}.trace"
    write_trace(path, trace)
    print(f"trace {path}")
    print(f"events {len(trace.events)}")
    return 0


def _plan(args, spec) -> SamplingPlan:
    return SamplingPlan.make(args.n, args.horizon, args.seed, constant=_params(args.param),
                             uniform=args.uniform or (), grid=_grid(args.grid))


def _freq_report(table, exact: Optional[dict] = None) -> str:
    head = "pattern\testimate\tlo\thi\tn\tmatched\tfailed" + ("\texact" if exact is not None else "")
    lines = [head]
    for p in table.patterns:
        f = frequency(table, p)
        row = f"{p}\t{f.estimate!r}\t{f.lo!r}\t{f.hi!r}\t{f.n}\t{f.matched}\t{f.failed}"
        if exact is not None:
            row += f"\t{exact[p]}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def cmd_sample(args) -> int:
    spec = _load_model(args.model)
    lib = _load_patterns(args.pattern, spec)
    table = sample(spec, _plan(args, spec), lib.patterns, list(lib.macros.values()))
    exact = None
    if args.exact is not None:
        exact = exact_frequencies(spec, args.horizon, args.exact, lib.patterns, params=_params(args.param) or None)
    out = _out_dir(args)
    write_table(table, out / f"{spec.name}.table.tsv")
    report = _freq_report(table, exact)
    _write(out / f"{spec.name}.freq.tsv", report)
    print(report, end="")
    return 0


def cmd_classify(args) -> int:
    spec = _load_model(args.model)
    lib = _load_patterns(args.pattern, spec)
    lines = ["trace\tpattern\tmatched\tinstantiations\texact"]
    for path in args.trace:
        trace = read_trace(path, spec)
        for name, p in lib.patterns.items():
            res = match_trace(p, trace)
            lines.append(f"{Path(path).name}\t{name}\t{str(res.matched).lower()}\t{res.instantiations}\t"
                         f"{str(res.exact).lower()}")
    text = "\n".join(lines) + "\n"
    _write(_out_dir(args) / "classification.tsv", text)
    print(text, end="")
    return 0


def cmd_check_inter(args) -> int:
    table = read_table(args.table)
    model = parse_inter_level(_read(args.ilm))
    verdicts = check_table(model, table)
    lines = [v.describe() for v in verdicts]
    overall = "pass" if verdicts and all(v.passed for v in verdicts) else "fail"
    text = f"overall {overall}\n" + "\n".join(lines) + "\n"
    _write(_out_dir(args) / "inter-level.txt", text)
    print(text, end="")
    return 0


def _do_sweep(spec, lib, model, grid: dict, plan: SamplingPlan, out: Path, stat: Optional[str], tol: float):
    matrix = sweep(spec, grid, plan, model, lib.patterns, list(lib.macros.values()))
    _write(out / f"{spec.name}.cells.tsv", matrix.dumps())
    lines = []
    for idx in sorted(matrix.cells):
        c = matrix.cells[idx]
        where = " ".join(f"{k}={v}" for k, v in c.params.items())
        stats = " ".join(f"{k}={_fmt_float(v)}" for k, v in c.stats.items())
        lines.append(f"cell {where}: {stats}" + (f" error={c.error}" if c.error else ""))
    print("\n".join(lines))
    if stat is not None:
        rp = partition(matrix, tol, stat)
        _write(out / f"{spec.name}.regions.txt", rp.report())
        _write(out / f"{spec.name}.regions.json", rp.dumps_json())
        print(rp.report(), end="")
    return matrix


def cmd_sweep(args) -> int:
    spec = _load_model(args.model)
    lib = _load_patterns(args.pattern, spec)
    model = parse_inter_level(_read(args.ilm))
    grid = _grid(args.grid)
    if not grid:
        raise CliError("sweep needs at least one --grid")
    plan = SamplingPlan.make(args.n, args.horizon, args.seed, constant=_params(args.param))
    _do_sweep(spec, lib, model, grid, plan, _out_dir(args), args.stat, args.tolerance)
    return 0


def cmd_partition(args) -> int:
    matrix = loads_cells(_read(args.cells))
    rp = partition(matrix, args.tolerance, args.stat)
    out = _out_dir(args)
    _write(out / "regions.txt", rp.report())
    _write(out / "regions.json", rp.dumps_json())
    print(rp.report(), end="")
    return 0


def cmd_validate(args) -> int:
    data = load_dataset(args.data)
    binding = load_binding(args.binding)
    out = _out_dir(args)
    if data.dropped:
        print(data.report(), end="", file=sys.stderr)
    if (args.ilm is None) == (args.regions is None):
        raise CliError("give exactly one of --ilm or --regions")
    if args.ilm is not None:
        result = validate_inter_level(parse_inter_level(_read(args.ilm)), data, binding)
    else:
        rp = RegionPartition.from_json(json.loads(_read(args.regions)))
        result = validate_multi_level(rp, data, binding)
    _write(out / "validation.txt", result.report())
    _write(out / "validation.json", dumps_result(result))
    print(result.report(), end="")
    return 0


def demo_text(name: str, ext: str) -> Optional[str]:
    res = resources.files("abmlevels") / "demos" / f"{name}.{ext}"
    return res.read_text(encoding="utf-8") if res.is_file() else None


def cmd_demo(args) -> int:
    if args.name is None:
        for name, cfg in DEMOS.items():
            print(f"{name:<12} {cfg['about']}")
        return 0
    if args.name not in DEMOS:
        raise CliError(f"unknown demo {args.name!r}; choose from {', '.join(DEMOS)}")
    cfg = DEMOS[args.name]
    out = _out_dir(args)
    spec = parse_model(demo_text(args.name, "abm"))
    cet = demo_text(args.name, "cet") or ""
    lib = parse_pattern_file(cet, spec)
    if args.export:
        for ext in ("abm", "cet", "ilm"):
            text = demo_text(args.name, ext)
            if text is not None:
                _write(out / f"{args.name}.{ext}", text)
                print(f"wrote {out / f'{args.name}.{ext}'}")
        return 0
    n = args.n or cfg["n"]
    horizon = args.horizon or cfg["horizon"]
    if args.sweep:
        if "grid" not in cfg:
            raise CliError(f"demo {args.name!r} has no parameter grid")
        ilm = demo_text(args.name, "ilm")
        model = parse_inter_level(ilm)
        grid = {k: [Decimal(v) for v in vals] for k, vals in cfg["grid"].items()}
        plan = SamplingPlan(n, horizon, args.seed)
        first = next(iter(lib.patterns))
        _do_sweep(spec, lib, model, grid, plan, out, f"freq:{first}", args.tolerance)
        return 0
    if not lib.patterns:
        trace = run(spec, seed=args.seed, horizon=horizon)
        path = out / f"{spec.name}-seed{args.seed}-h{horizon}.trace"
        write_trace(path, trace)
        print(f"trace {path}")
        return 0
    table = sample(spec, SamplingPlan(n, horizon, args.seed), lib.patterns, list(lib.macros.values()))
    write_table(table, out / f"{spec.name}.table.tsv")
    report = _freq_report(table)
    _write(out / f"{spec.name}.freq.tsv", report)
    print(report, end="")
    return 0


# --- parser -------------------------------------------------------------------------


def _common_out(p) -> None:
    p.add_argument("--out", metavar="DIR", help=f"output directory (default: ${OUT_ENV} or .)")


def _sampling(p, seed_default: int = 0) -> None:
    p.add_argument("--n", type=int, default=100, help="runs per ensemble (default: 100)")
    p.add_argument("--horizon", type=int, default=10, help="steps per run (default: 10)")
    p.add_argument("--seed", type=int, default=seed_default, help="base seed (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abmlevels", formatter_class=_formatter,
        description="Run agent-based models, classify their traces and check multi-level models.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("parse", help="validate and pretty-print a model or pattern files",
                       formatter_class=_formatter, description="Validate a model (and pattern files) and print "
                       "the canonical text.")
    p.add_argument("--model", required=True, help="model file (.abm)")
    p.add_argument("--pattern", action="append", metavar="FILE", help="pattern file (.cet), repeatable")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("run", help="run one simulation and write its trace", formatter_class=_formatter,
                       description="Run one seeded simulation and write the trace file.")
    p.add_argument("--model", required=True, help="model file (.abm)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--horizon", type=int, default=10, help="steps to run (default: 10)")
    p.add_argument("--param", action="append", type=_kv, metavar="NAME=VALUE", help="parameter binding, repeatable")
    p.add_argument("--schedule", choices=["synchronous", "async-random", "async-fixed"],
                   help="override the model's schedule")
    _common_out(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sample", help="sample an ensemble and estimate pattern frequencies",
                       formatter_class=_formatter, description="Sample an ensemble, classify every run and "
                       "report pattern frequencies with Wilson 95% intervals.")
    p.add_argument("--model", required=True, help="model file (.abm)")
    p.add_argument("--pattern", action="append", metavar="FILE", help="pattern file (.cet), repeatable")
    _sampling(p)
    p.add_argument("--param", action="append", type=_kv, metavar="NAME=VALUE", help="constant parameter")
    p.add_argument("--grid", action="append", type=_kv, metavar="NAME=V1,V2", help="parameter grid, cycled")
    p.add_argument("--uniform", action="append", metavar="NAME", help="draw parameter uniformly over its domain")
    p.add_argument("--exact", type=int, metavar="BOUND", help="also enumerate up to BOUND systems for exact "
                   "frequencies")
    _common_out(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("classify", help="match patterns against trace files", formatter_class=_formatter,
                       description="Match every pattern against every trace.")
    p.add_argument("--model", required=True, help="model file the traces came from")
    p.add_argument("--pattern", action="append", required=True, metavar="FILE", help="pattern file, repeatable")
    p.add_argument("--trace", action="append", required=True, metavar="FILE", help="trace file, repeatable")
    _common_out(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("check-inter", help="check an inter-level model on a table", formatter_class=_formatter,
                       description="Check every edge of an inter-level model on a classification table.")
    p.add_argument("--table", required=True, help="classification table (.tsv)")
    p.add_argument("--ilm", required=True, help="inter-level model file (.ilm)")
    _common_out(p)
    p.set_defaults(func=cmd_check_inter)

    p = sub.add_parser("sweep", help="sample a parameter grid and partition it", formatter_class=_formatter,
                       description="Sample every cell of a parameter grid with one base seed and record "
                       "per-cell statistics; optionally partition them.")
    p.add_argument("--model", required=True, help="model file (.abm)")
    p.add_argument("--pattern", action="append", metavar="FILE", help="pattern file, repeatable")
    p.add_argument("--ilm", required=True, help="inter-level model file (.ilm)")
    p.add_argument("--grid", action="append", type=_kv, metavar="NAME=V1,V2", help="grid axis, repeatable")
    p.add_argument("--param", action="append", type=_kv, metavar="NAME=VALUE", help="constant parameter")
    _sampling(p)
    p.add_argument("--stat", help="statistic to partition on (skip partition when absent)")
    p.add_argument("--tolerance", type=float, default=0.1, help="region spread tolerance (default: 0.1)")
    _common_out(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("partition", help="partition a cell matrix into regions", formatter_class=_formatter,
                       description="Split a swept cell matrix into axis-aligned regions of near-constant "
                       "statistic and report their heterarchy.")
    p.add_argument("--cells", required=True, help="cell matrix written by sweep (.cells.tsv)")
    p.add_argument("--stat", help="statistic column (default: first edge statistic)")
    p.add_argument("--tolerance", type=float, required=True, help="maximum within-region spread")
    _common_out(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("validate", help="validate a model against an empirical dataset",
                       formatter_class=_formatter, description="Validate an inter-level model (--ilm) or a "
                       "region partition (--regions) against a dataset.")
    p.add_argument("--data", required=True, help="dataset with a name:type header")
    p.add_argument("--binding", required=True, help="binding file")
    p.add_argument("--ilm", help="inter-level model file")
    p.add_argument("--regions", help="region partition JSON written by partition")
    _common_out(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("demo", help="run a bundled demo model", formatter_class=_formatter,
                       description="List the bundled demos, run one, or export its files.")
    p.add_argument("name", nargs="?", help="demo name (omit to list)")
    p.add_argument("--sweep", action="store_true", help="sweep the demo's parameter grid and partition it")
    p.add_argument("--export", action="store_true", help="write the demo's source files instead of running")
    p.add_argument("--n", type=int, help="runs per ensemble (default: per demo)")
    p.add_argument("--horizon", type=int, help="steps per run (default: per demo)")
    p.add_argument("--seed", type=int, default=0, help="base seed (default: 0)")
    p.add_argument("--tolerance", type=float, default=0.1, help="region spread tolerance (default: 0.1)")
    _common_out(p)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
    except (CliError, RunError, EnumerationBoundError, MeasurementError, DatasetError, TableFormatError,
            TraceFormatError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
