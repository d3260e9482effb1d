"""Ensemble sampling, classification tables and frequency estimates.

Seeds: the plan's base seed feeds ``numpy.random.SeedSequence``; its
``spawn(N)`` children give each run two 32-bit words, the first seeding the
simulation and the second seeding any uniformly drawn parameters.  Runs are
therefore independent of how many runs precede them or which worker
executes them.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from .engine import MacroVariableDef, RunError, macro_series, run
from .enumeration import enumerate_systems
from .expr import EvalError
from .matcher import match_state, match_trace
from .model import ModelSpec
from .patterns import is_state_pattern
from .values import DomainError, Value, format_value, parse_value

CONSTANT = "constant"
UNIFORM = "uniform"
GRID = "grid"


@dataclass(frozen=True)
class ParamDist:
    kind: str
    values: tuple = ()


@dataclass(frozen=True)
class SamplingPlan:
    n: int
    horizon: int
    base_seed: int = 0
    params: tuple = ()  # ((name, ParamDist), ...) in declaration order

    @classmethod
    def make(cls, n: int, horizon: int, base_seed: int = 0, constant: Optional[dict] = None,
             uniform: Sequence[str] = (), grid: Optional[dict] = None) -> "SamplingPlan":
        params = [(k, ParamDist(CONSTANT, (v,))) for k, v in (constant or {}).items()]
        params += [(k, ParamDist(UNIFORM)) for k in uniform]
        params += [(k, ParamDist(GRID, tuple(v))) for k, v in (grid or {}).items()]
        return cls(n, horizon, base_seed, tuple(params))

    def with_constants(self, values: dict) -> "SamplingPlan":
        """Copy with the given parameters pinned (replacing their distributions)."""
        kept = tuple((k, d) for k, d in self.params if k not in values)
        pinned = tuple((k, ParamDist(CONSTANT, (v,))) for k, v in values.items())
        return SamplingPlan(self.n, self.horizon, self.base_seed, kept + pinned)


def validate_plan(spec: ModelSpec, plan: SamplingPlan) -> list[str]:
    problems = []
    if plan.n < 1:
        problems.append(f"run count must be >= 1, got {plan.n}")
    if plan.horizon < 0:
        problems.append(f"horizon must be >= 0, got {plan.horizon}")
    seen = set()
    for name, dist in plan.params:
        decl = spec.param(name)
        if decl is None:
            problems.append(f"unknown parameter {name!r}")
            continue
        if name in seen:
            problems.append(f"parameter {name!r} given twice")
        seen.add(name)
        if dist.kind not in (CONSTANT, UNIFORM, GRID):
            problems.append(f"parameter {name!r}: unknown distribution {dist.kind!r}")
        if dist.kind == GRID and not dist.values:
            problems.append(f"parameter {name!r}: empty grid")
        for v in dist.values:
            if not decl.domain.contains(v):
                problems.append(f"parameter {name!r}: value {format_value(v)} outside {decl.domain}")
    for p in spec.params:
        if p.name not in seen and p.default is None:
            problems.append(f"parameter {p.name!r} has no default and no distribution")
    return problems


def run_seeds(base_seed: int, n: int) -> list[tuple[int, int]]:
    """(simulation seed, parameter seed) per run index."""
    children = np.random.SeedSequence(base_seed).spawn(n)
    return [tuple(int(w) for w in c.generate_state(2)) for c in children]


def plan_params(spec: ModelSpec, plan: SamplingPlan, seeds: list) -> list[dict]:
    grid_names = [k for k, d in plan.params if d.kind == GRID]
    grid_values = [d.values for k, d in plan.params if d.kind == GRID]
    cells = list(itertools.product(*grid_values))
    out = []
    for i in range(plan.n):
        rng = random.Random(seeds[i][1])
        cell = dict(zip(grid_names, cells[i % len(cells)]))
        bound = {}
        for name, dist in plan.params:
            dom = spec.param(name).domain
            if dist.kind == CONSTANT:
                bound[name] = dom.coerce(dist.values[0])
            elif dist.kind == GRID:
                bound[name] = dom.coerce(cell[name])
            else:
                bound[name] = dom.value_at(rng.randrange(dom.cardinality))
        out.append(bound)
    return out


# --- table -----------------------------------------------------------------


@dataclass
class Row:
    run: int
    seed: int
    params: dict
    matched: dict = field(default_factory=dict)  # pattern -> bool
    counts: dict = field(default_factory=dict)  # pattern -> embeddings / bindings
    series: dict = field(default_factory=dict)  # state pattern -> instantiations per step
    macros: dict = field(default_factory=dict)  # macro -> values per step
    error: Optional[str] = None


@dataclass
class ClassificationTable:
    params: list
    patterns: list
    state_patterns: list
    macros: list
    rows: list

    @property
    def n(self) -> int:
        return len(self.rows)

    def columns(self) -> list[tuple[str, str]]:
        cols = [("run", "integer"), ("seed", "integer")]
        cols += [(f"param.{p}", "numeric") for p in self.params]
        for p in self.patterns:
            cols += [(p, "boolean"), (f"{p}.n", "integer")]
            if p in self.state_patterns:
                cols.append((f"{p}.series", "series"))
        cols += [(m, "series") for m in self.macros]
        cols.append(("error", "categorical"))
        return cols


def _fmt_series(values) -> str:
    return ";".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in values)


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out, i = [], 0
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text):
            out.append({"t": "\t", "n": "\n"}.get(text[i + 1], text[i + 1]))
            i += 2
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def dumps_table(table: ClassificationTable) -> str:
    cols = table.columns()
    lines = ["\t".join(f"{n}:{t}" for n, t in cols)]
    for r in table.rows:
        cells = [str(r.run), str(r.seed)]
        cells += [format_value(r.params.get(p)) for p in table.params]
        for p in table.patterns:
            if r.error is not None:
                cells += ["", ""]
            else:
                cells += [format_value(r.matched[p]), str(r.counts[p])]
            if p in table.state_patterns:
                cells.append("" if r.error is not None else _fmt_series(r.series[p]))
        cells += ["" if r.error is not None else _fmt_series(r.macros[m]) for m in table.macros]
        cells.append("" if r.error is None else _escape(r.error))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


class TableFormatError(ValueError):
    pass


def loads_table(text: str) -> ClassificationTable:
    lines = text.rstrip("\n").split("\n")
    if not lines or not lines[0]:
        raise TableFormatError("empty table")
    header = [c.rsplit(":", 1) for c in lines[0].split("\t")]
    if any(len(h) != 2 for h in header):
        raise TableFormatError("header cells must be name:type")
    names = [h[0] for h in header]
    params = [n[6:] for n in names if n.startswith("param.")]
    patterns = [n for n, t in header if t == "boolean"]
    state_patterns = [n[:-7] for n, t in header if t == "series" and n.endswith(".series") and n[:-7] in patterns]
    macros = [n for n, t in header if t == "series" and not (n.endswith(".series") and n[:-7] in patterns)]
    rows = []
    for number, line in enumerate(lines[1:], start=2):
        cells = line.split("\t")
        if len(cells) != len(names):
            raise TableFormatError(f"line {number}: expected {len(names)} cells, found {len(cells)}")
        cell = dict(zip(names, cells))
        error = _unescape(cell["error"]) if cell["error"] else None
        row = Row(int(cell["run"]), int(cell["seed"]), {p: parse_value(cell[f"param.{p}"]) for p in params}, error=error)
        if error is None:
            for p in patterns:
                row.matched[p] = parse_value(cell[p])
                row.counts[p] = int(cell[f"{p}.n"])
            for p in state_patterns:
                row.series[p] = [int(v) for v in cell[f"{p}.series"].split(";")]
            for m in macros:
                row.macros[m] = [float(v) for v in cell[m].split(";")]
        rows.append(row)
    return ClassificationTable(params, patterns, state_patterns, macros, rows)


def write_table(table: ClassificationTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_table(table))


def read_table(path) -> ClassificationTable:
    with open(path, encoding="utf-8") as fh:
        return loads_table(fh.read())


# --- sampling ----------------------------------------------------------------


def _named(items) -> list:
    if isinstance(items, dict):
        return list(items.items())
    return list(items)


def classify_trace(trace, patterns: list, macros: list, row: Row) -> None:
    for name, p in patterns:
        if is_state_pattern(p):
            counts = [match_state(p, s).instantiations for s in trace.states()]
            first = next((c for c in counts if c), 0)
            row.matched[name] = first > 0
            row.counts[name] = first
            row.series[name] = counts
        else:
            res = match_trace(p, trace)
            row.matched[name] = res.matched
            row.counts[name] = res.instantiations
    for m in macros:
        row.macros[m.name] = [float(v) for v in macro_series(trace, m)]


def sample(spec: ModelSpec, plan: SamplingPlan, patterns=(), macros: Sequence[MacroVariableDef] = ()) -> ClassificationTable:
    """Run the plan and classify every run.

    *patterns* is a mapping or a sequence of (name, pattern) pairs.  A run
    that fails records its error in the row; the other runs are unaffected.
    """
    problems = validate_plan(spec, plan)
    if problems:
        raise ValueError("; ".join(problems))
    patterns = _named(patterns)
    macros = list(macros)
    seeds = run_seeds(plan.base_seed, plan.n)
    bindings = plan_params(spec, plan, seeds)
    rows = []
    for i in range(plan.n):
        shown = {p.name: bindings[i].get(p.name, p.default) for p in spec.params}
        row = Row(i, seeds[i][0], shown)
        try:
            trace = run(spec, bindings[i], seed=seeds[i][0], horizon=plan.horizon)
            classify_trace(trace, patterns, macros, row)
        except (RunError, EvalError, DomainError) as exc:
            row = Row(i, seeds[i][0], shown, error=str(exc))
        rows.append(row)
    state = [n for n, p in patterns if is_state_pattern(p)]
    return ClassificationTable([p.name for p in spec.params], [n for n, _ in patterns], state,
                               [m.name for m in macros], rows)


# --- frequencies -------------------------------------------------------------


Z95 = NormalDist().inv_cdf(0.975)


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("Wilson interval needs n >= 1")
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # guard the invariant estimate in CI against rounding at k = 0 or k = n
    return min(lo, p), max(hi, p)


@dataclass(frozen=True)
class FrequencyEstimate:
    pattern: str
    estimate: float
    lo: float
    hi: float
    n: int
    matched: int
    failed: int = 0


def frequency(table: ClassificationTable, pattern: str) -> FrequencyEstimate:
    """Share of successful runs matching *pattern*, with a Wilson 95% interval."""
    if pattern not in table.patterns:
        raise KeyError(f"unknown pattern {pattern!r}")
    ok = [r for r in table.rows if r.error is None]
    if not ok:
        raise ValueError(f"no successful runs to estimate {pattern!r}")
    k = sum(1 for r in ok if r.matched[pattern])
    lo, hi = wilson_interval(k, len(ok))
    return FrequencyEstimate(pattern, k / len(ok), lo, hi, len(ok), k, len(table.rows) - len(ok))


def exact_frequencies(spec: ModelSpec, horizon: int, bound: int, patterns, params: Optional[dict] = None,
                      all_initial: bool = False) -> dict[str, Fraction]:
    """Probability-weighted share of enumerated systems matching each pattern."""
    patterns = _named(patterns)
    systems = enumerate_systems(spec, horizon, bound, params=params, all_initial=all_initial)
    total = sum((s.weight for s in systems), Fraction(0))
    out = {}
    for name, p in patterns:
        hit = Fraction(0)
        for s in systems:
            if is_state_pattern(p):
                ok = any(match_state(p, st, cap=1).matched for st in s.trace.states())
            else:
                ok = match_trace(p, s.trace, cap=1).matched
            if ok:
                hit += s.weight
        out[name] = hit / total
    return out


__all__ = [
    "CONSTANT", "GRID", "UNIFORM", "ClassificationTable", "FrequencyEstimate", "ParamDist", "Row",
    "SamplingPlan", "TableFormatError", "Value", "dumps_table", "exact_frequencies", "frequency",
    "loads_table", "plan_params", "read_table", "run_seeds", "sample", "validate_plan", "wilson_interval",
    "write_table",
]
