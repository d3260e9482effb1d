"""Empirical datasets: loading, column binding and model validation.

Dataset files are delimited text whose first line is a typed header of
``name:type`` cells (types ``numeric``, ``integer``, ``boolean``,
``categorical``).  The delimiter is a tab when the header contains one and a
comma otherwise.  Rows with a malformed cell are dropped and listed in the
load report.

Binding files map model-side names to columns::

    node crime = crime_rate
    param p1 = density edges 0.25 0.5 0.75

Without explicit edges a parameter's bins are split halfway between
neighbouring grid values and the outer bins are unbounded.  Giving one edge
more than there are grid values bounds the outer bins too.  Bins are half-open ``[lo, hi)`` except the last,
which is closed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .ensemble import ClassificationTable
from .levels import (
    FAIL, INDETERMINATE, PASS, CellMatrix, InterLevelModel, RegionPartition, check_inter_level,
    correlation, measure_model,
)
from .values import format_value

COLUMN_TYPES = ("numeric", "integer", "boolean", "categorical")
MIN_ROWS = 3
UNTESTABLE = "untestable"


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    columns: list  # [(name, type), ...]
    rows: list  # dicts of parsed values
    dropped: list = field(default_factory=list)  # (data row number, reason)

    def column(self, name: str) -> list:
        if name not in dict(self.columns):
            raise DatasetError(f"unknown column {name!r}")
        return [r[name] for r in self.rows]

    def report(self) -> str:
        lines = [f"rows kept {len(self.rows)}", f"rows dropped {len(self.dropped)}"]
        lines += [f"  row {n}: {why}" for n, why in self.dropped]
        return "\n".join(lines) + "\n"


def _cell(text: str, kind: str):
    text = text.strip()
    if kind == "categorical":
        return text
    if kind == "boolean":
        if text in ("true", "false"):
            return text == "true"
        raise ValueError(f"not a boolean: {text!r}")
    if kind == "integer":
        return int(text)
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def loads_dataset(text: str) -> Dataset:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DatasetError("empty dataset")
    delim = "\t" if "\t" in lines[0] else ","
    columns = []
    for cell in lines[0].split(delim):
        name, sep, kind = cell.strip().rpartition(":")
        if not sep or not name:
            raise DatasetError(f"header cell {cell.strip()!r} is not name:type")
        if kind not in COLUMN_TYPES:
            raise DatasetError(f"column {name!r}: unknown type {kind!r}")
        columns.append((name, kind))
    names = [n for n, _ in columns]
    if len(set(names)) != len(names):
        raise DatasetError("duplicate column names")
    rows, dropped = [], []
    for number, line in enumerate(lines[1:], start=1):
        cells = line.split(delim)
        if len(cells) != len(columns):
            dropped.append((number, f"expected {len(columns)} cells, found {len(cells)}"))
            continue
        try:
            rows.append({n: _cell(c, k) for (n, k), c in zip(columns, cells)})
        except ValueError as exc:
            dropped.append((number, str(exc)))
    return Dataset(columns, rows, dropped)


def load_dataset(path) -> Dataset:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    return loads_dataset(text)


# --- binding -------------------------------------------------------------------


@dataclass(frozen=True)
class ParamBinding:
    column: str
    edges: Optional[tuple] = None  # internal bin edges, ascending


@dataclass
class Binding:
    nodes: dict = field(default_factory=dict)  # measurement name -> column
    params: dict = field(default_factory=dict)  # parameter -> ParamBinding

    @classmethod
    def identity(cls, m: InterLevelModel, params=()) -> "Binding":
        return cls({n.name: n.name for n in m.nodes}, {p: ParamBinding(f"param.{p}") for p in params})


def parse_binding(text: str) -> Binding:
    b = Binding()
    for number, raw in enumerate(text.splitlines(), start=1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        if len(words) < 4 or words[0] not in ("node", "param") or words[2] != "=":
            raise DatasetError(f"binding line {number}: expected 'node NAME = COLUMN' or 'param NAME = COLUMN [edges ...]'")
        kind, name, column = words[0], words[1], words[3]
        table = b.nodes if kind == "node" else b.params
        if name in table:
            raise DatasetError(f"binding line {number}: {name!r} bound twice")
        if kind == "node":
            if len(words) != 4:
                raise DatasetError(f"binding line {number}: unexpected text after column")
            b.nodes[name] = column
            continue
        edges = None
        if len(words) > 4:
            if words[4] != "edges" or len(words) == 5:
                raise DatasetError(f"binding line {number}: expected 'edges' followed by numbers")
            try:
                edges = tuple(float(w) for w in words[5:])
            except ValueError as exc:
                raise DatasetError(f"binding line {number}: {exc}") from exc
            if any(a >= c for a, c in zip(edges, edges[1:])):
                raise DatasetError(f"binding line {number}: edges must be strictly increasing")
        b.params[name] = ParamBinding(column, edges)
    return b


def load_binding(path) -> Binding:
    with open(path, encoding="utf-8") as fh:
        return parse_binding(fh.read())


# --- inter-level validation ------------------------------------------------------


@dataclass
class ValidationResult:
    verdicts: list
    overall: str
    rows: int

    def report(self) -> str:
        lines = [f"overall {self.overall}", f"rows {self.rows}"]
        lines += [v.describe() for v in self.verdicts]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "overall": self.overall,
            "rows": self.rows,
            "edges": [
                {"edge": v.edge.label, "kind": v.edge.kind, "sign": v.edge.sign, "strength": v.edge.strength,
                 "coefficient": v.coefficient, "lo": v.lo, "hi": v.hi, "n": v.n, "status": v.status,
                 "notes": list(v.notes)}
                for v in self.verdicts
            ],
        }


def _numeric_column(d: Dataset, column: str) -> list:
    kinds = dict(d.columns)
    if column not in kinds:
        raise DatasetError(f"unknown column {column!r}")
    if kinds[column] == "categorical":
        raise DatasetError(f"column {column!r} is categorical")
    return [float(v) for v in d.column(column)]


def validate_inter_level(m: InterLevelModel, d: Dataset, b: Binding) -> ValidationResult:
    """Check every edge of *m* on the bound dataset columns."""
    used = [n.name for n in m.nodes]
    unbound = [n for n in used if n not in b.nodes]
    if unbound:
        raise DatasetError(f"unbound node(s) {unbound}")
    if len(d.rows) < MIN_ROWS:
        raise DatasetError(f"need at least {MIN_ROWS} usable rows, dataset has {len(d.rows)}")
    vectors = {n: _numeric_column(d, b.nodes[n]) for n in used}
    verdicts = check_inter_level(m, vectors)
    overall = PASS if verdicts and all(v.passed for v in verdicts) else FAIL
    return ValidationResult(verdicts, overall, len(d.rows))


# --- multi-level validation --------------------------------------------------------


def bin_edges(values: list, edges: Optional[tuple]) -> list:
    """Interval [lo, hi) per grid value.

    With n grid values, n - 1 edges leave the outer bins unbounded and
    n + 1 edges bound them, so rows beyond the outer edges stay unassigned.
    """
    vals = [float(v) for v in values]
    if edges is None:
        edges = tuple((a + c) / 2 for a, c in zip(vals, vals[1:]))
    if len(edges) == len(vals) + 1:
        bounds = list(edges)
    elif len(edges) == len(vals) - 1:
        bounds = [-math.inf, *edges, math.inf]
    else:
        raise DatasetError(f"need {len(vals) - 1} or {len(vals) + 1} edges for {len(vals)} grid values, "
                           f"got {len(edges)}")
    return list(zip(bounds[:-1], bounds[1:]))


def _in_bin(x: float, lo: float, hi: float, last: bool) -> bool:
    return lo <= x < hi or (last and x == hi)


@dataclass
class RegionVerdict:
    region: str
    status: str
    rows: int
    observed: Optional[float]
    fitted: float

    def describe(self) -> str:
        obs = "NA" if self.observed is None else repr(self.observed)
        return f"{self.region}: {self.status} rows={self.rows} observed={obs} fitted={self.fitted!r}"


@dataclass
class MultiLevelResult:
    regions: list
    unassigned: int
    overall: str

    def report(self) -> str:
        lines = [f"overall {self.overall}", f"unassigned rows {self.unassigned}"]
        lines += [r.describe() for r in self.regions]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "overall": self.overall,
            "unassigned": self.unassigned,
            "regions": [
                {"id": r.region, "status": r.status, "rows": r.rows, "observed": r.observed, "fitted": r.fitted}
                for r in self.regions
            ],
        }


def region_statistic(stat: str, rows: list, b: Binding) -> Optional[float]:
    """The partition statistic recomputed on a group of dataset rows.

    A column bound to the statistic's own name (as in exported cells) is
    averaged.  Otherwise ``edge:a->b`` is the correlation of the columns
    bound to a and b, and ``freq:P`` or ``node:N`` the mean of the column
    bound to P or N.
    """
    if stat in b.nodes:
        vals = [float(r[b.nodes[stat]]) for r in rows]
        return sum(vals) / len(vals)
    if stat.startswith("edge:"):
        label = stat[5:]
        arrow = "->" if "->" in label else "--"
        src, dst = label.split(arrow, 1)
        for n in (src, dst):
            if n not in b.nodes:
                raise DatasetError(f"statistic {stat}: node {n!r} is unbound")
        return correlation([float(r[b.nodes[src]]) for r in rows], [float(r[b.nodes[dst]]) for r in rows])
    name = stat.split(":", 1)[1] if stat.startswith(("freq:", "node:")) else stat
    if name not in b.nodes:
        raise DatasetError(f"statistic {stat}: {name!r} is unbound")
    vals = [float(r[b.nodes[name]]) for r in rows]
    return sum(vals) / len(vals)


def validate_multi_level(p: RegionPartition, d: Dataset, b: Binding) -> MultiLevelResult:
    """Bin rows by region ranges and test each region's fitted statistic.

    A region passes when its statistic on the bin lies within the partition
    tolerance of the fitted value.  Bins with fewer than three rows are
    untestable, never passing by default.
    """
    for name, _ in p.axes:
        if name not in b.params:
            raise DatasetError(f"unbound parameter {name!r}")
    bins = [bin_edges(vals, b.params[name].edges) for name, vals in p.axes]
    cols = [b.params[name].column for name, _ in p.axes]
    for c in cols:
        _numeric_column(d, c)
    groups: dict = {r.id: [] for r in p.regions}
    unassigned = 0
    for row in d.rows:
        hits = 0
        for r in p.regions:
            ok = True
            for axis, (lo_i, hi_i) in enumerate(r.bounds):
                x = float(row[cols[axis]])
                lo, hi = bins[axis][lo_i][0], bins[axis][hi_i][1]
                if not _in_bin(x, lo, hi, hi_i == len(bins[axis]) - 1):
                    ok = False
                    break
            if ok:
                groups[r.id].append(row)
                hits += 1
        unassigned += hits == 0
    verdicts = []
    for r in p.regions:
        rows = groups[r.id]
        if len(rows) < MIN_ROWS:
            verdicts.append(RegionVerdict(r.id, UNTESTABLE, len(rows), None, r.fitted))
            continue
        obs = region_statistic(p.stat, rows, b)
        if obs is None:
            verdicts.append(RegionVerdict(r.id, INDETERMINATE, len(rows), None, r.fitted))
            continue
        ok = abs(obs - r.fitted) <= p.tolerance
        verdicts.append(RegionVerdict(r.id, PASS if ok else FAIL, len(rows), obs, r.fitted))
    statuses = {v.status for v in verdicts}
    overall = PASS if statuses == {PASS} else (FAIL if FAIL in statuses else UNTESTABLE)
    return MultiLevelResult(verdicts, unassigned, overall)


# --- export ------------------------------------------------------------------------


def export_measurements(table: ClassificationTable, m: InterLevelModel) -> str:
    """Dataset text holding every per-run node of *m* plus the run parameters."""
    vectors = measure_model(table, InterLevelModel(tuple(n for n in m.nodes if not n.per_ensemble), ()))
    rows = [r for r in table.rows if r.error is None]
    head = ["run:integer"] + [f"param.{p}:numeric" for p in table.params] + [f"{n}:numeric" for n in vectors]
    lines = ["\t".join(head)]
    for i, r in enumerate(rows):
        cells = [str(r.run)] + [format_value(r.params[p]) for p in table.params]
        cells += [repr(float(vectors[n][i])) for n in vectors]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def export_cells(matrix: CellMatrix, stat: str, runs_per_cell: int = 1) -> str:
    """Dataset text with one row per cell (repeated), for multi-level checks."""
    lines = ["\t".join([f"{n}:numeric" for n, _ in matrix.axes] + [f"{stat}:numeric"])]
    for idx in sorted(matrix.cells):
        c = matrix.cells[idx]
        v = c.stats.get(stat)
        if v is None:
            continue
        for _ in range(runs_per_cell):
            lines.append("\t".join([format_value(c.params[n]) for n, _ in matrix.axes] + [repr(float(v))]))
    return "\n".join(lines) + "\n"


def dumps_result(result) -> str:
    return json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n"


__all__ = [
    "Binding", "Dataset", "DatasetError", "MultiLevelResult", "ParamBinding", "RegionVerdict", "UNTESTABLE",
    "ValidationResult", "bin_edges", "dumps_result", "export_cells", "export_measurements", "load_binding",
    "load_dataset", "loads_dataset", "parse_binding", "region_statistic", "validate_inter_level",
    "validate_multi_level",
]
