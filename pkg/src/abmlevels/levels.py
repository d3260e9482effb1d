"""Inter-level association models, parameter sweeps and region partitions.

An inter-level model file declares measurement nodes and association
edges::

    node crime = macro_at(thefts, final)
    node wealth = macro_change(mean_wealth, 0, final)
    edge crime -> wealth correlation - 0.3
    edge crime -- wealth declared-causal * 0.1 spearman

``->`` marks a directed edge and ``--`` an undirected one.  The sign is
``+``, ``-`` or ``*`` (unspecified) and the number is the minimum absolute
coefficient.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .ensemble import ClassificationTable, SamplingPlan, frequency, sample
from .lexing import Diagnostic, ParseError, TokenStream, tokenize
from .model import ModelSpec
from .values import format_value, parse_value

FREQUENCY = "frequency"
MACRO_AT = "macro_at"
MACRO_CHANGE = "macro_change"
COUNT_AT = "count_at"
DERIVATIONS = (FREQUENCY, MACRO_AT, MACRO_CHANGE, COUNT_AT)

CORRELATION = "correlation"
CAUSAL = "declared-causal"

PASS = "pass"
FAIL = "fail"
INDETERMINATE = "indeterminate"


class MeasurementError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementVariable:
    """How to read one number per run (or per ensemble) off a table.

    Steps are indices into the per-step series; None means the final step.
    """

    name: str
    derivation: str
    source: str
    t1: Optional[int] = None
    t2: Optional[int] = None

    def __str__(self) -> str:
        def step(t):
            return "final" if t is None else str(t)
        if self.derivation == FREQUENCY:
            return f"frequency({self.source})"
        if self.derivation == MACRO_CHANGE:
            return f"macro_change({self.source}, {step(self.t1)}, {step(self.t2)})"
        return f"{self.derivation}({self.source}, {step(self.t1)})"

    @property
    def per_ensemble(self) -> bool:
        return self.derivation == FREQUENCY


def _at(series: list, t: Optional[int], what: str) -> float:
    if t is None:
        return series[-1]
    if not 0 <= t < len(series):
        raise MeasurementError(f"{what}: step {t} outside [0, {len(series) - 1}]")
    return series[t]


def measure(table: ClassificationTable, v: MeasurementVariable, within_cell: bool = False) -> list[float]:
    """Values of *v*, one per successful run (length 1 for frequencies)."""
    if v.derivation not in DERIVATIONS:
        raise MeasurementError(f"{v.name}: unknown derivation {v.derivation!r}")
    rows = [r for r in table.rows if r.error is None]
    if v.derivation == FREQUENCY:
        if within_cell:
            raise MeasurementError(f"{v.name}: a frequency is one value per ensemble and cannot be correlated within it")
        if v.source not in table.patterns:
            raise MeasurementError(f"{v.name}: unknown pattern {v.source!r}")
        return [frequency(table, v.source).estimate]
    if v.derivation in (MACRO_AT, MACRO_CHANGE):
        if v.source not in table.macros:
            raise MeasurementError(f"{v.name}: unknown macro {v.source!r}")
        if v.derivation == MACRO_AT:
            return [float(_at(r.macros[v.source], v.t1, v.name)) for r in rows]
        return [float(_at(r.macros[v.source], v.t2, v.name) - _at(r.macros[v.source], v.t1, v.name)) for r in rows]
    if v.source not in table.patterns:
        raise MeasurementError(f"{v.name}: unknown pattern {v.source!r}")
    if v.source in table.state_patterns:
        return [float(_at(r.series[v.source], v.t1, v.name)) for r in rows]
    if v.t1 is not None:
        raise MeasurementError(f"{v.name}: event pattern {v.source!r} has a whole-trace count only (use 'final')")
    return [float(r.counts[v.source]) for r in rows]


# --- inter-level models ------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    kind: str = CORRELATION
    sign: str = "+"
    strength: float = 0.0
    directed: bool = True
    method: str = "pearson"

    @property
    def label(self) -> str:
        return f"{self.source}{'->' if self.directed else '--'}{self.target}"

    def __str__(self) -> str:
        tail = " spearman" if self.method == "spearman" else ""
        arrow = "->" if self.directed else "--"
        return f"edge {self.source} {arrow} {self.target} {self.kind} {self.sign} {self.strength!r}{tail}"


@dataclass(frozen=True)
class InterLevelModel:
    nodes: tuple  # MeasurementVariable, in declaration order
    edges: tuple

    def node(self, name: str) -> Optional[MeasurementVariable]:
        return next((n for n in self.nodes if n.name == name), None)

    def format(self) -> str:
        lines = [f"node {n.name} = {n}" for n in self.nodes] + [str(e) for e in self.edges]
        return "\n".join(lines) + "\n"


def validate_inter_level_model(m: InterLevelModel) -> list[str]:
    problems = []
    names = [n.name for n in m.nodes]
    for n in set(names):
        if names.count(n) > 1:
            problems.append(f"node {n!r} declared twice")
    for e in m.edges:
        for end in (e.source, e.target):
            if end not in names:
                problems.append(f"edge {e.label}: undeclared node {end!r}")
        if not 0.0 <= e.strength <= 1.0:
            problems.append(f"edge {e.label}: strength {e.strength} outside [0, 1]")
        if e.sign not in ("+", "-", "*"):
            problems.append(f"edge {e.label}: sign must be +, - or *")
        if e.kind not in (CORRELATION, CAUSAL):
            problems.append(f"edge {e.label}: unknown kind {e.kind!r}")
        if e.method not in ("pearson", "spearman"):
            problems.append(f"edge {e.label}: unknown method {e.method!r}")
    return problems


def _step(ts: TokenStream) -> Optional[int]:
    if ts.accept("final"):
        return None
    tok = ts.next()
    if tok.kind != "NUMBER" or "." in tok.text:
        raise ParseError([Diagnostic("syntax", f"expected a step or 'final', found {tok.text!r}", tok.line, tok.col)])
    return int(tok.text)


def _derivation(ts: TokenStream, name: str) -> MeasurementVariable:
    tok = ts.expect_name("derivation")
    if tok.text not in DERIVATIONS:
        raise ParseError([Diagnostic("syntax", f"unknown derivation {tok.text!r}", tok.line, tok.col)])
    ts.expect("(")
    source = ts.expect_name("pattern or macro").text
    t1 = t2 = None
    if tok.text != FREQUENCY:
        ts.expect(",")
        t1 = _step(ts)
        if tok.text == MACRO_CHANGE:
            ts.expect(",")
            t2 = _step(ts)
    ts.expect(")")
    return MeasurementVariable(name, tok.text, source, t1, t2)


def parse_inter_level(text: str) -> InterLevelModel:
    nodes, edges, diags = [], [], []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        try:
            ts = TokenStream(tokenize(line, number))
            kw = ts.expect_name("'node' or 'edge'")
            if kw.text == "node":
                name = ts.expect_name("node name").text
                ts.expect("=")
                nodes.append(_derivation(ts, name))
            elif kw.text == "edge":
                src = ts.expect_name("node").text
                arrow = ts.next()
                if arrow.text not in ("->", "--"):
                    raise ParseError([Diagnostic("syntax", f"expected '->' or '--', found {arrow.text!r}", arrow.line, arrow.col)])
                dst = ts.expect_name("node").text
                kind = ts.expect_name("edge kind").text
                if kind == "declared" and ts.accept("-"):
                    kind += "-" + ts.expect_name("edge kind").text
                sign_tok = ts.next()
                sign = sign_tok.text
                strength_tok = ts.next()
                if strength_tok.kind != "NUMBER":
                    raise ParseError([Diagnostic("syntax", "expected a strength", strength_tok.line, strength_tok.col)])
                method = "pearson"
                if ts.peek.kind == "NAME":
                    method = ts.next().text
                edges.append(Edge(src, dst, kind, sign, float(strength_tok.text), arrow.text == "->", method))
            else:
                raise ParseError([Diagnostic("syntax", f"expected 'node' or 'edge', found {kw.text!r}", kw.line, kw.col)])
            ts.expect_eof()
        except ParseError as exc:
            diags.extend(exc.diagnostics)
    m = InterLevelModel(tuple(nodes), tuple(edges))
    diags += [Diagnostic("invalid model", p) for p in validate_inter_level_model(m)]
    if diags:
        raise ParseError(diags)
    return m


@dataclass(frozen=True)
class EdgeVerdict:
    edge: Edge
    coefficient: Optional[float]
    lo: Optional[float]
    hi: Optional[float]
    n: int
    status: str
    notes: tuple = ()

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def describe(self) -> str:
        if self.coefficient is None:
            body = "r=NA"
        else:
            body = f"r={self.coefficient:.6f} ci=[{self.lo:.6f}, {self.hi:.6f}]"
        notes = f" ({', '.join(self.notes)})" if self.notes else ""
        return f"{self.edge.label} {self.edge.kind} {self.edge.sign} {self.edge.strength:g}: {self.status} {body} n={self.n}{notes}"


Z95 = NormalDist().inv_cdf(0.975)


def correlation(x: Sequence[float], y: Sequence[float], method: str = "pearson") -> Optional[float]:
    """Pearson (or Spearman rank) correlation; None when either side is constant."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if method == "spearman":
        a, b = rankdata(a), rankdata(b)
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = float(np.dot(da, da)), float(np.dot(db, db))
    if saa == 0.0 or sbb == 0.0 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return None
    r = float(np.dot(da, db)) / math.sqrt(saa * sbb)
    return max(-1.0, min(1.0, r))


def fisher_interval(r: float, n: int, method: str = "pearson") -> tuple[float, float]:
    if abs(r) == 1.0:
        return r, r
    if n <= 3:
        return -1.0, 1.0
    scale = 1.06 if method == "spearman" else 1.0
    se = math.sqrt(scale / (n - 3))
    z = math.atanh(r)
    return math.tanh(z - Z95 * se), math.tanh(z + Z95 * se)


def _edge_verdict(e: Edge, x, y) -> EdgeVerdict:
    notes = ("association-only",) if e.kind == CAUSAL else ()
    r = correlation(x, y, e.method)
    if r is None:
        return EdgeVerdict(e, None, None, None, len(x), INDETERMINATE, notes + ("zero variance",))
    lo, hi = fisher_interval(r, len(x), e.method)
    ok = abs(r) >= e.strength
    if e.sign == "+":
        ok = ok and r > 0 and lo > 0
    elif e.sign == "-":
        ok = ok and r < 0 and hi < 0
    return EdgeVerdict(e, r, lo, hi, len(x), PASS if ok else FAIL, notes)


def check_inter_level(m: InterLevelModel, vectors: dict) -> list[EdgeVerdict]:
    """Verdict per edge from one numeric vector per node."""
    problems = validate_inter_level_model(m)
    if problems:
        raise ValueError("; ".join(problems))
    used = {e.source for e in m.edges} | {e.target for e in m.edges}
    missing = used - set(vectors)
    if missing:
        raise ValueError(f"no vector for node(s) {sorted(missing)}")
    lengths = {len(vectors[n]) for n in used}
    if len(lengths) > 1:
        raise ValueError(f"vector length mismatch: {sorted(lengths)}")
    if lengths and min(lengths) < 3:
        raise ValueError(f"need at least 3 observations per node, got {min(lengths)}")
    return [_edge_verdict(e, vectors[e.source], vectors[e.target]) for e in m.edges]


def measure_model(table: ClassificationTable, m: InterLevelModel, within_cell: bool = True) -> dict:
    return {n.name: measure(table, n, within_cell=within_cell) for n in m.nodes}


def check_table(m: InterLevelModel, table: ClassificationTable) -> list[EdgeVerdict]:
    """Measure every node on *table* and check every edge."""
    return check_inter_level(m, measure_model(table, m))


# --- sweep -------------------------------------------------------------------


@dataclass
class Cell:
    index: tuple
    params: dict
    stats: dict = field(default_factory=dict)  # name -> float or None
    verdicts: list = field(default_factory=list)
    error: Optional[str] = None


@dataclass
class CellMatrix:
    axes: list  # [(parameter, [values...]), ...]
    cells: dict  # index tuple -> Cell

    @property
    def shape(self) -> tuple:
        return tuple(len(v) for _, v in self.axes)

    def stat_names(self) -> list:
        names: dict = {}
        for c in self.cells.values():
            for k in c.stats:
                names[k] = None
        return list(names)

    def array(self, stat: str) -> np.ndarray:
        out = np.full(self.shape, np.nan)
        for idx, c in self.cells.items():
            v = c.stats.get(stat)
            if v is not None:
                out[idx] = v
        return out

    @classmethod
    def from_array(cls, axes: list, values, stat: str = "value") -> "CellMatrix":
        arr = np.asarray(values, dtype=float)
        cells = {}
        for idx in product(*(range(len(v)) for _, v in axes)):
            v = arr[idx]
            params = {name: vals[i] for (name, vals), i in zip(axes, idx)}
            cells[idx] = Cell(idx, params, {stat: None if math.isnan(v) else float(v)})
        return cls(list(axes), cells)

    def dumps(self) -> str:
        """Plot-ready TSV, one line per cell."""
        stats = self.stat_names()
        head = [f"{n}:axis" for n, _ in self.axes] + [f"{s}:numeric" for s in stats] + ["error:categorical"]
        lines = ["\t".join(head)]
        for idx in sorted(self.cells):
            c = self.cells[idx]
            row = [format_value(c.params[n]) for n, _ in self.axes]
            row += ["" if c.stats.get(s) is None else repr(c.stats[s]) for s in stats]
            row.append(c.error or "")
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"


def loads_cells(text: str) -> CellMatrix:
    """Inverse of :meth:`CellMatrix.dumps`."""
    lines = text.rstrip("\n").split("\n")
    header = [c.rsplit(":", 1) for c in lines[0].split("\t")]
    if not lines[0] or any(len(h) != 2 for h in header):
        raise ValueError("cell file header cells must be name:type")
    axis_names = [n for n, t in header if t == "axis"]
    stat_names = [n for n, t in header if t == "numeric"]
    rows = [dict(zip([h[0] for h in header], ln.split("\t"))) for ln in lines[1:]]
    values = {a: [] for a in axis_names}
    for r in rows:
        for a in axis_names:
            v = parse_value(r[a])
            if v not in values[a]:
                values[a].append(v)
    axes = [(a, sorted(values[a])) for a in axis_names]
    cells = {}
    for r in rows:
        idx = tuple(vals.index(parse_value(r[a])) for a, vals in axes)
        params = {a: parse_value(r[a]) for a in axis_names}
        stats = {s: (float(r[s]) if r[s] else None) for s in stat_names}
        cells[idx] = Cell(idx, params, stats, error=r.get("error") or None)
    return CellMatrix(axes, cells)


def sweep(spec: ModelSpec, grids: dict, plan: SamplingPlan, m: InterLevelModel, patterns=(), macros=()) -> CellMatrix:
    """Sample every grid cell with the same base seed and check *m* per cell.

    Cell statistics are ``edge:<label>`` coefficients for edges between
    per-run nodes and ``freq:<pattern>`` frequencies for every pattern.
    Using one base seed across cells gives common random numbers, so cell
    differences reflect the parameters rather than seed noise.
    """
    if plan.n < 3:
        raise ValueError("each cell needs at least 3 runs")
    for name, values in grids.items():
        decl = spec.param(name)
        if decl is None:
            raise ValueError(f"unknown parameter {name!r}")
        for v in values:
            if not decl.domain.contains(v):
                raise ValueError(f"parameter {name!r}: grid value {format_value(v)} outside {decl.domain}")
    axes = [(name, list(values)) for name, values in grids.items()]
    per_run = [e for e in m.edges if not (m.node(e.source).per_ensemble or m.node(e.target).per_ensemble)]
    run_nodes = InterLevelModel(tuple(n for n in m.nodes if not n.per_ensemble), tuple(per_run))
    pattern_names = [n for n, _ in (patterns.items() if isinstance(patterns, dict) else patterns)]
    cells = {}
    for idx in product(*(range(len(v)) for _, v in axes)):
        params = {name: vals[i] for (name, vals), i in zip(axes, idx)}
        cell = Cell(idx, params)
        try:
            table = sample(spec, plan.with_constants(params), patterns, macros)
            for p in pattern_names:
                cell.stats[f"freq:{p}"] = frequency(table, p).estimate
            for n in m.nodes:
                if n.per_ensemble:
                    cell.stats[f"node:{n.name}"] = measure(table, n)[0]
            cell.verdicts = check_inter_level(run_nodes, measure_model(table, run_nodes))
            for v in cell.verdicts:
                cell.stats[f"edge:{v.edge.label}"] = v.coefficient
        except (ValueError, KeyError) as exc:
            cell.error = str(exc)
        cells[idx] = cell
    return CellMatrix(axes, cells)


# --- partition -----------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    id: str
    bounds: tuple  # per axis (first index, last index), inclusive
    fitted: float
    spread: float
    cells: int

    def ranges(self, axes) -> list:
        return [(name, vals[lo], vals[hi]) for (name, vals), (lo, hi) in zip(axes, self.bounds)]


@dataclass(frozen=True)
class Slab:
    """A parent node: one axis restricted to a range, the others unrestricted."""

    id: str
    axis: int
    lo: int
    hi: int
    contained: tuple
    overlap: tuple


@dataclass
class RegionPartition:
    axes: list
    stat: str
    tolerance: float
    regions: list
    slabs: list
    parents: dict  # region id -> [slab id, ...]; "root" when no slab applies
    excluded: list  # indices of cells without a statistic

    def region_of(self, index: tuple) -> list:
        return [r.id for r in self.regions if all(lo <= i <= hi for i, (lo, hi) in zip(index, r.bounds))]

    def _rng(self, axis: int, lo: int, hi: int) -> str:
        name, vals = self.axes[axis]
        return f"{name}=[{format_value(vals[lo])}, {format_value(vals[hi])}]"

    def region_condition(self, r: Region) -> str:
        return " and ".join(self._rng(a, lo, hi) for a, (lo, hi) in enumerate(r.bounds))

    def report(self) -> str:
        lines = [f"statistic {self.stat}", f"tolerance {self.tolerance!r}", f"regions {len(self.regions)}"]
        for r in self.regions:
            lines.append(f"region {r.id}")
            lines.append(f"  ranges {self.region_condition(r)}")
            lines.append(f"  fitted {self.stat}={r.fitted!r} spread={r.spread!r} cells={r.cells}")
            lines.append(f"  parents {', '.join(self.parents[r.id])}")
            lines.append(f"  defines IMPLICIT({self.stat} in [{r.fitted - self.tolerance:.6g}, {r.fitted + self.tolerance:.6g}]"
                         f" when {self.region_condition(r)})")
        for s in self.slabs:
            lines.append(f"parent {s.id} {self._rng(s.axis, s.lo, s.hi)}")
            lines.append(f"  contains {', '.join(s.contained) or '-'}")
            lines.append(f"  overlaps {', '.join(s.overlap) or '-'}")
        lines.append("excluded " + (" ".join(",".join(map(str, i)) for i in self.excluded) or "none"))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "statistic": self.stat,
            "tolerance": self.tolerance,
            "axes": [{"name": n, "values": [format_value(v) for v in vals]} for n, vals in self.axes],
            "regions": [
                {"id": r.id, "bounds": [list(b) for b in r.bounds],
                 "ranges": [{"axis": n, "lo": format_value(lo), "hi": format_value(hi)} for n, lo, hi in r.ranges(self.axes)],
                 "fitted": r.fitted, "spread": r.spread, "cells": r.cells, "parents": self.parents[r.id]}
                for r in self.regions
            ],
            "parents": [
                {"id": s.id, "axis": self.axes[s.axis][0], "bounds": [s.lo, s.hi],
                 "contains": list(s.contained), "overlaps": list(s.overlap)}
                for s in self.slabs
            ],
            "excluded": [list(i) for i in self.excluded],
        }

    @classmethod
    def from_json(cls, data: dict) -> "RegionPartition":
        axes = [(a["name"], [parse_value(v) for v in a["values"]]) for a in data["axes"]]
        regions = [Region(r["id"], tuple(tuple(b) for b in r["bounds"]), r["fitted"], r["spread"], r["cells"])
                   for r in data["regions"]]
        slabs = [Slab(s["id"], [n for n, _ in axes].index(s["axis"]), s["bounds"][0], s["bounds"][1],
                      tuple(s["contains"]), tuple(s["overlaps"])) for s in data["parents"]]
        parents = {r["id"]: list(r["parents"]) for r in data["regions"]}
        return cls(axes, data["statistic"], data["tolerance"], regions, slabs, parents,
                   [tuple(i) for i in data["excluded"]])

    def dumps_json(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _box_values(arr: np.ndarray, box: tuple) -> np.ndarray:
    sl = tuple(slice(lo, hi + 1) for lo, hi in box)
    v = arr[sl].ravel()
    return v[~np.isnan(v)]


def _spread(v: np.ndarray) -> float:
    return float(v.max() - v.min()) if v.size else 0.0


def _sse(v: np.ndarray) -> float:
    return float(((v - v.mean()) ** 2).sum()) if v.size else 0.0


def _split(arr: np.ndarray, box: tuple, tol: float, out: list) -> None:
    vals = _box_values(arr, box)
    if _spread(vals) <= tol:
        out.append(box)
        return
    best = None
    for axis, (lo, hi) in enumerate(box):
        for cut in range(lo, hi):
            left = box[:axis] + ((lo, cut),) + box[axis + 1:]
            right = box[:axis] + ((cut + 1, hi),) + box[axis + 1:]
            cost = _sse(_box_values(arr, left)) + _sse(_box_values(arr, right))
            if best is None or cost < best[0] - 1e-12:
                best = (cost, left, right)
    _split(arr, best[1], tol, out)
    _split(arr, best[2], tol, out)


def _union(a: tuple, b: tuple) -> Optional[tuple]:
    """Bounding box of a and b if they tile it exactly, else None."""
    diff = [k for k in range(len(a)) if a[k] != b[k]]
    if len(diff) != 1:
        return None
    k = diff[0]
    (alo, ahi), (blo, bhi) = a[k], b[k]
    if ahi + 1 == blo or bhi + 1 == alo:
        return a[:k] + ((min(alo, blo), max(ahi, bhi)),) + a[k + 1:]
    return None


def _merge(arr: np.ndarray, boxes: list, tol: float) -> list:
    boxes = list(boxes)
    while True:
        best = None
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                u = _union(boxes[i], boxes[j])
                if u is None:
                    continue
                s = _spread(_box_values(arr, u))
                if s <= tol and (best is None or s < best[0]):
                    best = (s, i, j, u)
        if best is None:
            return boxes
        _, i, j, u = best
        boxes = [b for k, b in enumerate(boxes) if k not in (i, j)] + [u]


def partition(matrix: CellMatrix, tolerance: float, stat: Optional[str] = None) -> RegionPartition:
    """Split the grid into axis-aligned regions of near-constant statistic.

    Cells without a value for *stat* are excluded from fitting and reported,
    though every cell still lies in exactly one region.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be > 0")
    if stat is None:
        names = matrix.stat_names()
        if not names:
            raise ValueError("matrix has no statistics")
        stat = next((s for s in names if s.startswith("edge:")), names[0])
    arr = matrix.array(stat)
    if np.isnan(arr).all():
        raise ValueError(f"no cell has a value for {stat!r}")
    full = tuple((0, n - 1) for n in arr.shape)
    leaves: list = []
    _split(arr, full, tolerance, leaves)
    boxes = _merge(arr, leaves, tolerance)
    boxes.sort()
    regions = []
    for k, box in enumerate(boxes, start=1):
        vals = _box_values(arr, box)
        fitted = float(vals.mean()) if vals.size else float("nan")
        size = int(np.prod([hi - lo + 1 for lo, hi in box]))
        regions.append(Region(f"R{k}", box, fitted, _spread(vals), size))
    slabs, parents = _heterarchy(regions, full)
    excluded = [tuple(int(i) for i in idx) for idx in zip(*np.nonzero(np.isnan(arr)))]
    return RegionPartition(matrix.axes, stat, tolerance, regions, slabs, parents, excluded)


def _heterarchy(regions: list, full: tuple):
    slab_map: dict = {}
    parents: dict = {r.id: [] for r in regions}
    for r in regions:
        for axis, (lo, hi) in enumerate(r.bounds):
            if (lo, hi) == full[axis]:
                continue
            slab_box = full[:axis] + ((lo, hi),) + full[axis + 1:]
            if slab_box == r.bounds:
                continue
            slab_map.setdefault((axis, lo, hi), None)
    slabs = []
    for k, (axis, lo, hi) in enumerate(sorted(slab_map), start=1):
        contained, overlap = [], []
        for r in regions:
            rlo, rhi = r.bounds[axis]
            if lo <= rlo and rhi <= hi:
                contained.append(r.id)
            elif rlo <= hi and lo <= rhi:
                overlap.append(r.id)
        slab = Slab(f"P{k}", axis, lo, hi, tuple(contained), tuple(overlap))
        slabs.append(slab)
        for rid in contained:
            parents[rid].append(slab.id)
    for rid, ps in parents.items():
        if not ps:
            ps.append("root")
    return slabs, parents


__all__ = [
    "CAUSAL", "CORRELATION", "Cell", "CellMatrix", "Edge", "EdgeVerdict", "FAIL", "INDETERMINATE",
    "InterLevelModel", "MeasurementError", "MeasurementVariable", "PASS", "Region", "RegionPartition", "Slab",
    "check_inter_level", "check_table", "correlation", "fisher_interval", "measure", "measure_model",
    "loads_cells", "parse_inter_level", "partition", "sweep", "validate_inter_level_model",
]
