import itertools
import math
import random
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import stats

from abmlevels.ensemble import SamplingPlan, sample
from abmlevels.lexing import ParseError
from abmlevels.levels import (
    CellMatrix, MeasurementError, MeasurementVariable, RegionPartition, check_inter_level, check_table, correlation,
    fisher_interval, loads_cells, measure, parse_inter_level, partition, sweep,
)
from abmlevels.modelparse import parse_model
from abmlevels.patterns import parse_pattern_file

from conftest import demo_library

XY = parse_inter_level("node x = macro_at(m, 0)\nnode y = macro_at(m, final)\nedge x -> y correlation + 0.5\n")

FLIP = parse_model("""model flip
params
  p: decimal[0, 1, 2] = 0.5
agents
  agent A
    a: int[0, 9]
    b: decimal[-9, 9, 2]
    rule r: when true do b := a * (p - 0.5)
population
  A 5: a = random
""")
FLIP_LIB = parse_pattern_file("macro ma := mean(a)\nmacro mb := mean(b)\npattern big := IMPLICIT(ma, final >= 5)\n", FLIP)
FLIP_ILM = parse_inter_level("node xa = macro_at(ma, 0)\nnode xb = macro_at(mb, final)\nnode fb = frequency(big)\n"
                             "edge xa -> xb correlation * 0.5\n")


def noisy_line(n=100, seed=0):
    rng = random.Random(seed)
    x = [rng.uniform(0, 1) for _ in range(n)]
    y = [2 * v + rng.uniform(-0.01, 0.01) for v in x]
    return x, y


# --- measurement ------------------------------------------------------------------


def test_measure_lengths_and_errors():
    spec, lib = demo_library("theft")
    t = sample(spec, SamplingPlan.make(7, 4), lib.patterns, lib.macros.values())
    assert len(measure(t, MeasurementVariable("x", "macro_at", "thefts", None))) == 7
    assert measure(t, MeasurementVariable("x", "macro_change", "thefts", 0, None)) == [1.0] * 7
    assert measure(t, MeasurementVariable("f", "frequency", "any_theft")) == [1.0]
    assert measure(t, MeasurementVariable("c", "count_at", "thief", 1)) == [0.0] * 7
    with pytest.raises(MeasurementError):
        measure(t, MeasurementVariable("x", "macro_at", "nosuch", None))
    with pytest.raises(MeasurementError):
        measure(t, MeasurementVariable("f", "frequency", "any_theft"), within_cell=True)
    with pytest.raises(MeasurementError):
        measure(t, MeasurementVariable("x", "macro_at", "thefts", 9))


def test_inter_level_parse_print_round_trip():
    text = ("node a = macro_at(m, 0)\nnode b = macro_change(m, 0, final)\nnode c = frequency(p)\n"
            "node d = count_at(s, 2)\nedge a -> b correlation + 0.5\nedge b -- d declared-causal - 0.25 spearman\n")
    m = parse_inter_level(text)
    assert parse_inter_level(m.format()) == m
    assert [e.method for e in m.edges] == ["pearson", "spearman"]


@pytest.mark.parametrize("text", [
    "node a = macro_at(m, 0)\nedge a -> z correlation + 0.5\n",
    "node a = macro_at(m, 0)\nnode b = macro_at(m, 1)\nedge a -> b correlation + 1.5\n",
    "node a = median(m)\n",
    "node a = macro_at(m, 0)\nnode a = macro_at(m, 1)\n",
])
def test_inter_level_model_errors(text):
    with pytest.raises(ParseError):
        parse_inter_level(text)


# --- correlation and checks ------------------------------------------------------


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=40))
def test_correlation_matches_scipy(pairs):
    x, y = zip(*pairs)
    r = correlation(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        assert r is None
        return
    assume(np.std(x) > 1e-6 and np.std(y) > 1e-6)
    assert r == pytest.approx(stats.pearsonr(x, y)[0], abs=1e-9)
    rho = correlation(x, y, "spearman")
    assert rho == pytest.approx(stats.spearmanr(x, y)[0], abs=1e-9)


def test_fisher_interval_closed_form():
    r, n = 0.5, 28
    se = 1 / math.sqrt(n - 3)
    lo, hi = fisher_interval(r, n)
    assert lo == pytest.approx(math.tanh(math.atanh(r) - 1.959963984540054 * se))
    assert hi == pytest.approx(math.tanh(math.atanh(r) + 1.959963984540054 * se))
    slo, shi = fisher_interval(r, n, "spearman")
    assert slo < lo and shi > hi
    assert fisher_interval(1.0, 10) == (1.0, 1.0)
    assert fisher_interval(0.3, 3) == (-1.0, 1.0)


def test_check_examples():
    x, y = noisy_line()
    rng = random.Random(42)
    noise = [rng.gauss(0, 1) for _ in x]
    v = check_inter_level(XY, {"x": x, "y": y})[0]
    assert v.passed and v.coefficient >= 0.99
    assert not check_inter_level(XY, {"x": x, "y": noise})[0].passed
    flat = check_inter_level(XY, {"x": x, "y": [1.0] * len(x)})[0]
    assert flat.status == "indeterminate" and flat.coefficient is None
    with pytest.raises(ValueError):
        check_inter_level(XY, {"x": x, "y": y[:-1]})
    with pytest.raises(ValueError):
        check_inter_level(XY, {"x": x[:2], "y": y[:2]})


def test_sign_and_causal_notes():
    x, y = noisy_line()
    neg = parse_inter_level("node x = macro_at(m, 0)\nnode y = macro_at(m, 1)\nedge x -> y declared-causal - 0.5\n")
    v = check_inter_level(neg, {"x": x, "y": y})[0]
    assert not v.passed and "association-only" in v.notes
    v = check_inter_level(neg, {"x": x, "y": [-a for a in y]})[0]
    assert v.passed
    weak = parse_inter_level("node x = macro_at(m, 0)\nnode y = macro_at(m, 1)\nedge x -> y correlation * 0.999999\n")
    assert not check_inter_level(weak, {"x": x, "y": y})[0].passed


@settings(max_examples=150)
@given(st.integers(0, 10**6), st.floats(0.01, 100), st.floats(-50, 50), st.sampled_from(["x", "y"]))
def test_verdicts_invariant_under_positive_affine_rescaling(seed, scale, shift, which):
    rng = random.Random(seed)
    x = [rng.gauss(0, 1) for _ in range(30)]
    y = [a * rng.uniform(-1, 1) + rng.gauss(0, 1) for a in x]
    base = check_inter_level(XY, {"x": x, "y": y})[0]
    moved = {"x": x, "y": y}
    moved[which] = [scale * v + shift for v in moved[which]]
    after = check_inter_level(XY, moved)[0]
    assert after.status == base.status
    assert after.coefficient == pytest.approx(base.coefficient, abs=1e-9)


# --- sweep ------------------------------------------------------------------------


def test_single_cell_sweep_equals_direct_check():
    plan = SamplingPlan.make(12, 1, base_seed=3)
    mat = sweep(FLIP, {"p": [Decimal("0.8")]}, plan, FLIP_ILM, FLIP_LIB.patterns, FLIP_LIB.macros.values())
    direct = sample(FLIP, plan.with_constants({"p": Decimal("0.8")}), FLIP_LIB.patterns, FLIP_LIB.macros.values())
    cell = mat.cells[(0,)]
    runnable = parse_inter_level("node xa = macro_at(ma, 0)\nnode xb = macro_at(mb, final)\n"
                                 "edge xa -> xb correlation * 0.5\n")
    assert cell.stats["edge:xa->xb"] == check_table(runnable, direct)[0].coefficient
    assert cell.stats["node:fb"] == measure(direct, FLIP_ILM.node("fb"))[0]
    assert cell.stats["freq:big"] == cell.stats["node:fb"]


def test_three_by_three_sweep_runs_ninety():
    spec = parse_model("model two\nparams\n  p: decimal[0, 1, 1] = 0.5\n  q: decimal[0, 1, 1] = 0.5\nagents\n"
                       "  agent A\n    x: int[0, 9]\n    rule r: when bernoulli(p) and x < 9 do x := x + 1\n"
                       "population\n  A 3: x = random\n")
    lib = parse_pattern_file("macro mx := mean(x)\n", spec)
    ilm = parse_inter_level("node a = macro_at(mx, 0)\nnode b = macro_at(mx, final)\nedge a -> b correlation + 0.1\n")
    grid = {"p": [Decimal("0.1"), Decimal("0.5"), Decimal("0.9")], "q": [Decimal("0.1"), Decimal("0.5"), Decimal("0.9")]}
    mat = sweep(spec, grid, SamplingPlan.make(10, 2), ilm, {}, lib.macros.values())
    assert mat.shape == (3, 3) and len(mat.cells) == 9
    assert all(len(c.verdicts) == 1 and c.verdicts[0].n == 10 for c in mat.cells.values())
    again = sweep(spec, grid, SamplingPlan.make(10, 2), ilm, {}, lib.macros.values())
    assert again.dumps() == mat.dumps()
    assert loads_cells(mat.dumps()).dumps() == mat.dumps()


def test_sweep_detects_sign_flip():
    grid = {"p": [Decimal("0.1"), Decimal("0.3"), Decimal("0.7"), Decimal("0.9")]}
    mat = sweep(FLIP, grid, SamplingPlan.make(20, 1, base_seed=8), FLIP_ILM, FLIP_LIB.patterns,
                FLIP_LIB.macros.values())
    r = mat.array("edge:xa->xb")
    assert all(c.error is None for c in mat.cells.values())
    assert (r[:2] < 0).all() and (r[2:] > 0).all()


def test_sweep_records_cell_errors():
    mat = sweep(FLIP, {"p": [Decimal("0.1")]}, SamplingPlan.make(5, 1), FLIP_ILM, {}, FLIP_LIB.macros.values())
    assert "unknown pattern" in mat.cells[(0,)].error


def test_sweep_rejects_small_plans_and_bad_grids():
    with pytest.raises(ValueError):
        sweep(FLIP, {"p": [Decimal("0.1")]}, SamplingPlan.make(2, 1), FLIP_ILM, {}, FLIP_LIB.macros.values())
    with pytest.raises(ValueError):
        sweep(FLIP, {"p": [Decimal("1.5")]}, SamplingPlan.make(3, 1), FLIP_ILM, {}, FLIP_LIB.macros.values())


# --- partition ----------------------------------------------------------------------

AXES = [("p1", [1, 2, 3, 4]), ("p2", [1, 2, 3, 4])]


def layout_matrix(values):
    return CellMatrix.from_array(AXES, values, stat="edge:x->y")


THREE_REGIONS = [[0.9, 0.9, 0.1, 0.1],
         [0.9, 0.9, 0.1, 0.1],
         [-0.5, -0.5, -0.5, -0.5],
         [-0.5, -0.5, -0.5, -0.5]]


def test_uniform_and_loose_tolerance_give_one_region():
    part = partition(layout_matrix(np.full((4, 4), 0.3)), 0.01)
    assert [r.bounds for r in part.regions] == [((0, 3), (0, 3))]
    assert part.parents == {"R1": ["root"]}
    assert len(partition(layout_matrix(THREE_REGIONS), 5.0).regions) == 1


def test_three_region_layout_and_heterarchy():
    part = partition(layout_matrix(THREE_REGIONS), 0.1)
    bounds = {r.bounds: r for r in part.regions}
    m1, m2, m3 = ((0, 1), (0, 1)), ((0, 1), (2, 3)), ((2, 3), (0, 3))
    assert set(bounds) == {m1, m2, m3}
    r1 = bounds[m1]
    assert len(part.parents[r1.id]) == 2
    slabs = {s.id: s for s in part.slabs}
    axes_of = {slabs[p].axis for p in part.parents[r1.id]}
    assert axes_of == {0, 1}
    assert part.parents[bounds[m3].id] == ["root"]
    p2_slab = next(slabs[p] for p in part.parents[r1.id] if slabs[p].axis == 1)
    assert bounds[m3].id in p2_slab.overlap
    assert RegionPartition.from_json(part.to_json()).report() == part.report()
    assert "parents P" in part.report()


def test_partition_errors_and_excluded_cells():
    with pytest.raises(ValueError):
        partition(layout_matrix(THREE_REGIONS), 0)
    holes = np.array(THREE_REGIONS, dtype=float)
    holes[0, 0] = np.nan
    part = partition(layout_matrix(holes), 0.1)
    assert part.excluded == [(0, 0)]
    assert all(part.region_of(idx) for idx in itertools.product(range(4), range(4)))


@st.composite
def guillotine_layouts(draw, shape=(5, 5)):
    """Random axis-aligned rectangle tilings built by recursive cuts."""
    boxes = [((0, shape[0] - 1), (0, shape[1] - 1))]
    for _ in range(draw(st.integers(0, 4))):
        i = draw(st.integers(0, len(boxes) - 1))
        box = boxes[i]
        axis = draw(st.integers(0, 1))
        lo, hi = box[axis]
        if lo == hi:
            continue
        cut = draw(st.integers(lo, hi - 1))
        left = list(box)
        right = list(box)
        left[axis], right[axis] = (lo, cut), (cut + 1, hi)
        boxes[i:i + 1] = [tuple(left), tuple(right)]
    return boxes


@settings(max_examples=200)
@given(guillotine_layouts(), st.data(), st.floats(0.01, 0.2))
def test_piecewise_constant_recovery(boxes, data, tol):
    levels = data.draw(st.lists(st.integers(0, 30), min_size=len(boxes), max_size=len(boxes), unique=True))
    gap = 2.2 * tol
    arr = np.zeros((5, 5))
    for box, level in zip(boxes, levels):
        arr[box[0][0]:box[0][1] + 1, box[1][0]:box[1][1] + 1] = level * gap
    # two tiles with the same level that touch would form one region; levels are unique so they never do
    mat = CellMatrix.from_array([("a", list(range(5))), ("b", list(range(5)))], arr)
    part = partition(mat, tol)
    assert sorted(r.bounds for r in part.regions) == sorted(boxes)
    for idx in itertools.product(range(5), range(5)):
        ids = part.region_of(idx)
        assert len(ids) == 1
        region = next(r for r in part.regions if r.id == ids[0])
        assert abs(arr[idx] - region.fitted) <= tol


@settings(max_examples=100)
@given(st.lists(st.floats(-1, 1), min_size=12, max_size=12), st.floats(0.05, 0.5))
def test_partition_covers_and_fits_within_tolerance(values, tol):
    arr = np.array(values).reshape(3, 4)
    mat = CellMatrix.from_array([("a", [1, 2, 3]), ("b", [1, 2, 3, 4])], arr)
    part = partition(mat, tol)
    assert sum(r.cells for r in part.regions) == 12
    for idx in itertools.product(range(3), range(4)):
        ids = part.region_of(idx)
        assert len(ids) == 1
        region = next(r for r in part.regions if r.id == ids[0])
        assert abs(arr[idx] - region.fitted) <= tol + 1e-12
