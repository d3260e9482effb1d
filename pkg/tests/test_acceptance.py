"""Acceptance criteria 1-10.

Each criterion prints one line ``criterion N: PASS|FAIL <detail>``.  Run
under pytest, or directly with ``python3 tests/test_acceptance.py``.
"""

import itertools
import random
import shutil
import subprocess
import sys
import time
from dataclasses import replace
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from abmlevels.cli import DEMOS, demo_text  # noqa: E402
from abmlevels.empirical import Binding, export_measurements, loads_dataset, validate_inter_level  # noqa: E402
from abmlevels.engine import Event, SystemState, run  # noqa: E402
from abmlevels.ensemble import SamplingPlan, exact_frequencies, frequency, sample  # noqa: E402
from abmlevels.levels import (  # noqa: E402
    CellMatrix, INDETERMINATE, check_inter_level, check_table, parse_inter_level, partition, sweep,
)
from abmlevels.matcher import match_event, match_state  # noqa: E402
from abmlevels.modelparse import parse_model  # noqa: E402
from abmlevels.patterns import parse_pattern, parse_pattern_file, project  # noqa: E402

from conftest import demo_library, demo_spec  # noqa: E402


def criterion_1():
    spec, lib = demo_library("adopt")
    start = time.perf_counter()
    exact = exact_frequencies(spec, 3, 64, lib.patterns)
    table = sample(spec, SamplingPlan.make(10_000, 3, base_seed=0), lib.patterns)
    worst = max(abs(frequency(table, p).estimate - float(v)) for p, v in exact.items())
    elapsed = time.perf_counter() - start
    ok = worst <= 0.02 and elapsed < 30
    return ok, f"max |sampled - exact| = {worst:.4f} over {len(exact)} patterns (tol 0.02), {elapsed:.1f}s (< 30s)"


def criterion_2():
    spec, lib = demo_library("coin")
    table = sample(spec, SamplingPlan.make(10_000, 1, base_seed=0), lib.patterns)
    f = frequency(table, "flag_set")
    exact = exact_frequencies(spec, 1, 10, lib.patterns)["flag_set"]
    ok = f.lo <= 0.5 <= f.hi and exact == Fraction(1, 2)
    return ok, f"estimate {f.estimate:.4f}, Wilson 95% [{f.lo:.4f}, {f.hi:.4f}], exact {exact}"


MARRIAGE = "COMPOSE(w.husbID NotNull as H, h.wifeID NotNull as W, h.agentID = H, w.agentID = W)"


def criterion_3():
    rows = [
        {"agentID": 0, "husbID": 1, "wifeID": None},
        {"agentID": 1, "husbID": None, "wifeID": 0},
        {"agentID": 2, "husbID": 3, "wifeID": None},
        {"agentID": 3, "husbID": None, "wifeID": 2},
        {"agentID": 4, "husbID": 0, "wifeID": None},  # husbID set, but agent 0 is not married to agent 4
    ]
    state = SystemState(0, ("Person",) * 5, tuple(rows), {})
    pairs = [(w, h) for w, h in itertools.permutations(range(5), 2)
             if rows[w]["husbID"] is not None and rows[h]["wifeID"] is not None
             and rows[h]["agentID"] == rows[w]["husbID"] and rows[w]["agentID"] == rows[h]["wifeID"]]
    res = match_state(parse_pattern(MARRIAGE, spec=demo_spec("marriage")), state)
    ok = res.instantiations == 2 and len(pairs) == 2 and res.exact
    return ok, f"instantiations {res.instantiations}, pair enumeration {len(pairs)}"


LEVEL1 = "SET {str_i}: (var1 in [0, 5], var2 in [0, 5]) -> (var1 in [1, 5], var2 in [1, 5])"


def criterion_4():
    joint = parse_pattern(LEVEL1)
    only1, only2 = project(joint, {"var1"}), project(joint, {"var2"})
    rng = random.Random(2024)
    joint_hits = counterexamples = leaks = 0
    for k in range(1000):
        src = (("var1", rng.randint(0, 6)), ("var2", rng.randint(0, 6)))
        tgt = (("var1", rng.randint(0, 6)), ("var2", rng.randint(0, 6)))
        e = Event(k // 4 + 1, k % 4, rng.randint(0, 3), "T", "str_i", src, tgt)
        if match_event(joint, e):
            joint_hits += 1
            counterexamples += not (match_event(only1, e) and match_event(only2, e))
        twin = replace(e, rule="str_j")
        leaks += any(match_event(p, twin) for p in (joint, only1, only2))
    ok = counterexamples == 0 and leaks == 0 and joint_hits > 0
    return ok, (f"{joint_hits}/1000 events match the joint SET, {counterexamples} projection counterexamples, "
                f"{leaks} str_j twins matched")


def criterion_5():
    spec = demo_spec("schedule")
    sync = run(spec, seed=0, horizon=3).final_state
    asyn = run(replace(spec, schedule=replace(spec.schedule, kind="async-random")), seed=0, horizon=3).final_state
    ok = sync.agents != asyn.agents
    flags = lambda s: [a["flag"] for a in s.agents]  # noqa: E731
    return ok, f"synchronous final {flags(sync)}, async-random final {flags(asyn)} (seed 0)"


def criterion_6(tmp: Path):
    exe = shutil.which("abmlevels")
    cli = [exe] if exe else [sys.executable, "-m", "abmlevels.cli"]
    subprocess.run(cli + ["demo", "marriage", "--export", "--out", str(tmp)], check=True, capture_output=True)
    blobs = []
    for k in range(5):
        out = tmp / f"run{k}"
        out.mkdir()
        subprocess.run(cli + ["run", "--model", str(tmp / "marriage.abm"), "--seed", "7", "--horizon", "3",
                              "--out", str(out)], check=True, capture_output=True)
        blobs.append((out / "marriage-seed7-h3.trace").read_bytes())
    ok = len(set(blobs)) == 1 and len(blobs[0]) > 0
    return ok, f"{len(set(blobs))} distinct trace file(s) over 5 invocations, {len(blobs[0])} bytes"


XY = parse_inter_level("node x = macro_at(m, 0)\nnode y = macro_at(m, final)\nedge x -> y correlation + 0.5\n")


def criterion_7():
    rng = random.Random(7)
    x = [rng.uniform(0, 1) for _ in range(100)]
    y = [2 * v + rng.uniform(-0.01, 0.01) for v in x]
    noise = [rng.gauss(0, 1) for _ in range(100)]
    line = check_inter_level(XY, {"x": x, "y": y})[0]
    indep = check_inter_level(XY, {"x": x, "y": noise})[0]
    flat = check_inter_level(XY, {"x": x, "y": [3.0] * 100})[0]
    ok = line.passed and line.coefficient >= 0.99 and not indep.passed and flat.status == INDETERMINATE
    return ok, (f"linear r={line.coefficient:.4f} {line.status}, noise r={indep.coefficient:.4f} {indep.status}, "
                f"constant {flat.status}")


def criterion_8():
    tol = 0.05
    values = np.empty((6, 6))
    values[0:3, 0:3] = 0.8   # M1 = [a1,a2] x [b1,b2]
    values[0:3, 3:6] = 0.5   # M2 = [a1,a2] x [b3,b4]
    values[3:6, :] = 0.2     # M3 = [a3,a4] x [b1,b4]
    axes = [("a", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]), ("b", [1, 2, 3, 4, 5, 6])]
    part = partition(CellMatrix.from_array(axes, values, stat="edge:x->y"), tol)
    want = {((0, 2), (0, 2)), ((0, 2), (3, 5)), ((3, 5), (0, 5))}
    got = {r.bounds for r in part.regions}
    m1 = next((r.id for r in part.regions if r.bounds == ((0, 2), (0, 2))), None)
    parents = part.parents.get(m1, [])
    ok = got == want and len(parents) == 2 and "root" not in parents
    return ok, f"{len(part.regions)} regions {'match' if got == want else 'differ'}, M1 parents {parents}"


def criterion_9():
    spec = parse_model("""model flip
params
  p: decimal[0, 1, 2] = 0.8
agents
  agent A
    a: int[0, 9]
    b: decimal[-9, 9, 2]
    rule r: when true do b := a * (p - 0.5)
population
  A 5: a = random
""")
    lib = parse_pattern_file("macro ma := mean(a)\nmacro mb := mean(b)\n", spec)
    ilm = parse_inter_level("node xa = macro_at(ma, 0)\nnode xb = macro_at(mb, final)\n"
                            "node dx = macro_change(ma, 0, final)\n"
                            "edge xa -> xb correlation + 0.5\nedge xa -- xb correlation - 0.3 spearman\n"
                            "edge xb -> dx correlation * 0.2\n")
    table = sample(spec, SamplingPlan.make(60, 2, base_seed=11), {}, lib.macros.values())
    silico = check_table(ilm, table)
    empirical = validate_inter_level(ilm, loads_dataset(export_measurements(table, ilm)), Binding.identity(ilm))
    diffs = [abs(a.coefficient - b.coefficient) for a, b in zip(empirical.verdicts, silico)
             if a.coefficient is not None and b.coefficient is not None]
    same_none = all((a.coefficient is None) == (b.coefficient is None) for a, b in zip(empirical.verdicts, silico))
    statuses = [v.status for v in silico]
    ok = (same_none and max(diffs, default=0) <= 1e-9
          and statuses == [v.status for v in empirical.verdicts])
    return ok, f"max coefficient difference {max(diffs, default=0):.2e} (tol 1e-9), verdicts {statuses}"


def criterion_10():
    spec, lib = demo_library("segregation")
    ilm = parse_inter_level(demo_text("segregation", "ilm"))
    grid = {"intolerance": [Decimal(v) for v in DEMOS["segregation"]["grid"]["intolerance"]]}
    start = time.perf_counter()
    mat = sweep(spec, grid, SamplingPlan(200, DEMOS["segregation"]["horizon"], 0), ilm, lib.patterns,
                lib.macros.values())
    elapsed = time.perf_counter() - start
    freqs = [float(v) for v in mat.array("freq:segregated")]
    ok = all(a <= b for a, b in zip(freqs, freqs[1:])) and elapsed < 120
    return ok, f"frequencies {[round(f, 3) for f in freqs]} over intolerance grid, {elapsed:.1f}s (< 120s)"


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
            7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10}


def evaluate(number, *args):
    ok, detail = CRITERIA[number](*args)
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, tmp_path, capsys):
    args = (tmp_path,) if number == 6 else ()
    ok, line = evaluate(number, *args)
    with capsys.disabled():
        print(f"\n{line}")
    assert ok, line


if __name__ == "__main__":
    import tempfile

    failures = 0
    for n in sorted(CRITERIA):
        with tempfile.TemporaryDirectory() as tmp:
            ok, line = evaluate(n, *((Path(tmp),) if n == 6 else ()))
        print(line)
        failures += not ok
    sys.exit(1 if failures else 0)
