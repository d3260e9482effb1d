from dataclasses import replace
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from abmlevels.engine import (
    MacroVariableDef, RunError, UnboundParameterError, aggregate, macro_series, run, state_at,
)
from abmlevels.expr import parse_expr_text
from abmlevels.modelparse import parse_model
from abmlevels.tracefile import dumps_trace, loads_trace

from conftest import demo_spec

DEMOS = ["toggle", "coin", "adopt", "schedule", "theft", "marriage", "segregation"]


def macro(kind, text, name="m"):
    return MacroVariableDef(name, kind, parse_expr_text(text))


def test_always_false_rule_yields_no_events():
    spec = parse_model("model idle\nagents\n  agent A\n    x: bool\n    rule r: when false do x := true\n"
                       "population\n  A 3: x = random\n")
    tr = run(spec, seed=5, horizon=7)
    assert tr.events == ()
    assert tr.final_state.agents == tr.initial.agents


def test_toggle_hand_execution():
    spec = demo_spec("toggle")
    tr = run(spec, seed=0, horizon=3)
    assert len(tr.events) == 6
    flags = [[a["flag"] for a in s.agents] for s in tr.states()]
    assert flags == [[True, False], [False, True], [True, False], [False, True]]
    assert [(e.step, e.agent) for e in tr.events] == [(1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (3, 1)]
    assert tr.events[0].source_map == {"flag": True}
    assert tr.events[0].target_map == {"flag": False}


def test_state_at_bounds():
    spec = demo_spec("toggle")
    tr = run(spec, seed=0, horizon=3)
    assert state_at(tr, 0).agents == tr.initial.agents
    assert [a["flag"] for a in state_at(tr, 1).agents] == [False, True]
    with pytest.raises(ValueError):
        state_at(tr, 4)
    with pytest.raises(ValueError):
        state_at(tr, -1)


@pytest.mark.parametrize("name", DEMOS)
def test_runs_are_deterministic(name):
    spec = demo_spec(name)
    a = dumps_trace(run(spec, seed=11, horizon=4))
    b = dumps_trace(run(spec, seed=11, horizon=4))
    assert a == b


@pytest.mark.parametrize("name", DEMOS)
def test_trace_file_round_trip(name):
    spec = demo_spec(name)
    tr = run(spec, seed=3, horizon=4)
    text = dumps_trace(tr)
    back = loads_trace(text, spec)
    assert back == tr
    assert dumps_trace(back) == text


def _replay(tr):
    """Independent replay oracle: apply each event's target map to its agent."""
    agents = [dict(a) for a in tr.initial.agents]
    globs = dict(tr.initial.globals)
    out = [([dict(a) for a in agents], dict(globs))]
    events = list(tr.events)
    for t in range(1, tr.horizon + 1):
        for e in [e for e in events if e.step == t]:
            for k, v in e.target:
                if k.startswith("global."):
                    globs[k[len("global."):]] = v
                else:
                    agents[e.agent][k] = v
        out.append(([dict(a) for a in agents], dict(globs)))
    return out


@settings(max_examples=30)
@given(st.sampled_from(DEMOS), st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_replay_soundness(name, seed, horizon):
    spec = demo_spec(name)
    tr = run(spec, seed=seed, horizon=horizon)
    expected = _replay(tr)
    for t in range(horizon + 1):
        s = state_at(tr, t)
        assert [dict(a) for a in s.agents] == expected[t][0]
        assert s.globals == expected[t][1]


@settings(max_examples=30)
@given(st.sampled_from(DEMOS), st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_values_stay_in_domain_and_events_are_attributed(name, seed, horizon):
    spec = demo_spec(name)
    tr = run(spec, seed=seed, horizon=horizon)
    types = {t.name: t for t in spec.agent_types}
    for s in tr.states():
        for type_name, row in zip(s.agent_types, s.agents):
            for v in types[type_name].variables:
                assert v.domain.contains(row[v.name])
    for e in tr.events:
        rule = next(r for r in types[e.agent_type].rules if r.id == e.rule)
        assert set(e.target_map) == {a.target for a in rule.assignments}
        assert set(e.target_map) <= set(e.source_map)


def test_aggregate_examples():
    spec = demo_spec("adopt")
    tr = run(spec, seed=1, horizon=3)
    assert aggregate(tr, macro("proportion_where", "true")) == [1.0] * 4
    const = parse_model("model c\nagents\n  agent A\n    v: int[0, 9]\n    rule r: when false do v := 1\n"
                        "population\n  A 4: v = 3\n")
    assert aggregate(run(const, horizon=2), macro("mean", "v")) == [3.0, 3.0, 3.0]


def test_theft_series():
    spec = demo_spec("theft")
    tr = run(spec, seed=0, horizon=4)
    assert aggregate(tr, macro("count_where", "stolen = true")) == [0.0, 0.0, 1.0, 1.0, 1.0]
    steals = [e for e in tr.events if e.rule == "steal"]
    assert [(e.step, e.agent) for e in steals] == [(2, 1)]


@settings(max_examples=25)
@given(st.sampled_from(["adopt", "segregation", "theft"]), st.integers(0, 1000), st.integers(0, 5))
def test_aggregate_matches_state_by_state_computation(name, seed, horizon):
    spec = demo_spec(name)
    var = {"adopt": "flag", "segregation": "color", "theft": "stolen"}[name]
    tr = run(spec, seed=seed, horizon=horizon)
    series = macro_series(tr, macro("proportion_where", var))
    assert len(series) == horizon + 1
    for t, value in enumerate(series):
        s = state_at(tr, t)
        assert value == Fraction(sum(a[var] for a in s.agents), len(s.agents))


def test_schedule_sensitivity_fixture():
    spec = demo_spec("schedule")
    sync = run(spec, seed=4, horizon=3)
    asyn = run(replace(spec, schedule=replace(spec.schedule, kind="async-random")), seed=4, horizon=3)
    assert [a["flag"] for a in sync.final_state.agents] == [False, True]
    assert len({a["flag"] for a in asyn.final_state.agents}) == 1


def test_runtime_domain_violation_reports_location():
    spec = parse_model("model over\nagents\n  agent A\n    x: int[0, 2]\n    rule up: when true do x := x + 1\n"
                       "population\n  A 2: x = [0, 1]\n")
    with pytest.raises(RunError) as info:
        run(spec, horizon=3)
    err = info.value
    assert (err.step, err.agent, err.rule) == (2, 1, "up")
    assert "domain violation" in str(err)


def test_unbound_parameter():
    spec = parse_model("model p\nparams\n  q: decimal[0, 1, 1]\nagents\n  agent A\n    x: bool\n"
                       "    rule r: when bernoulli(q) do x := true\npopulation\n  A 1\n")
    with pytest.raises(UnboundParameterError):
        run(spec, horizon=1)
    with pytest.raises(RunError):
        run(spec, params={"q": Decimal("1.5")}, horizon=1)
    assert run(spec, params={"q": Decimal("1")}, horizon=1).events


def test_all_matching_mode_fires_every_rule():
    src = ("model two\nagents\n  agent A\n    x: int[0, 9]\n    y: int[0, 9]\n"
           "    rule a: when true do x := x + 1\n    rule b: when true do y := y + 1\npopulation\n  A 1\n"
           "schedule\n  synchronous\n")
    first = run(parse_model(src), horizon=2)
    every = run(parse_model(src + "  mode all-matching\n"), horizon=2)
    assert [e.rule for e in first.events] == ["a", "a"]
    assert [e.rule for e in every.events] == ["a", "b", "a", "b"]
    assert every.final_state.agents[0] == {"x": 2, "y": 2}


def test_synchronous_reads_pre_step_state():
    # a true value spreads along a path: one hop per step when synchronous, all the way when ordered
    src = ("model ring\nagents\n  agent A\n    x: bool\n    rule copy: when any(nbr.x != x) and x = false do x := true\n"
           "population\n  A 3: x = [true, false, false]\ntopology\n  edges 0-1, 1-2\nschedule\n  {}\n")
    sync = run(parse_model(src.format("synchronous")), horizon=1)
    fixed = run(parse_model(src.format("async-fixed 0 1 2")), horizon=1)
    assert [a["x"] for a in sync.final_state.agents] == [True, True, False]
    assert [a["x"] for a in fixed.final_state.agents] == [True, True, True]


def test_marriage_run_forms_two_couples():
    spec = demo_spec("marriage")
    tr = run(spec, horizon=3)
    final = tr.final_state.agents
    assert [(a["husbID"], a["wifeID"]) for a in final] == [(1, None), (None, 0), (3, None), (None, 2)]
    wed = [e for e in tr.events if e.rule == "wed"]
    assert [e.agent for e in wed] == [1, 3]
    for e in wed:
        partner = e.source_map["suitor"]
        assert {f"@{partner}.male", f"@{partner}.husbID"} <= set(e.source_map)
