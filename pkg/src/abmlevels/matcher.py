"""Matching patterns against states, events and traces.

State matching is a backtracking join: every named agent selector is bound
to a distinct agent instance, every ``as NAME`` capture to a value, and a
``= NAME`` leaf is checked once its capture exists.  The number of distinct
complete bindings is reported as the instantiation count.

Trace matching enumerates embeddings, i.e. sets of event positions.
``SEQ`` children occupy strictly increasing positions, ``ALL`` children
occupy disjoint positions in any order, and a window ``w`` requires the
first and last chosen events to lie fewer than ``w`` steps apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import count
from typing import Iterator, Optional

from .engine import Event, SystemState, Trace, macro_series, macro_value
from .expr import _equal
from .patterns import (
    ANY, COMPOSE, SEQ, CETNode, EventPattern, ImplicitCET, StateLeaf, StateNode,
    is_state_pattern,
)
from .values import to_fraction

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    instantiations: int
    witness: Optional[dict] = None
    exact: bool = True
    step: Optional[int] = None  # where a state pattern first matched in a trace


# --- leaf predicates -----------------------------------------------------


def _leaf_ok(leaf: StateLeaf, value, binding: dict) -> bool:
    kind = leaf.kind
    if kind == "any":
        return True
    if kind == "notnull":
        return value is not None
    if kind == "equals":
        return _equal(value, leaf.value)
    if kind == "binding":
        return leaf.ref in binding and _equal(value, binding[leaf.ref])
    if value is None or isinstance(value, bool):
        return False
    if leaf.lo is not None and value < leaf.lo:
        return False
    return leaf.hi is None or value <= leaf.hi


def _capture(leaf: StateLeaf, value, binding: dict) -> Optional[dict]:
    if not _leaf_ok(leaf, value, binding):
        return None
    if leaf.bind is None:
        return binding
    if leaf.bind in binding:
        return binding if _equal(binding[leaf.bind], value) else None
    out = dict(binding)
    out[leaf.bind] = value
    return out


# --- state matching ------------------------------------------------------


def _label(p, counter) -> object:
    """Give each anonymous agent leaf its own selector name."""
    if isinstance(p, StateLeaf):
        if p.is_global or p.agent is not None:
            return p
        return StateLeaf(p.var, False, f"#{next(counter)}", p.agent_type, p.kind, p.lo, p.hi, p.value,
                         p.ref, p.bind, pos=p.pos)
    return StateNode(p.relation, tuple(_label(c, counter) for c in p.children), pos=p.pos)


def _refs(p) -> set:
    if isinstance(p, StateLeaf):
        return {p.ref} if p.kind == "binding" else set()
    return set().union(*(_refs(c) for c in p.children)) if p.children else set()


class _StateSolver:
    def __init__(self, state: SystemState):
        self.state = state
        self.n = len(state.agents)

    def solve(self, p, b: dict) -> Iterator[dict]:
        if isinstance(p, StateLeaf):
            yield from self._leaf(p, b)
        elif p.relation == COMPOSE:
            yield from self._join(list(p.children), b)
        else:
            for c in p.children:
                yield from self.solve(c, b)

    def _leaf(self, leaf: StateLeaf, b: dict) -> Iterator[dict]:
        state = self.state
        if leaf.is_global:
            if leaf.var not in state.globals:
                return
            out = _capture(leaf, state.globals[leaf.var], b)
            if out is not None:
                yield out
            return
        slot = "@" + leaf.agent
        if slot in b:
            candidates = [b[slot]]
        else:
            taken = {v for k, v in b.items() if k.startswith("@")}
            candidates = [i for i in range(self.n) if i not in taken]
        for i in candidates:
            if leaf.agent_type is not None and state.agent_types[i] != leaf.agent_type:
                continue
            row = state.agents[i]
            if leaf.var not in row:
                continue
            out = _capture(leaf, row[leaf.var], b)
            if out is None:
                continue
            if slot not in out:
                out = dict(out)
                out[slot] = i
            yield out

    def _join(self, rest: list, b: dict) -> Iterator[dict]:
        if not rest:
            yield b
            return
        # defer children whose references are not yet captured
        pick = 0
        for k, c in enumerate(rest):
            if _refs(c) <= b.keys():
                pick = k
                break
        child = rest[pick]
        others = rest[:pick] + rest[pick + 1:]
        for nb in self.solve(child, b):
            yield from self._join(others, nb)


def _present(b: dict) -> dict:
    out = {}
    for k, v in b.items():
        if k.startswith("@#"):
            continue
        out[k[1:] if k.startswith("@") else k] = v
    return out


def _solutions(p, solver, b: dict, cap: int):
    seen = set()
    first = None
    exact = True
    for sol in solver.solve(p, b):
        key = frozenset((k, (type(v).__name__, v)) for k, v in sol.items())
        if key in seen:
            continue
        if len(seen) >= cap:
            exact = False
            break
        seen.add(key)
        if first is None:
            first = sol
    return len(seen), first, exact


def match_state(p, state: SystemState, cap: int = DEFAULT_CAP) -> MatchResult:
    """Whether *state* instantiates state pattern *p*, and in how many ways."""
    if not is_state_pattern(p):
        raise TypeError("match_state needs a state pattern")
    labelled = _label(p, count())
    n, first, exact = _solutions(labelled, _StateSolver(state), {}, cap)
    return MatchResult(n > 0, n, _present(first) if first is not None else None, exact, state.step)


def match_state_in_trace(p, trace: Trace, t: Optional[int] = None, cap: int = DEFAULT_CAP) -> MatchResult:
    """Match at step *t*, or at every step reporting the first match."""
    if t is not None:
        from .engine import state_at
        return match_state(p, state_at(trace, t), cap)
    last = None
    for state in trace.states():
        last = match_state(p, state, cap)
        if last.matched:
            return last
    return MatchResult(False, 0, None, True, None)


def state_instantiation_series(p, trace: Trace, cap: int = DEFAULT_CAP) -> list[int]:
    return [match_state(p, s, cap).instantiations for s in trace.states()]


# --- event matching ------------------------------------------------------


class _FlatSolver:
    """State solver over an event substate keyed by variable name."""

    def __init__(self, values: dict):
        self.values = values

    def solve(self, p, b: dict) -> Iterator[dict]:
        if isinstance(p, StateLeaf):
            if p.key in self.values:
                out = _capture(p, self.values[p.key], b)
                if out is not None:
                    yield out
        elif p.relation == COMPOSE:
            yield from self._join(list(p.children), b)
        else:
            for c in p.children:
                yield from self.solve(c, b)

    _join = _StateSolver._join


def rule_selected(p: EventPattern, e: Event) -> bool:
    return p.rules is None or e.rule in p.rules or f"{e.agent_type}.{e.rule}" in p.rules


def match_event(p: EventPattern, e: Event) -> bool:
    """Whether event *e* is an instance of *p*.

    The target side is checked against the state of the event's read set
    after the write, so unwritten variables keep their source values.
    """
    if not rule_selected(p, e):
        return False
    c = p.effective
    src = e.source_map
    post = dict(src)
    post.update(e.target_map)
    sources = _FlatSolver(src).solve(c.source, {}) if c.source is not None else iter([{}])
    for b in sources:
        if c.target is None:
            return True
        for _ in _FlatSolver(post).solve(c.target, b):
            return True
    return False


# --- implicit patterns ---------------------------------------------------


def _compare(a: Fraction, op: str, b: Fraction) -> bool:
    return {
        "<": a < b, "<=": a <= b, "=": a == b, "!=": a != b, ">=": a >= b, ">": a > b,
    }[op]


def implicit_holds(p: ImplicitCET, trace: Trace) -> bool:
    """Evaluate an implicit predicate exactly over the macro series."""
    spec = trace.spec
    threshold = to_fraction(p.threshold)
    if p.selector == "initial":
        return _compare(macro_value(spec, p.macro, trace.initial, trace.param_map), p.op, threshold)
    if p.selector == "final":
        return _compare(macro_value(spec, p.macro, trace.final_state, trace.param_map), p.op, threshold)
    series = macro_series(trace, p.macro)
    if p.selector == "at":
        if not 0 <= p.t1 < len(series):
            return False
        return _compare(series[p.t1], p.op, threshold)
    if p.selector == "eventually":
        return any(_compare(v, p.op, threshold) for v in series)
    if p.selector == "always":
        return all(_compare(v, p.op, threshold) for v in series)
    t1 = p.t1 or 0
    t2 = len(series) - 1 if p.t2 is None else p.t2
    if not (0 <= t1 < len(series) and 0 <= t2 < len(series)):
        return False
    return _compare(series[t2] - series[t1], p.op, threshold)


# --- trace matching ------------------------------------------------------


class _Budget(Exception):
    pass


class _TraceMatcher:
    def __init__(self, trace: Trace, cap: int):
        self.trace = trace
        self.steps = [e.step for e in trace.events]
        self.cap = cap
        self.exact = True

    def _span_ok(self, emb: tuple, window: Optional[int]) -> bool:
        if window is None or len(emb) < 2:
            return True
        return self.steps[emb[-1]] - self.steps[emb[0]] < window

    def embeddings(self, p, top: bool = True) -> list[tuple]:
        if isinstance(p, EventPattern):
            return [(i,) for i, e in enumerate(self.trace.events) if match_event(p, e)]
        if isinstance(p, ImplicitCET):
            return [()] if implicit_holds(p, self.trace) else []
        if isinstance(p, CETNode):
            kids = [self.embeddings(c, top=False) for c in p.children]
            if p.relation == ANY:
                return self._clip(list(dict.fromkeys(e for k in kids for e in k)), top)
            if any(not k for k in kids):
                return []
            out: dict = {}
            limit = self.cap if top else max(self.cap, DEFAULT_CAP)
            try:
                self._combine(kids, 0, (), frozenset(), p, out, limit)
            except _Budget:
                self.exact = False
            return list(out)
        raise TypeError(f"not a complex event pattern: {p!r}")

    def _clip(self, embs: list, top: bool) -> list:
        limit = self.cap if top else max(self.cap, DEFAULT_CAP)
        if len(embs) > limit:
            self.exact = False
            return embs[:limit]
        return embs

    def _combine(self, kids, k, chosen: tuple, used: frozenset, p: CETNode, out: dict, limit: int) -> None:
        if k == len(kids):
            emb = tuple(sorted(used))
            if emb not in out and self._span_ok(emb, p.window):
                if len(out) >= limit:
                    raise _Budget
                out[emb] = None
            return
        last = chosen[-1] if chosen else -1
        for emb in kids[k]:
            if p.relation == SEQ:
                if emb and emb[0] <= last:
                    continue
                nxt_last = emb[-1] if emb else last
            else:
                if used.intersection(emb):
                    continue
                nxt_last = last
            merged = used.union(emb)
            if p.window is not None and len(merged) >= 2:
                lo, hi = min(merged), max(merged)
                if self.steps[hi] - self.steps[lo] >= p.window:
                    continue
            self._combine(kids, k + 1, chosen + ((nxt_last,) if nxt_last >= 0 else ()), merged, p, out, limit)


def match_trace(p, trace: Trace, cap: int = DEFAULT_CAP) -> MatchResult:
    """Whether *trace* contains an instance of a complex event pattern.

    State patterns are matched at every step (first match reported).  The
    instantiation count is the number of distinct embeddings, or of
    distinct bindings for state patterns; ``exact`` is False when the count
    hit *cap*.
    """
    if is_state_pattern(p):
        return match_state_in_trace(p, trace, cap=cap)
    if isinstance(p, ImplicitCET):
        ok = implicit_holds(p, trace)
        return MatchResult(ok, int(ok), {} if ok else None)
    m = _TraceMatcher(trace, cap)
    embs = m.embeddings(p)
    witness = None
    if embs:
        witness = {"events": [(trace.events[i].step, trace.events[i].ordinal) for i in embs[0]]}
    return MatchResult(bool(embs), len(embs), witness, m.exact)


__all__ = [
    "DEFAULT_CAP", "MatchResult", "implicit_holds", "match_event", "match_state", "match_state_in_trace",
    "match_trace", "rule_selected", "state_instantiation_series",
]
