"""Seeded execution of model specifications into attributed event traces."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from typing import Iterator, Optional

from .expr import EvalContext, EvalError, Name, Scope, check_expr, compile_expr, format_expr, walk
from .model import (
    ASYNC_FIXED, ASYNC_RANDOM, FIRST_MATCH, SYNCHRONOUS, ModelSpec, _const_value, neighbors, rule_scope,
)
from .values import DomainError, ValueDomain, format_value, to_fraction


class RunError(Exception):
    """A model failed at runtime (domain violation, evaluation error)."""

    def __init__(self, message: str, step: int = 0, agent: Optional[int] = None, rule: Optional[str] = None):
        self.step, self.agent, self.rule = step, agent, rule
        where = f"step {step}"
        if agent is not None:
            where += f", agent {agent}"
        if rule is not None:
            where += f", rule {rule}"
        super().__init__(f"{where}: {message}")


class UnboundParameterError(RunError):
    pass


# --- random choice sources -----------------------------------------------


class RandomChooser:
    """Draws every stochastic choice from one seeded stream.

    Consumption order is fixed: random initializers (agents by id, variables
    in declaration order, then globals), then per step the agent permutation
    (asynchronous-random schedules only) followed by bernoulli atoms in the
    order they are evaluated.
    """

    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def init_value(self, domain: ValueDomain):
        return domain.value_at(self.rng.randrange(domain.cardinality))

    def permutation(self, n: int) -> list[int]:
        order = list(range(n))
        self.rng.shuffle(order)
        return order

    def bernoulli(self, p) -> bool:
        return self.rng.random() < p


def nth_permutation(n: int, k: int) -> list[int]:
    """The k-th permutation of range(n) in lexicographic order."""
    pool = list(range(n))
    out = []
    for i in range(n, 0, -1):
        f = math.factorial(i - 1)
        q, k = divmod(k, f)
        out.append(pool.pop(q))
    return out


class ScriptedChooser:
    """Replays a prefix of branch choices, then takes the first feasible branch.

    Records every choice point's branch weights so an enumerator can expand
    the siblings it has not visited yet.
    """

    def __init__(self, prefix=()):
        self.prefix = list(prefix)
        self.taken: list[int] = []
        self.branch_weights: list[list[Fraction]] = []
        self.weight = Fraction(1)
        self.permutations: list[list[int]] = []
        self.draws: list[bool] = []

    def _choose(self, weights: list[Fraction]) -> int:
        i = len(self.taken)
        if i < len(self.prefix):
            k = self.prefix[i]
        else:
            k = next(j for j, w in enumerate(weights) if w > 0)
        self.taken.append(k)
        self.branch_weights.append(weights)
        self.weight *= weights[k]
        return k

    def init_value(self, domain: ValueDomain):
        card = domain.cardinality
        return domain.value_at(self._choose([Fraction(1, card)] * card))

    def permutation(self, n: int) -> list[int]:
        total = math.factorial(n)
        order = nth_permutation(n, self._choose([Fraction(1, total)] * total))
        self.permutations.append(order)
        return order

    def bernoulli(self, p) -> bool:
        pf = to_fraction(p)
        outcome = self._choose([pf, 1 - pf]) == 0
        self.draws.append(outcome)
        return outcome


# --- states, events, traces ----------------------------------------------


@dataclass(frozen=True)
class SystemState:
    step: int
    agent_types: tuple
    agents: tuple  # one {variable: value} dict per agent instance
    globals: dict

    def value(self, agent: int, var: str):
        return self.agents[agent][var]


@dataclass(frozen=True)
class Event:
    step: int
    ordinal: int
    agent: int
    agent_type: str
    rule: str
    source: tuple  # ((key, value), ...) in canonical key order
    target: tuple

    @property
    def source_map(self) -> dict:
        return dict(self.source)

    @property
    def target_map(self) -> dict:
        return dict(self.target)

    def key(self) -> tuple:
        return (self.step, self.ordinal, self.agent, self.rule, self.source, self.target)


def _key_order(key: str):
    if key.startswith("global."):
        return (1, 0, key)
    if key.startswith("@"):
        agent, name = key[1:].split(".", 1)
        return (2, int(agent), name)
    return (0, 0, key)


def _canon(mapping: dict) -> tuple:
    return tuple(sorted(mapping.items(), key=lambda kv: _key_order(kv[0])))


@dataclass(frozen=True)
class Trace:
    model_name: str
    model_hash: str
    params: tuple  # ((name, value), ...)
    seed: Optional[int]
    schedule: str
    mode: str
    horizon: int
    initial: SystemState
    events: tuple
    spec: Optional[ModelSpec] = field(default=None, compare=False, repr=False)

    @property
    def param_map(self) -> dict:
        return dict(self.params)

    def states(self) -> Iterator[SystemState]:
        """States after steps 0..horizon, by replaying events."""
        agents = [dict(a) for a in self.initial.agents]
        globs = dict(self.initial.globals)
        types = self.initial.agent_types
        i = 0
        events = self.events
        yield SystemState(0, types, tuple(dict(a) for a in agents), dict(globs))
        for t in range(1, self.horizon + 1):
            while i < len(events) and events[i].step == t:
                _apply(events[i], agents, globs)
                i += 1
            yield SystemState(t, types, tuple(dict(a) for a in agents), dict(globs))

    @property
    def final_state(self) -> SystemState:
        agents = [dict(a) for a in self.initial.agents]
        globs = dict(self.initial.globals)
        for e in self.events:
            _apply(e, agents, globs)
        return SystemState(self.horizon, self.initial.agent_types, tuple(agents), globs)

    def system_key(self) -> tuple:
        """Identity for distinguishability: initial state plus executions."""
        init = (tuple(_canon(a) for a in self.initial.agents), _canon(self.initial.globals))
        return (init, tuple(e.key() for e in self.events))


def _apply(event: Event, agents: list, globs: dict) -> None:
    for key, value in event.target:
        if key.startswith("global."):
            globs[key[7:]] = value
        else:
            agents[event.agent][key] = value


def state_at(trace: Trace, t: int) -> SystemState:
    """State the engine held after step t (t = 0 is the initial state)."""
    if not 0 <= t <= trace.horizon:
        raise ValueError(f"step {t} outside [0, {trace.horizon}]")
    agents = [dict(a) for a in trace.initial.agents]
    globs = dict(trace.initial.globals)
    for e in trace.events:
        if e.step > t:
            break
        _apply(e, agents, globs)
    return SystemState(t, trace.initial.agent_types, tuple(agents), globs)


# --- compiled model ------------------------------------------------------


@dataclass
class _CompiledRule:
    id: str
    condition: object
    assignments: list  # (target key, is_global, var, domain, fn)
    static_keys: tuple


@dataclass
class CompiledModel:
    spec: ModelSpec
    types: tuple
    neighbors: tuple
    rules: dict  # type name -> [_CompiledRule]


@lru_cache(maxsize=64)
def compile_model(spec: ModelSpec) -> CompiledModel:
    rules = {}
    for t in spec.agent_types:
        scope = rule_scope(spec, t)
        compiled = []
        for r in t.rules:
            assigns = []
            for a in r.assignments:
                if a.is_global:
                    dom = spec.global_var(a.var).domain
                else:
                    dom = t.var(a.var).domain
                assigns.append((a.target, a.is_global, a.var, dom, compile_expr(a.expr, scope)))
            keys = sorted((k for k in spec.rule_read_set(t.name, r.id) if not k.startswith("@")), key=_key_order)
            compiled.append(_CompiledRule(r.id, compile_expr(r.condition, scope), assigns, tuple(keys)))
        rules[t.name] = compiled
    return CompiledModel(spec, spec.instance_types, neighbors(spec), rules)


def bind_params(spec: ModelSpec, params: Optional[dict]) -> dict:
    """Complete parameter bindings (defaults filled in), domain-checked."""
    params = dict(params or {})
    unknown = set(params) - {p.name for p in spec.params}
    if unknown:
        raise UnboundParameterError(f"unknown parameter(s) {sorted(unknown)}")
    bound = {}
    for p in spec.params:
        if p.name in params:
            try:
                bound[p.name] = p.domain.coerce(params[p.name])
            except DomainError as exc:
                raise RunError(f"parameter {p.name}: {exc}") from exc
            if bound[p.name] != params[p.name]:
                raise RunError(f"parameter {p.name}: {params[p.name]} not representable in {p.domain}")
        elif p.default is not None:
            bound[p.name] = p.default
        else:
            raise UnboundParameterError(f"parameter {p.name!r} is unbound")
    return bound


def initial_state(spec: ModelSpec, bound: dict, chooser) -> SystemState:
    agents = []
    ident = 0
    for entry in spec.population:
        t = spec.agent_type(entry.agent_type)
        inits = dict(entry.inits)
        for k in range(entry.count):
            row = {}
            for v in t.variables:
                init = inits.get(v.name)
                try:
                    row[v.name] = _init_value(spec, init, v.domain, k, ident, bound, chooser)
                except (DomainError, EvalError) as exc:
                    raise RunError(f"initializer of {t.name}.{v.name}: {exc}", 0, ident) from exc
            agents.append(row)
            ident += 1
    globs = {}
    for g in spec.globals:
        try:
            globs[g.name] = _init_value(spec, g.init, g.domain, 0, None, bound, chooser)
        except (DomainError, EvalError) as exc:
            raise RunError(f"initializer of global {g.name}: {exc}") from exc
    return SystemState(0, spec.instance_types, tuple(agents), globs)


def _init_value(spec, init, domain: ValueDomain, k: int, ident, bound, chooser):
    if init is None:
        return domain.value_at(0)
    if init.kind == "random":
        return chooser.init_value(domain)
    if init.kind == "id":
        return domain.coerce(ident)
    if init.kind == "list":
        return domain.coerce(init.values[k])
    return domain.coerce(_const_value(init.expr, spec, bound))


def run(
    spec: ModelSpec,
    params: Optional[dict] = None,
    seed: Optional[int] = 0,
    horizon: int = 10,
    chooser=None,
) -> Trace:
    """Execute *spec* for *horizon* steps and return the full event trace.

    With no *chooser*, all randomness comes from ``RandomChooser(seed)``.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    bound = bind_params(spec, params)
    if chooser is None:
        chooser = RandomChooser(seed)
    cm = compile_model(spec)
    init = initial_state(spec, bound, chooser)
    agents = [dict(a) for a in init.agents]
    globs = dict(init.globals)
    n = len(agents)
    sched = spec.schedule
    first_match = sched.mode == FIRST_MATCH
    sync = sched.kind == SYNCHRONOUS
    events: list[Event] = []
    ctx = EvalContext(agents, globs, bound, cm.neighbors, chooser)

    for step in range(1, horizon + 1):
        if sched.kind == ASYNC_RANDOM:
            order = chooser.permutation(n)
        elif sched.kind == ASYNC_FIXED:
            order = sched.order
        else:
            order = range(n)
        if sync:
            read_agents = [dict(a) for a in agents]
            read_globs = dict(globs)
            pending = []
        else:
            read_agents, read_globs = agents, globs
        ctx.agents, ctx.globals = read_agents, read_globs
        ordinal = 0
        for a in order:
            ctx.agent = a
            type_name = cm.types[a]
            for rule in cm.rules[type_name]:
                ctx.reads = reads = {}
                try:
                    fired = rule.condition(ctx)
                    if not isinstance(fired, bool):
                        raise EvalError(f"condition evaluated to {format_value(fired)}, not a boolean")
                    if not fired:
                        continue
                    writes = {}
                    for key, is_global, var, dom, fn in rule.assignments:
                        try:
                            writes[key] = dom.coerce(fn(ctx))
                        except DomainError as exc:
                            raise RunError(f"domain violation assigning {key}: {exc}", step, a, rule.id) from exc
                except EvalError as exc:
                    raise RunError(str(exc), step, a, rule.id) from exc
                finally:
                    ctx.reads = None
                row = read_agents[a]
                for key in rule.static_keys:
                    reads[key] = read_globs[key[7:]] if key.startswith("global.") else row[key]
                event = Event(step, ordinal, a, type_name, rule.id, _canon(reads), _canon(writes))
                ordinal += 1
                events.append(event)
                if sync:
                    pending.append(event)
                else:
                    _apply(event, agents, globs)
                if first_match:
                    break
        if sync:
            for event in pending:
                _apply(event, agents, globs)
        ctx.agents, ctx.globals = agents, globs

    sched_text = sched.kind + ("".join(f" {i}" for i in sched.order) if sched.kind == ASYNC_FIXED else "")
    return Trace(
        model_name=spec.name,
        model_hash=spec.content_hash,
        params=tuple((p.name, bound[p.name]) for p in spec.params),
        seed=seed,
        schedule=sched_text,
        mode=sched.mode,
        horizon=horizon,
        initial=init,
        events=tuple(events),
        spec=spec,
    )


# --- macro variables -----------------------------------------------------

MACRO_KINDS = ("mean", "sum", "count_where", "proportion_where")


@dataclass(frozen=True)
class MacroVariableDef:
    """A system-level variable aggregated over agents at every step.

    ``mean``/``sum`` aggregate a numeric expression, ``count_where`` and
    ``proportion_where`` a boolean one.  Agents whose type lacks a referenced
    own variable are skipped.
    """

    name: str
    kind: str
    expr: object
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    def __str__(self) -> str:
        return f"{self.kind}({format_expr(self.expr)})"


def check_macro(spec: ModelSpec, macro: MacroVariableDef) -> list:
    """Diagnostics for a macro definition against a model (empty when it resolves)."""
    from .lexing import Diagnostic

    if macro.kind not in MACRO_KINDS:
        return [Diagnostic("unknown aggregation", f"macro {macro.name}: unknown aggregation {macro.kind!r}", *macro.pos)]
    if not _macro_types(spec, macro):
        return [Diagnostic("unresolvable reference", f"macro {macro.name}: no agent type declares the variables it uses", *macro.pos)]
    out = []
    for t in _macro_types(spec, macro):
        scope = rule_scope(spec, t)
        scope = Scope(scope.local, scope.params, scope.globals, scope.agent_vars, allow_random=False)
        out.extend(check_expr(macro.expr, scope))
    return out


def _macro_types(spec: ModelSpec, macro: MacroVariableDef) -> list:
    params = {p.name for p in spec.params}
    used = {n.name for n in walk(macro.expr) if isinstance(n, Name) and n.name not in params}
    return [t for t in spec.agent_types if used <= set(t.var_names)]


@lru_cache(maxsize=256)
def _compiled_macro(spec: ModelSpec, macro: MacroVariableDef):
    problems = check_macro(spec, macro)
    if problems:
        raise ValueError("; ".join(str(d) for d in problems))
    fns = {}
    for t in _macro_types(spec, macro):
        scope = rule_scope(spec, t)
        fns[t.name] = compile_expr(macro.expr, Scope(scope.local, scope.params, scope.globals, scope.agent_vars, allow_random=False))
    return fns


def macro_value(spec: ModelSpec, macro: MacroVariableDef, state: SystemState, params: dict) -> Fraction:
    """Exact value of a macro variable on one state."""
    fns = _compiled_macro(spec, macro)
    ctx = EvalContext(list(state.agents), state.globals, params, compile_model(spec).neighbors)
    total = Fraction(0)
    count = 0
    for i, type_name in enumerate(state.agent_types):
        fn = fns.get(type_name)
        if fn is None:
            continue
        ctx.agent = i
        try:
            v = fn(ctx)
        except EvalError as exc:
            raise RunError(f"macro {macro.name}: {exc}", state.step, i) from exc
        count += 1
        if macro.kind in ("mean", "sum"):
            if v is None or isinstance(v, bool):
                raise RunError(f"macro {macro.name}: non-numeric value {format_value(v)}", state.step, i)
            total += to_fraction(v)
        else:
            if not isinstance(v, bool):
                raise RunError(f"macro {macro.name}: predicate gave {format_value(v)}", state.step, i)
            total += int(v)
    if macro.kind in ("mean", "proportion_where"):
        return total / count if count else Fraction(0)
    return total


def macro_series(trace: Trace, macro: MacroVariableDef, spec: Optional[ModelSpec] = None) -> list[Fraction]:
    """Exact per-step series of a macro variable, length horizon + 1."""
    spec = spec or trace.spec
    if spec is None:
        raise ValueError("trace is not linked to a model specification")
    params = trace.param_map
    return [macro_value(spec, macro, s, params) for s in trace.states()]


def aggregate(trace: Trace, macro: MacroVariableDef, spec: Optional[ModelSpec] = None) -> list[float]:
    """Per-step series of a macro variable as floats, length horizon + 1."""
    return [float(v) for v in macro_series(trace, macro, spec)]


def all_permutations(n: int) -> list:
    return [list(p) for p in permutations(range(n))]
