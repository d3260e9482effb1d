"""Agent-based model specifications: types, validation and canonical printing."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .expr import (
    AgentRef, Bernoulli, Const, Expr, GlobalRef, Name, NbrRef, Quant, Scope,
    check_expr, format_expr, walk,
)
from .lexing import Diagnostic
from .values import DomainError, Value, ValueDomain

AGENT = "agent"
GLOBAL = "global"

SYNCHRONOUS = "synchronous"
ASYNC_RANDOM = "async-random"
ASYNC_FIXED = "async-fixed"

FIRST_MATCH = "first-match"
ALL_MATCHING = "all-matching"

COMPLETE = "complete"
GRID = "grid"
EDGES = "edges"


@dataclass(frozen=True)
class VariableDecl:
    name: str
    domain: ValueDomain
    scope: str = AGENT
    init: Optional["Initializer"] = None  # globals only
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Initializer:
    """How a variable gets its value at step 0.

    ``kind`` is one of ``const`` (``expr`` over constants and parameters),
    ``list`` (one literal per agent instance), ``random`` (uniform over the
    domain, drawn from the run's stream) or ``id`` (the agent's instance id).
    """

    kind: str
    expr: Optional[Expr] = None
    values: tuple = ()
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Assignment:
    target: str  # "var" or "global.var"
    expr: Expr
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    @property
    def is_global(self) -> bool:
        return self.target.startswith("global.")

    @property
    def var(self) -> str:
        return self.target[len("global."):] if self.is_global else self.target


@dataclass(frozen=True)
class Rule:
    id: str
    condition: Expr
    assignments: tuple
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class AgentType:
    name: str
    variables: tuple
    rules: tuple
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    def var(self, name: str) -> Optional[VariableDecl]:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    @property
    def var_names(self) -> tuple:
        return tuple(v.name for v in self.variables)


@dataclass(frozen=True)
class PopulationEntry:
    agent_type: str
    count: int
    inits: tuple  # ((var name, Initializer), ...)
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class ParamDecl:
    name: str
    domain: ValueDomain
    default: Value = None
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Topology:
    kind: str = COMPLETE
    width: int = 0
    height: int = 0
    neighborhood: str = "moore"
    torus: bool = False
    edges: tuple = ()
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Schedule:
    kind: str = SYNCHRONOUS
    order: tuple = ()
    mode: str = FIRST_MATCH
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params: tuple = ()
    globals: tuple = ()
    agent_types: tuple = ()
    population: tuple = ()
    topology: Topology = Topology()
    schedule: Schedule = Schedule()

    def agent_type(self, name: str) -> Optional[AgentType]:
        for t in self.agent_types:
            if t.name == name:
                return t
        return None

    def param(self, name: str) -> Optional[ParamDecl]:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def global_var(self, name: str) -> Optional[VariableDecl]:
        for g in self.globals:
            if g.name == name:
                return g
        return None

    @property
    def n_agents(self) -> int:
        return sum(p.count for p in self.population)

    @property
    def instance_types(self) -> tuple:
        """Agent type name per instance id (ids assigned in population order)."""
        out = []
        for entry in self.population:
            out.extend([entry.agent_type] * entry.count)
        return tuple(out)

    @property
    def deterministic(self) -> bool:
        if self.schedule.kind == ASYNC_RANDOM:
            return False
        for t in self.agent_types:
            for r in t.rules:
                exprs = [r.condition] + [a.expr for a in r.assignments]
                if any(isinstance(n, Bernoulli) for e in exprs for n in walk(e)):
                    return False
        inits = [i for e in self.population for _, i in e.inits] + [g.init for g in self.globals if g.init]
        return not any(i.kind == "random" for i in inits)

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(format_model(self).encode("utf-8")).hexdigest()

    def rule_read_set(self, type_name: str, rule_id: str) -> set[str]:
        """Static read set of a rule in trace-key form.

        Own variables appear bare, globals as ``global.x``, and variables of
        other agents (neighbors or ``agent[...]`` references) as ``@*.x``.
        Written variables are part of the read set: an event's source
        substate records their pre-values.
        """
        t = self.agent_type(type_name)
        rule = next(r for r in t.rules if r.id == rule_id)
        keys: set[str] = set()
        for e in [rule.condition] + [a.expr for a in rule.assignments]:
            for n in walk(e):
                if isinstance(n, Name) and n.name in t.var_names:
                    keys.add(n.name)
                elif isinstance(n, GlobalRef):
                    keys.add("global." + n.name)
                elif isinstance(n, (NbrRef, AgentRef)):
                    keys.add("@*." + n.name)
        keys.update(a.target for a in rule.assignments)
        return keys


# --- validation ----------------------------------------------------------


def _scope(spec: ModelSpec, local) -> Scope:
    agent_vars = frozenset(v.name for t in spec.agent_types for v in t.variables)
    return Scope(
        local=None if local is None else frozenset(local),
        params=frozenset(p.name for p in spec.params),
        globals=frozenset(g.name for g in spec.globals),
        agent_vars=agent_vars,
    )


def init_scope(spec: ModelSpec) -> Scope:
    return Scope(local=None, params=frozenset(p.name for p in spec.params), globals=frozenset(),
                 allow_random=False, allow_agents=False)


def rule_scope(spec: ModelSpec, agent_type: AgentType) -> Scope:
    return _scope(spec, agent_type.var_names)


def _const_value(expr: Expr, spec: ModelSpec, params: Optional[dict] = None):
    """Evaluate an initializer expression over constants and parameters."""
    from .expr import EvalContext, compile_expr

    bound = {}
    for p in spec.params:
        if params is not None and p.name in params:
            bound[p.name] = params[p.name]
        elif p.default is not None:
            bound[p.name] = p.default
    fn = compile_expr(expr, init_scope(spec))
    return fn(EvalContext([], {}, bound))


def validate_model(spec: ModelSpec) -> list[Diagnostic]:
    """All invariant violations of a model specification (empty when valid)."""
    out: list[Diagnostic] = []

    def diag(code, msg, pos=(0, 0)):
        out.append(Diagnostic(code, msg, *pos))

    for d in [p.domain for p in spec.params] + [g.domain for g in spec.globals] + [
        v.domain for t in spec.agent_types for v in t.variables
    ]:
        for problem in d.problems():
            diag("bad domain", problem)

    seen: set = set()
    for p in spec.params:
        if p.name in seen:
            diag("duplicate name", f"parameter {p.name!r} declared twice", p.pos)
        seen.add(p.name)
        if p.domain.kind != "decimal":
            diag("bad domain", f"parameter {p.name!r} must have a decimal domain", p.pos)
        if p.default is not None:
            try:
                if p.domain.coerce(p.default) != p.default:
                    raise DomainError("not representable")
            except DomainError as exc:
                diag("domain violation", f"default of parameter {p.name!r}: {exc}", p.pos)

    seen = set()
    for g in spec.globals:
        if g.name in seen:
            diag("duplicate name", f"global {g.name!r} declared twice", g.pos)
        seen.add(g.name)
        if g.init is not None:
            _check_init(spec, g.init, g.domain, 1, f"global {g.name}", diag)

    seen = set()
    for t in spec.agent_types:
        if t.name in seen:
            diag("duplicate name", f"agent type {t.name!r} declared twice", t.pos)
        seen.add(t.name)
        var_seen: set = set()
        for v in t.variables:
            if v.name in var_seen:
                diag("duplicate name", f"variable {t.name}.{v.name} declared twice", v.pos)
            var_seen.add(v.name)
        rule_seen: set = set()
        scope = rule_scope(spec, t)
        for r in t.rules:
            if r.id in rule_seen:
                diag("duplicate name", f"rule {t.name}.{r.id} declared twice", r.pos)
            rule_seen.add(r.id)
            for d in check_expr(r.condition, scope):
                out.append(d)
            targets: set = set()
            for a in r.assignments:
                if a.target in targets:
                    diag("duplicate assignment", f"rule {t.name}.{r.id} writes {a.target} more than once", a.pos)
                targets.add(a.target)
                if a.is_global:
                    if spec.global_var(a.var) is None:
                        diag("unknown identifier", f"rule {t.name}.{r.id} assigns unknown global {a.var!r}", a.pos)
                elif t.var(a.var) is None:
                    diag("unknown identifier", f"rule {t.name}.{r.id} assigns unknown variable {a.var!r}", a.pos)
                out.extend(check_expr(a.expr, scope))

    for entry in spec.population:
        t = spec.agent_type(entry.agent_type)
        if t is None:
            diag("unknown identifier", f"population references unknown agent type {entry.agent_type!r}", entry.pos)
            continue
        if entry.count < 1:
            diag("empty population", f"population of {entry.agent_type} must be >= 1", entry.pos)
        init_seen: set = set()
        for var_name, init in entry.inits:
            v = t.var(var_name)
            if var_name in init_seen:
                diag("duplicate name", f"{entry.agent_type}.{var_name} initialized twice", init.pos)
            init_seen.add(var_name)
            if v is None:
                diag("unknown identifier", f"{entry.agent_type} has no variable {var_name!r}", init.pos)
                continue
            _check_init(spec, init, v.domain, entry.count, f"{entry.agent_type}.{var_name}", diag)
    if not spec.population:
        diag("empty population", "model declares no agents")

    n = spec.n_agents
    topo = spec.topology
    if topo.kind == GRID:
        if topo.width < 1 or topo.height < 1:
            diag("bad topology", "grid dimensions must be positive", topo.pos)
        elif topo.width * topo.height != n:
            diag("bad topology", f"grid {topo.width}x{topo.height} needs {topo.width * topo.height} agents, population has {n}", topo.pos)
        if topo.neighborhood not in ("moore", "von-neumann"):
            diag("bad topology", f"unknown neighborhood {topo.neighborhood!r}", topo.pos)
    elif topo.kind == EDGES:
        for a, b in topo.edges:
            if not (0 <= a < n and 0 <= b < n):
                diag("bad topology", f"edge {a}-{b} references an undeclared agent instance", topo.pos)
            elif a == b:
                diag("bad topology", f"self-loop {a}-{b}", topo.pos)
    elif topo.kind != COMPLETE:
        diag("bad topology", f"unknown topology {topo.kind!r}", topo.pos)

    sched = spec.schedule
    if sched.kind == ASYNC_FIXED:
        if sorted(sched.order) != list(range(n)):
            diag("order not a permutation", f"fixed order {list(sched.order)} is not a permutation of agents 0..{n - 1}", sched.pos)
    elif sched.kind not in (SYNCHRONOUS, ASYNC_RANDOM):
        diag("bad schedule", f"unknown schedule {sched.kind!r}", sched.pos)
    if sched.mode not in (FIRST_MATCH, ALL_MATCHING):
        diag("bad schedule", f"unknown firing mode {sched.mode!r}", sched.pos)
    return out


def _check_init(spec, init: Initializer, domain: ValueDomain, count: int, where: str, diag) -> None:
    if init.kind == "list":
        if len(init.values) != count:
            diag("bad initializer", f"{where}: list has {len(init.values)} values for {count} agents", init.pos)
        for v in init.values:
            if not domain.contains(v):
                diag("domain violation", f"{where}: initial value {domain.format(v) if v is not None else 'null'} not in {domain}", init.pos)
    elif init.kind == "const":
        problems = check_expr(init.expr, init_scope(spec))
        for d in problems:
            diag(d.code, f"{where}: {d.message}", init.pos)
        if problems:
            return
        try:
            value = _const_value(init.expr, spec)
        except Exception as exc:  # noqa: BLE001 - any evaluation failure is a diagnostic
            diag("bad initializer", f"{where}: {exc}", init.pos)
            return
        if isinstance(init.expr, Const) or not _uses_unbound_param(init.expr, spec):
            if not domain.contains(value):
                shown = "null" if value is None else format_expr(Const(value))
                diag("domain violation", f"{where}: initial value {shown} not in {domain}", init.pos)
    elif init.kind == "id":
        if domain.kind != "int":
            diag("bad initializer", f"{where}: 'id' needs an integer domain", init.pos)
        elif spec.n_agents - 1 > domain.hi or domain.lo > 0:
            diag("domain violation", f"{where}: agent ids 0..{spec.n_agents - 1} not in {domain}", init.pos)
    elif init.kind != "random":
        diag("bad initializer", f"{where}: unknown initializer {init.kind!r}", init.pos)


def _uses_unbound_param(expr: Expr, spec: ModelSpec) -> bool:
    for n in walk(expr):
        if isinstance(n, Name):
            p = spec.param(n.name)
            if p is not None and p.default is None:
                return True
    return False


# --- printing ------------------------------------------------------------


def _format_init(init: Initializer, domain: ValueDomain) -> str:
    if init.kind == "list":
        return "[" + ", ".join(domain.format(v) for v in init.values) + "]"
    if init.kind == "const":
        return format_expr(init.expr)
    return init.kind


def format_model(spec: ModelSpec) -> str:
    """Canonical model-language text; parsing it yields an equal ModelSpec."""
    lines = [f"model {spec.name}"]
    if spec.params:
        lines += ["", "params"]
        for p in spec.params:
            tail = f" = {p.domain.format(p.default)}" if p.default is not None else ""
            lines.append(f"  {p.name}: {p.domain}{tail}")
    if spec.globals:
        lines += ["", "globals"]
        for g in spec.globals:
            tail = f" = {_format_init(g.init, g.domain)}" if g.init is not None else ""
            lines.append(f"  {g.name}: {g.domain}{tail}")
    if spec.agent_types:
        lines += ["", "agents"]
        for t in spec.agent_types:
            lines.append(f"  agent {t.name}")
            for v in t.variables:
                lines.append(f"    {v.name}: {v.domain}")
            for r in t.rules:
                assigns = ", ".join(f"{a.target} := {format_expr(a.expr)}" for a in r.assignments)
                lines.append(f"    rule {r.id}: when {format_expr(r.condition)} do {assigns}")
    if spec.population:
        lines += ["", "population"]
        for e in spec.population:
            t = spec.agent_type(e.agent_type)
            parts = []
            for name, init in e.inits:
                decl = t.var(name) if t is not None else None
                dom = decl.domain if decl is not None else ValueDomain.integer(0, 0, True)
                parts.append(f"{name} = {_format_init(init, dom)}")
            tail = ": " + ", ".join(parts) if parts else ""
            lines.append(f"  {e.agent_type} {e.count}{tail}")
    lines += ["", "topology"]
    topo = spec.topology
    if topo.kind == GRID:
        lines.append(f"  grid {topo.width} {topo.height} {topo.neighborhood}" + (" torus" if topo.torus else ""))
    elif topo.kind == EDGES:
        lines.append("  edges " + ", ".join(f"{a}-{b}" for a, b in topo.edges))
    else:
        lines.append(f"  {topo.kind}")
    lines += ["", "schedule"]
    sched = spec.schedule
    if sched.kind == ASYNC_FIXED:
        lines.append("  async-fixed " + " ".join(str(i) for i in sched.order))
    else:
        lines.append(f"  {sched.kind}")
    if sched.mode != FIRST_MATCH:
        lines.append(f"  mode {sched.mode}")
    return "\n".join(lines) + "\n"


def neighbors(spec: ModelSpec) -> tuple:
    """Neighbor id tuples per agent instance, sorted ascending."""
    n = spec.n_agents
    topo = spec.topology
    if topo.kind == COMPLETE:
        return tuple(tuple(j for j in range(n) if j != i) for i in range(n))
    if topo.kind == EDGES:
        adj = [set() for _ in range(n)]
        for a, b in topo.edges:
            adj[a].add(b)
            adj[b].add(a)
        return tuple(tuple(sorted(s)) for s in adj)
    w, h = topo.width, topo.height
    if topo.neighborhood == "moore":
        offsets = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dx, dy) != (0, 0)]
    else:
        offsets = [(0, -1), (-1, 0), (1, 0), (0, 1)]
    out = []
    for i in range(n):
        x, y = i % w, i // w
        nb = set()
        for dx, dy in offsets:
            nx, ny = x + dx, y + dy
            if topo.torus:
                nx, ny = nx % w, ny % h
            elif not (0 <= nx < w and 0 <= ny < h):
                continue
            j = ny * w + nx
            if j != i:
                nb.add(j)
        out.append(tuple(sorted(nb)))
    return tuple(out)


def bernoulli_atoms(spec: ModelSpec, type_name: str) -> int:
    t = spec.agent_type(type_name)
    count = 0
    for r in t.rules:
        for e in [r.condition] + [a.expr for a in r.assignments]:
            count += sum(1 for n in walk(e) if isinstance(n, Bernoulli))
    return count


def uses_quantifier(expr: Expr) -> bool:
    return any(isinstance(n, Quant) for n in walk(expr))
