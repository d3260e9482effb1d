"""Recursive state, event and complex-event pattern types.

Three layers share one textual language:

* state patterns -- leaves constrain one variable of some agent (or a
  global); ``COMPOSE`` nodes need all children jointly instantiated and
  ``SUBSET`` nodes need any one child;
* event patterns -- ``SET {rules}: source -> target`` constrains which rule
  fired and what the transition looked like, optionally observed through a
  projection onto fewer variables;
* complex event patterns -- ``SEQ``, ``ALL`` and ``ANY`` over event patterns,
  or ``IMPLICIT`` predicates over a macro-variable series.

Example file::

    macro thefts := count_where(stolen = true)
    pattern marriage := COMPOSE(w.husbID NotNull as H, h.wifeID NotNull as W,
                                h.agentID = H, w.agentID = W)
    pattern crime_wave := IMPLICIT(thefts, delta > 2)
    pattern steal_then_flee := SEQ[window=3](SET {steal}, SET {flee})
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from functools import cached_property
from typing import Optional, Union

from .engine import MACRO_KINDS, MacroVariableDef, check_macro
from .expr import parse_expr
from .lexing import Diagnostic, ParseError, TokenStream, tokenize
from .model import ModelSpec
from .values import Value, format_value

COMPOSE = "COMPOSE"
SUBSET = "SUBSET"
SEQ = "SEQ"
ALL = "ALL"
ANY = "ANY"

SELECTORS = ("initial", "final", "at", "eventually", "always", "delta")
_CMP = ("<", "<=", "=", "!=", ">=", ">")


# --- types ---------------------------------------------------------------


@dataclass(frozen=True)
class StateLeaf:
    """One variable constraint.

    ``kind`` is ``any`` (variable present), ``interval`` (``lo``/``hi``,
    None meaning unbounded), ``equals`` (constant ``value``), ``notnull``
    or ``binding`` (equal to the value captured under ``ref``).  ``agent``
    names the agent the leaf is about; leaves sharing a name talk about the
    same agent and distinct names denote distinct agents.  ``bind`` captures
    the matched value under a name.
    """

    var: str
    is_global: bool = False
    agent: Optional[str] = None
    agent_type: Optional[str] = None
    kind: str = "any"
    lo: Value = None
    hi: Value = None
    value: Value = None
    ref: Optional[str] = None
    bind: Optional[str] = None
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    @property
    def key(self) -> str:
        """Substate key used when the leaf constrains an event."""
        return f"global.{self.var}" if self.is_global else self.var


@dataclass(frozen=True)
class StateNode:
    relation: str
    children: tuple
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


StatePattern = Union[StateLeaf, StateNode]


@dataclass(frozen=True)
class TransitionConstraint:
    """Source and target state patterns; None on either side is vacuous."""

    source: Optional[StatePattern] = None
    target: Optional[StatePattern] = None


@dataclass(frozen=True)
class EventPattern:
    rules: Optional[tuple] = None  # None is the wildcard selector
    constraint: TransitionConstraint = TransitionConstraint()
    projection: Optional[tuple] = None
    pos: tuple = field(default=(0, 0), compare=False, repr=False)

    @cached_property
    def effective(self) -> TransitionConstraint:
        """The constraint as seen through the projection."""
        if self.projection is None:
            return self.constraint
        return coarsen(self.constraint, set(self.projection))


@dataclass(frozen=True)
class CETNode:
    relation: str
    children: tuple
    window: Optional[int] = None
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class ImplicitCET:
    """Predicate ``<selector> <op> <threshold>`` over a macro series."""

    macro: MacroVariableDef
    selector: str
    op: str
    threshold: Decimal
    t1: Optional[int] = None
    t2: Optional[int] = None  # None with selector delta means final step
    named: bool = True
    pos: tuple = field(default=(0, 0), compare=False, repr=False)


ComplexEventPattern = Union[EventPattern, CETNode, ImplicitCET]
Pattern = Union[StateLeaf, StateNode, EventPattern, CETNode, ImplicitCET]


def is_state_pattern(p) -> bool:
    return isinstance(p, (StateLeaf, StateNode))


def leaves(p) -> list:
    if p is None:
        return []
    if isinstance(p, StateLeaf):
        return [p]
    if isinstance(p, StateNode):
        return [leaf for c in p.children for leaf in leaves(c)]
    if isinstance(p, EventPattern):
        return leaves(p.constraint.source) + leaves(p.constraint.target)
    if isinstance(p, CETNode):
        return [leaf for c in p.children for leaf in leaves(c)]
    return []


def constraint_keys(c: TransitionConstraint) -> set:
    return {leaf.key for leaf in leaves(c.source) + leaves(c.target)}


def referenced_vars(p: EventPattern) -> set:
    """Variables an event pattern observes (its projection, if any)."""
    if p.projection is not None:
        return set(p.projection)
    return constraint_keys(p.constraint)


# --- projection ----------------------------------------------------------


def _coarsen_state(p, keep: set, drop_refs: set):
    if p is None:
        return None
    if isinstance(p, StateLeaf):
        if p.key not in keep or (p.kind == "binding" and p.ref in drop_refs):
            return None
        return p
    kids = [_coarsen_state(c, keep, drop_refs) for c in p.children]
    if p.relation == SUBSET:
        # an alternative that became vacuous makes the whole disjunction vacuous
        return None if any(k is None for k in kids) else StateNode(p.relation, tuple(kids), pos=p.pos)
    kids = [k for k in kids if k is not None]
    if not kids:
        return None
    if len(kids) == 1 and len(p.children) > 1:
        return kids[0]
    return StateNode(p.relation, tuple(kids), pos=p.pos)


def coarsen(c: TransitionConstraint, keep: set) -> TransitionConstraint:
    """Drop every constraint on variables outside *keep*.

    Removed leaves become vacuously true, so the result matches a superset
    of the events the input matches.  Bindings whose declaring leaf was
    removed are dropped too, repeatedly until nothing changes.
    """
    drop: set = set()
    while True:
        src = _coarsen_state(c.source, keep, drop)
        tgt = _coarsen_state(c.target, keep, drop)
        declared = {leaf.bind for leaf in leaves(src) + leaves(tgt) if leaf.bind}
        used = {leaf.ref for leaf in leaves(src) + leaves(tgt) if leaf.kind == "binding"}
        missing = used - declared
        if not missing:
            return TransitionConstraint(src, tgt)
        drop |= missing


def project(p: EventPattern, variables) -> EventPattern:
    """Observe *p* through a subset of its variables (never loses matches)."""
    variables = set(variables)
    current = referenced_vars(p)
    extra = variables - current
    if extra:
        raise ValueError(f"projection variables {sorted(extra)} are not referenced by the pattern")
    if variables == current:
        return p
    return EventPattern(p.rules, p.constraint, tuple(sorted(variables)), pos=p.pos)


# --- printing ------------------------------------------------------------


def _fmt_bound(v) -> str:
    return "*" if v is None else format_value(v)


def _fmt_leaf(leaf: StateLeaf) -> str:
    sel = ""
    if leaf.agent_type:
        sel += leaf.agent_type + ":"
    if leaf.is_global:
        sel += "global."
    elif leaf.agent:
        sel += leaf.agent + "."
    sel += leaf.var
    if leaf.kind == "interval":
        sel += f" in [{_fmt_bound(leaf.lo)}, {_fmt_bound(leaf.hi)}]"
    elif leaf.kind == "equals":
        sel += f" = {format_value(leaf.value)}"
    elif leaf.kind == "notnull":
        sel += " NotNull"
    elif leaf.kind == "binding":
        sel += f" = {leaf.ref}"
    if leaf.bind:
        sel += f" as {leaf.bind}"
    return sel


def format_pattern(p) -> str:
    """Canonical pattern-language text."""
    if p is None:
        return "*"
    if isinstance(p, StateLeaf):
        return _fmt_leaf(p)
    if isinstance(p, StateNode):
        return f"{p.relation}(" + ", ".join(format_pattern(c) for c in p.children) + ")"
    if isinstance(p, EventPattern):
        out = "SET " + ("*" if p.rules is None else "{" + ", ".join(p.rules) + "}")
        c = p.constraint
        if c.source is not None or c.target is not None:
            out += f": {format_pattern(c.source)} -> {format_pattern(c.target)}"
        if p.projection is not None:
            out += " project {" + ", ".join(p.projection) + "}"
        return out
    if isinstance(p, CETNode):
        win = f"[window={p.window}]" if p.window is not None else ""
        return f"{p.relation}{win}(" + ", ".join(format_pattern(c) for c in p.children) + ")"
    if isinstance(p, ImplicitCET):
        macro = p.macro.name if p.named else str(p.macro)
        sel = p.selector
        if sel == "at":
            sel = f"at({p.t1})"
        elif sel == "delta" and (p.t1 is not None or p.t2 is not None):
            sel = f"delta({p.t1 or 0}, {'final' if p.t2 is None else p.t2})"
        return f"IMPLICIT({macro}, {sel} {p.op} {format_value(p.threshold)})"
    raise TypeError(f"not a pattern: {p!r}")


def format_macro(m: MacroVariableDef) -> str:
    return f"macro {m.name} := {m}"


# --- parsing -------------------------------------------------------------


class _PatternParser:
    def __init__(self, ts: TokenStream, macros: dict):
        self.ts = ts
        self.macros = macros
        self.inline = 0

    def pattern(self):
        ts = self.ts
        tok = ts.peek
        pos = (tok.line, tok.col)
        word = tok.text if tok.kind == "NAME" else ""
        if word in (COMPOSE, SUBSET):
            ts.next()
            return StateNode(word, tuple(self._list(self.state)), pos=pos)
        if word == "SET":
            return self.event()
        if word in (SEQ, ALL, ANY):
            ts.next()
            window = None
            if word != ANY and ts.accept("["):
                ts.expect("window")
                ts.expect("=")
                window = self._int()
                ts.expect("]")
            return CETNode(word, tuple(self._list(self.cet)), window, pos=pos)
        if word == "IMPLICIT":
            return self.implicit()
        return self.leaf()

    def cet(self):
        p = self.pattern()
        if is_state_pattern(p):
            raise ParseError([Diagnostic("syntax", "state pattern used where an event pattern is expected", *p.pos)])
        return p

    def state(self):
        ts = self.ts
        if ts.at("(") and ts.peek.kind == "OP":
            pos = (ts.peek.line, ts.peek.col)
            kids = self._list(self.state)
            return kids[0] if len(kids) == 1 else StateNode(COMPOSE, tuple(kids), pos=pos)
        p = self.pattern()
        if not is_state_pattern(p):
            raise ParseError([Diagnostic("syntax", "expected a state pattern", *p.pos)])
        return p

    def _list(self, item) -> list:
        ts = self.ts
        ts.expect("(")
        out = []
        if not ts.at(")"):
            out.append(item())
            while ts.accept(","):
                out.append(item())
        ts.expect(")")
        return out

    def _int(self) -> int:
        tok = self.ts.peek
        if tok.kind != "NUMBER" or "." in tok.text:
            self.ts.fail("expected an integer")
        self.ts.next()
        return int(tok.text)

    def _literal(self):
        ts = self.ts
        neg = ts.accept("-")
        tok = ts.peek
        if tok.kind == "NUMBER":
            ts.next()
            v = Decimal(tok.text) if "." in tok.text else int(tok.text)
            return -v if neg else v
        if not neg and tok.kind == "NAME" and tok.text in ("true", "false", "null"):
            ts.next()
            return {"true": True, "false": False, "null": None}[tok.text]
        ts.fail("expected a literal")

    def leaf(self) -> StateLeaf:
        ts = self.ts
        tok = ts.expect_name("variable selector")
        pos = (tok.line, tok.col)
        agent_type = agent = None
        is_global = False
        name = tok.text
        if ts.at(":") and ts.peek_at(1).kind == "NAME":
            ts.next()
            agent_type = name
            name = ts.expect_name("variable selector").text
        if name == "global":
            ts.expect(".")
            is_global = True
            name = ts.expect_name("global variable").text
        elif ts.accept("."):
            agent = name
            name = ts.expect_name("variable").text
        kw = dict(var=name, is_global=is_global, agent=agent, agent_type=agent_type, pos=pos)
        if ts.accept("in"):
            ts.expect("[")
            lo = None if ts.accept("*") else self._literal()
            ts.expect(",")
            hi = None if ts.accept("*") else self._literal()
            ts.expect("]")
            kw.update(kind="interval", lo=lo, hi=hi)
        elif ts.accept("NotNull"):
            kw.update(kind="notnull")
        elif ts.accept("="):
            t = ts.peek
            if t.kind == "NAME" and t.text not in ("true", "false", "null"):
                ts.next()
                kw.update(kind="binding", ref=t.text)
            else:
                kw.update(kind="equals", value=self._literal())
        if ts.accept("as"):
            kw["bind"] = ts.expect_name("binding name").text
        return StateLeaf(**kw)

    def _rule_id(self) -> str:
        ts = self.ts
        text = ts.expect_name("rule id").text
        if ts.accept("."):
            text += "." + ts.expect_name("rule id").text
        return text

    def event(self) -> EventPattern:
        ts = self.ts
        tok = ts.expect("SET")
        pos = (tok.line, tok.col)
        if ts.accept("*"):
            rules = None
        else:
            ts.expect("{")
            rules = [self._rule_id()]
            while ts.accept(","):
                rules.append(self._rule_id())
            ts.expect("}")
            rules = tuple(sorted(set(rules)))
        src = tgt = None
        if ts.accept(":"):
            src = None if ts.accept("*") else self.state()
            ts.expect("->")
            tgt = None if ts.accept("*") else self.state()
        projection = None
        if ts.accept("project"):
            ts.expect("{")
            keys = [self._key()]
            while ts.accept(","):
                keys.append(self._key())
            ts.expect("}")
            projection = tuple(sorted(set(keys)))
        return EventPattern(rules, TransitionConstraint(src, tgt), projection, pos=pos)

    def _key(self) -> str:
        ts = self.ts
        if ts.accept("global"):
            ts.expect(".")
            return "global." + ts.expect_name().text
        return ts.expect_name("variable").text

    def macro_body(self, name: str) -> MacroVariableDef:
        ts = self.ts
        tok = ts.expect_name("aggregation")
        if tok.text not in MACRO_KINDS:
            raise ParseError([Diagnostic("syntax", f"unknown aggregation {tok.text!r}", tok.line, tok.col)])
        ts.expect("(")
        expr = parse_expr(ts)
        ts.expect(")")
        return MacroVariableDef(name, tok.text, expr, pos=(tok.line, tok.col))

    def implicit(self) -> ImplicitCET:
        ts = self.ts
        tok = ts.expect("IMPLICIT")
        pos = (tok.line, tok.col)
        ts.expect("(")
        ref = ts.peek
        if ref.kind == "NAME" and ts.peek_at(1).text == "(":
            macro = self.macro_body("")
            named = False
        else:
            ts.expect_name("macro name")
            macro = self.macros.get(ref.text)
            if macro is None:
                raise ParseError([Diagnostic("unknown identifier", f"unknown macro {ref.text!r}", ref.line, ref.col)])
            named = True
        ts.expect(",")
        sel_tok = ts.expect_name("selector")
        sel = sel_tok.text
        if sel not in SELECTORS:
            raise ParseError([Diagnostic("syntax", f"unknown selector {sel!r}", sel_tok.line, sel_tok.col)])
        t1 = t2 = None
        if sel == "at":
            ts.expect("(")
            t1 = self._int()
            ts.expect(")")
        elif sel == "delta" and ts.accept("("):
            t1 = self._int()
            ts.expect(",")
            t2 = None if ts.accept("final") else self._int()
            ts.expect(")")
        op_tok = ts.next()
        op = "=" if op_tok.text == "==" else op_tok.text
        if op not in _CMP:
            raise ParseError([Diagnostic("syntax", f"expected a comparison, found {op_tok.text!r}", op_tok.line, op_tok.col)])
        threshold = self._literal()
        if isinstance(threshold, bool) or threshold is None:
            ts.fail("threshold must be a number")
        ts.expect(")")
        return ImplicitCET(macro, sel, op, Decimal(threshold), t1, t2, named, pos=pos)


@dataclass
class PatternLibrary:
    macros: dict = field(default_factory=dict)
    patterns: dict = field(default_factory=dict)

    def format(self) -> str:
        lines = [format_macro(m) for m in self.macros.values()]
        lines += [f"pattern {name} := {format_pattern(p)}" for name, p in self.patterns.items()]
        return "\n".join(lines) + "\n"


def parse_pattern(text: str, spec: Optional[ModelSpec] = None, macros: Optional[dict] = None):
    """Parse one pattern expression; raise ParseError with diagnostics."""
    try:
        ts = TokenStream(tokenize(text))
        p = _PatternParser(ts, dict(macros or {})).pattern()
        ts.expect_eof()
    except ParseError:
        raise
    except Exception as exc:  # noqa: BLE001 - parsing is total
        raise ParseError([Diagnostic("internal", f"{type(exc).__name__}: {exc}")]) from exc
    problems = well_formed(p, spec)
    if problems:
        raise ParseError(problems)
    return p


def parse_pattern_file(text: str, spec: Optional[ModelSpec] = None, macros: Optional[dict] = None) -> PatternLibrary:
    """Parse ``macro NAME := ...`` and ``pattern NAME := ...`` statements."""
    lib = PatternLibrary(macros=dict(macros or {}))
    diags: list[Diagnostic] = []
    try:
        ts = TokenStream(tokenize(text))
        parser = _PatternParser(ts, lib.macros)
        while ts.peek.kind != "EOF":
            kw = ts.expect_name("'pattern' or 'macro'")
            if kw.text not in ("pattern", "macro"):
                raise ParseError([Diagnostic("syntax", f"expected 'pattern' or 'macro', found {kw.text!r}", kw.line, kw.col)])
            name_tok = ts.expect_name("name")
            ts.expect(":=")
            table = lib.macros if kw.text == "macro" else lib.patterns
            if name_tok.text in table:
                diags.append(Diagnostic("duplicate name", f"{kw.text} {name_tok.text!r} defined twice", name_tok.line, name_tok.col))
            if kw.text == "macro":
                lib.macros[name_tok.text] = parser.macro_body(name_tok.text)
            else:
                lib.patterns[name_tok.text] = parser.pattern()
    except ParseError as exc:
        raise ParseError(diags + exc.diagnostics) from None
    except Exception as exc:  # noqa: BLE001 - parsing is total
        raise ParseError([Diagnostic("internal", f"{type(exc).__name__}: {exc}")]) from exc
    if spec is not None:
        for m in lib.macros.values():
            diags.extend(check_macro(spec, m))
    for p in lib.patterns.values():
        diags.extend(well_formed(p, spec))
    if diags:
        raise ParseError(diags)
    return lib


# --- well-formedness -----------------------------------------------------


def _rule_known(spec: ModelSpec, rule: str) -> bool:
    if "." in rule:
        type_name, rid = rule.split(".", 1)
        t = spec.agent_type(type_name)
        return t is not None and any(r.id == rid for r in t.rules)
    return any(r.id == rule for t in spec.agent_types for r in t.rules)


def _leaf_domains(spec: ModelSpec, leaf: StateLeaf) -> list:
    if leaf.is_global:
        g = spec.global_var(leaf.var)
        return [g.domain] if g else []
    types = [spec.agent_type(leaf.agent_type)] if leaf.agent_type else list(spec.agent_types)
    return [t.var(leaf.var).domain for t in types if t is not None and t.var(leaf.var) is not None]


def _check_leaf_range(leaf: StateLeaf, domains: list, diag) -> None:
    for dom in domains:
        if leaf.kind == "interval":
            for b in (leaf.lo, leaf.hi):
                if b is None:
                    continue
                if dom.kind == "bool" or isinstance(b, bool):
                    diag(leaf, "range outside domain", f"interval on {leaf.var} does not fit {dom}")
                elif not dom.lo <= b <= dom.hi:
                    diag(leaf, "range outside domain", f"bound {format_value(b)} of {leaf.var} outside {dom}")
        elif leaf.kind == "equals" and not dom.contains(leaf.value):
            diag(leaf, "range outside domain", f"value {format_value(leaf.value)} of {leaf.var} outside {dom}")
        elif leaf.kind == "notnull" and not dom.nullable:
            pass  # trivially satisfied, still well-formed


def well_formed(p, spec: Optional[ModelSpec] = None, _event_ctx: bool = False) -> list[Diagnostic]:
    """Diagnostics for every violated pattern invariant (empty when well formed)."""
    out: list[Diagnostic] = []

    def diag(node, code, msg):
        out.append(Diagnostic(code, msg, *node.pos))

    def state(node, event_ctx):
        if isinstance(node, StateNode):
            if node.relation not in (COMPOSE, SUBSET):
                diag(node, "bad relation", f"unknown relation {node.relation!r}")
            if not node.children:
                diag(node, "empty node", f"{node.relation} node needs at least one child")
            for c in node.children:
                state(c, event_ctx)
            return
        leaf = node
        if leaf.kind == "interval" and leaf.lo is not None and leaf.hi is not None:
            try:
                if leaf.lo > leaf.hi:
                    diag(leaf, "empty range", f"interval [{format_value(leaf.lo)}, {format_value(leaf.hi)}] is empty")
            except TypeError:
                diag(leaf, "bad range", "interval bounds are not comparable")
        if event_ctx and (leaf.agent or leaf.agent_type):
            diag(leaf, "agent selector in event", "event constraints refer to substate variables, not agents")
        if spec is not None:
            domains = _leaf_domains(spec, leaf)
            if not domains:
                where = "global" if leaf.is_global else (leaf.agent_type or "any agent type")
                diag(leaf, "unknown identifier", f"variable {leaf.var!r} not declared for {where}")
            _check_leaf_range(leaf, domains, diag)
            if leaf.agent_type and spec.agent_type(leaf.agent_type) is None:
                diag(leaf, "unknown identifier", f"unknown agent type {leaf.agent_type!r}")

    def bindings(root_leaves, anchor):
        declared = {leaf.bind for leaf in root_leaves if leaf.bind}
        for leaf in root_leaves:
            if leaf.kind == "binding" and leaf.ref not in declared:
                diag(leaf, "undeclared binding", f"binding {leaf.ref!r} is not declared by any leaf")

    if is_state_pattern(p):
        state(p, _event_ctx)
        bindings(leaves(p), p)
    elif isinstance(p, EventPattern):
        c = p.constraint
        for side in (c.source, c.target):
            if side is not None:
                state(side, True)
        bindings(leaves(c.source) + leaves(c.target), p)
        if p.projection is not None:
            extra = set(p.projection) - constraint_keys(c)
            if extra:
                diag(p, "bad projection", f"projection variables {sorted(extra)} not referenced by the constraint")
        if p.rules is not None:
            if not p.rules:
                diag(p, "empty selector", "rule selector is empty")
            if spec is not None:
                for r in p.rules:
                    if not _rule_known(spec, r):
                        diag(p, "unknown rule", f"unknown rule {r!r}")
    elif isinstance(p, CETNode):
        if p.relation not in (SEQ, ALL, ANY):
            diag(p, "bad relation", f"unknown relation {p.relation!r}")
        if not p.children:
            diag(p, "empty node", f"{p.relation} node needs at least one child")
        if p.window is not None and p.window <= 0:
            diag(p, "bad window", f"window must be > 0, got {p.window}")
        if p.relation == ANY and p.window is not None:
            diag(p, "bad window", "ANY takes no window")
        for c in p.children:
            if is_state_pattern(c):
                diag(p, "bad child", "complex event children must be event patterns")
            else:
                out.extend(well_formed(c, spec))
    elif isinstance(p, ImplicitCET):
        if p.macro.kind not in MACRO_KINDS:
            diag(p, "unknown aggregation", f"unknown aggregation {p.macro.kind!r}")
        if p.op not in _CMP:
            diag(p, "bad predicate", f"unknown comparison {p.op!r}")
        if p.selector not in SELECTORS:
            diag(p, "bad predicate", f"unknown selector {p.selector!r}")
        if spec is not None:
            for d in check_macro(spec, p.macro):
                out.append(Diagnostic(d.code, d.message, *(p.pos if not d.line else (d.line, d.col))))
    else:
        out.append(Diagnostic("not a pattern", f"{type(p).__name__} is not a pattern"))
    return out


def pattern_kind(p) -> str:
    if is_state_pattern(p):
        return "state"
    if isinstance(p, EventPattern):
        return "event"
    return "complex"


__all__ = [
    "ALL", "ANY", "COMPOSE", "CETNode", "EventPattern", "ImplicitCET", "PatternLibrary", "SEQ", "SUBSET",
    "StateLeaf", "StateNode", "TransitionConstraint", "coarsen", "format_pattern", "is_state_pattern",
    "parse_pattern", "parse_pattern_file", "pattern_kind", "project", "referenced_vars", "well_formed",
]
