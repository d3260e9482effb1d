"""Parser for the line-oriented model language.

A model file looks like::

    model toggle

    params
      p: decimal[0, 1, 2] = 0.50

    globals
      tick: int[0, 100] = 0

    agents
      agent Cell
        flag: bool
        rule flip: when true do flag := not flag

    population
      Cell 2: flag = [true, false]

    topology
      complete

    schedule
      synchronous

Sections may appear in any order.  A logical line continues onto the next
physical line while brackets are unbalanced or when it ends with ``\\``.
"""

from __future__ import annotations

from dataclasses import replace
from decimal import Decimal

from .expr import Expr, parse_expr
from .lexing import Diagnostic, ParseError, Token, TokenStream, tokenize
from .model import (
    ASYNC_FIXED, ASYNC_RANDOM, EDGES, GLOBAL, GRID, SYNCHRONOUS, AgentType, Assignment, Initializer,
    ModelSpec, ParamDecl, PopulationEntry, Rule, Schedule, Topology, VariableDecl, validate_model,
)
from .values import ValueDomain

SECTIONS = ("params", "globals", "agents", "population", "topology", "schedule")


def _logical_lines(text: str):
    """Yield (first line number, joined text) for each logical line."""
    buf: list[str] = []
    start = 0
    depth = 0
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not buf:
            start = number
        cont = line.rstrip().endswith("\\")
        if cont:
            line = line.rstrip()[:-1]
        buf.append(line)
        depth += sum(line.count(c) for c in "([{") - sum(line.count(c) for c in ")]}")
        if cont or depth > 0:
            continue
        joined = "\n".join(buf)
        buf, depth = [], 0
        if joined.strip():
            yield start, joined
    if buf and "".join(buf).strip():
        yield start, "\n".join(buf)


def _literal(ts: TokenStream):
    neg = ts.accept("-")
    tok = ts.peek
    if tok.kind == "NUMBER":
        ts.next()
        value = Decimal(tok.text) if "." in tok.text else int(tok.text)
        return -value if neg else value
    if not neg and tok.kind == "NAME" and tok.text in ("true", "false", "null"):
        ts.next()
        return {"true": True, "false": False, "null": None}[tok.text]
    ts.fail("expected a literal value")


def _int(ts: TokenStream) -> int:
    value = _literal(ts)
    if isinstance(value, bool) or not isinstance(value, int):
        ts.fail("expected an integer")
    return value


def _domain(ts: TokenStream) -> ValueDomain:
    kind = ts.expect_name("domain kind").text
    if kind == "bool":
        dom = ValueDomain.boolean()
    elif kind == "int":
        ts.expect("[")
        lo = _int(ts)
        ts.expect(",")
        hi = _int(ts)
        ts.expect("]")
        dom = ValueDomain.integer(lo, hi)
    elif kind == "decimal":
        ts.expect("[")
        lo = _literal(ts)
        ts.expect(",")
        hi = _literal(ts)
        ts.expect(",")
        d = _int(ts)
        ts.expect("]")
        for v in (lo, hi):
            if isinstance(v, bool) or v is None:
                ts.fail("decimal bounds must be numbers")
        if d < 0:
            ts.fail("precision must be >= 0")
        dom = ValueDomain.decimal(lo, hi, d)
    else:
        raise ParseError([Diagnostic("syntax", f"unknown domain kind {kind!r}", ts.tokens[ts.pos - 1].line, ts.tokens[ts.pos - 1].col)])
    if ts.accept("?"):
        dom = ValueDomain(dom.kind, dom.lo, dom.hi, dom.precision, True)
    return dom


def _word(ts: TokenStream) -> str:
    """A hyphenated keyword such as ``async-random`` or ``von-neumann``."""
    parts = [ts.expect_name().text]
    while ts.at("-") and ts.peek_at(1).kind == "NAME":
        ts.next()
        parts.append(ts.next().text)
    return "-".join(parts)


def _initializer(ts: TokenStream) -> Initializer:
    tok = ts.peek
    pos = (tok.line, tok.col)
    if ts.accept("["):
        values = []
        if not ts.at("]"):
            values.append(_literal(ts))
            while ts.accept(","):
                values.append(_literal(ts))
        ts.expect("]")
        return Initializer("list", values=tuple(values), pos=pos)
    nxt = ts.peek_at(1)
    if tok.kind == "NAME" and tok.text in ("random", "id") and (nxt.kind == "EOF" or nxt.text == ","):
        ts.next()
        return Initializer(tok.text, pos=pos)
    return Initializer("const", expr=parse_expr(ts), pos=pos)


class _ModelParser:
    def __init__(self, text: str):
        self.text = text
        self.diags: list[Diagnostic] = []
        self.name = None
        self.params: list = []
        self.globals: list = []
        self.types: list = []  # [name, vars, rules, pos]
        self.population: list = []
        self.topology = None
        self.schedule_kind = None
        self.order: tuple = ()
        self.mode = "first-match"
        self.topology_pos = (0, 0)
        self.schedule_pos = (0, 0)

    def run(self) -> ModelSpec:
        section = None
        for line_no, text in _logical_lines(self.text):
            try:
                ts = TokenStream(tokenize(text, line_no))
            except ParseError as exc:
                self.diags.extend(exc.diagnostics)
                continue
            first = ts.peek
            if first.kind == "NAME" and first.text in SECTIONS and ts.peek_at(1).kind == "EOF":
                section = first.text
                continue
            try:
                if first.kind == "NAME" and first.text == "model" and section is None:
                    ts.next()
                    self.name = ts.expect_name("model name").text
                    ts.expect_eof()
                elif section is None:
                    ts.fail("expected 'model NAME' or a section header")
                else:
                    getattr(self, "_" + section)(ts, first)
            except ParseError as exc:
                self.diags.extend(exc.diagnostics)
        if self.name is None:
            self.diags.append(Diagnostic("syntax", "missing 'model NAME' line", 1, 1))
        if self.diags:
            raise ParseError(self.diags)
        spec = ModelSpec(
            name=self.name,
            params=tuple(self.params),
            globals=tuple(self.globals),
            agent_types=tuple(AgentType(n, tuple(v), tuple(r), pos=p) for n, v, r, p in self.types),
            population=tuple(self.population),
            topology=replace(self.topology or Topology(), pos=self.topology_pos),
            schedule=Schedule(self.schedule_kind or SYNCHRONOUS, self.order, self.mode, pos=self.schedule_pos),
        )
        problems = validate_model(spec)
        if problems:
            raise ParseError(problems)
        return spec

    def _params(self, ts: TokenStream, first: Token) -> None:
        name = ts.expect_name("parameter name").text
        ts.expect(":")
        dom = _domain(ts)
        default = None
        if ts.accept("="):
            default = _literal(ts)
        ts.expect_eof()
        self.params.append(ParamDecl(name, dom, default, pos=(first.line, first.col)))

    def _globals(self, ts: TokenStream, first: Token) -> None:
        name = ts.expect_name("global name").text
        ts.expect(":")
        dom = _domain(ts)
        init = _initializer(ts) if ts.accept("=") else None
        ts.expect_eof()
        self.globals.append(VariableDecl(name, dom, GLOBAL, init, pos=(first.line, first.col)))

    def _agents(self, ts: TokenStream, first: Token) -> None:
        pos = (first.line, first.col)
        if ts.accept("agent"):
            self.types.append([ts.expect_name("agent type name").text, [], [], pos])
            ts.expect_eof()
            return
        if not self.types:
            ts.fail("expected 'agent NAME' before variables and rules")
        _, variables, rules, _ = self.types[-1]
        if ts.at("rule") and ts.peek_at(1).kind == "NAME":
            ts.next()
            rule_id = ts.expect_name("rule id").text
            ts.expect(":")
            ts.expect("when")
            cond: Expr = parse_expr(ts)
            ts.expect("do")
            assigns = [self._assignment(ts)]
            while ts.accept(","):
                assigns.append(self._assignment(ts))
            ts.expect_eof()
            rules.append(Rule(rule_id, cond, tuple(assigns), pos=pos))
            return
        name = ts.expect_name("variable name").text
        ts.expect(":")
        dom = _domain(ts)
        ts.expect_eof()
        variables.append(VariableDecl(name, dom, pos=pos))

    @staticmethod
    def _assignment(ts: TokenStream) -> Assignment:
        tok = ts.peek
        if ts.accept("global"):
            ts.expect(".")
            target = "global." + ts.expect_name("global variable").text
        else:
            target = ts.expect_name("assignment target").text
        ts.expect(":=")
        return Assignment(target, parse_expr(ts), pos=(tok.line, tok.col))

    def _population(self, ts: TokenStream, first: Token) -> None:
        type_name = ts.expect_name("agent type").text
        count = _int(ts)
        inits = []
        if ts.accept(":"):
            while True:
                var = ts.expect_name("variable name").text
                ts.expect("=")
                inits.append((var, _initializer(ts)))
                if not ts.accept(","):
                    break
        ts.expect_eof()
        self.population.append(PopulationEntry(type_name, count, tuple(inits), pos=(first.line, first.col)))

    def _topology(self, ts: TokenStream, first: Token) -> None:
        if self.topology is not None:
            ts.fail("topology declared twice")
        self.topology_pos = (first.line, first.col)
        kind = ts.expect_name("topology kind").text
        if kind == "complete":
            self.topology = Topology()
        elif kind == GRID:
            w, h = _int(ts), _int(ts)
            hood = _word(ts) if ts.peek.kind == "NAME" and ts.peek.text != "torus" else "moore"
            torus = ts.accept("torus")
            self.topology = Topology(GRID, w, h, hood, torus)
        elif kind == EDGES:
            edges = []
            while True:
                a = _int(ts)
                ts.expect("-")
                edges.append((a, _int(ts)))
                if not ts.accept(","):
                    break
            self.topology = Topology(EDGES, edges=tuple(edges))
        else:
            raise ParseError([Diagnostic("syntax", f"unknown topology {kind!r}", first.line, first.col)])
        ts.expect_eof()

    def _schedule(self, ts: TokenStream, first: Token) -> None:
        word = _word(ts)
        if word == "mode":
            self.mode = _word(ts)
        elif word in (SYNCHRONOUS, ASYNC_RANDOM, ASYNC_FIXED):
            if self.schedule_kind is not None:
                ts.fail("schedule declared twice")
            self.schedule_kind = word
            self.schedule_pos = (first.line, first.col)
            if word == ASYNC_FIXED:
                order = []
                while ts.peek.kind == "NUMBER":
                    order.append(_int(ts))
                self.order = tuple(order)
        else:
            raise ParseError([Diagnostic("syntax", f"unknown schedule {word!r}", first.line, first.col)])
        ts.expect_eof()


def parse_model(text: str) -> ModelSpec:
    """Parse and validate model-language source.

    Raises :class:`ParseError` carrying every diagnostic found; no other
    exception escapes for malformed input.
    """
    try:
        return _ModelParser(text).run()
    except ParseError:
        raise
    except Exception as exc:  # noqa: BLE001 - parsing is total
        raise ParseError([Diagnostic("internal", f"{type(exc).__name__}: {exc}")]) from exc
