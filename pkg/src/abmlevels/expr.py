"""Condition and arithmetic expressions: AST, parser, printer and compiler.

The same expression language appears in rule conditions, rule assignments,
initializers and macro-variable definitions.  Expressions are compiled to
closures over an :class:`EvalContext` so the engine does not walk the tree on
every evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Callable, Iterator, Optional

from .lexing import Diagnostic, ParseError, TokenStream
from .values import Value, format_value

QUANTIFIERS = ("any", "all", "count", "frac")
FUNCTIONS = ("min", "max", "abs")
COMPARISONS = ("<", "<=", "=", "!=", ">=", ">")
KEYWORDS = {"and", "or", "not", "true", "false", "null", "global", "nbr", "agent", "bernoulli"}


class EvalError(Exception):
    """A runtime failure while evaluating an expression."""


# --- AST -----------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    pos: tuple = field(default=(0, 0), compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Const(Expr):
    value: Value


@dataclass(frozen=True)
class Name(Expr):
    """Bare identifier: an own agent variable or a model parameter."""

    name: str


@dataclass(frozen=True)
class GlobalRef(Expr):
    name: str


@dataclass(frozen=True)
class NbrRef(Expr):
    name: str


@dataclass(frozen=True)
class AgentRef(Expr):
    index: Expr
    name: str


@dataclass(frozen=True)
class Quant(Expr):
    kind: str
    body: Expr


@dataclass(frozen=True)
class Bernoulli(Expr):
    p: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    args: tuple


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


TRUE = Const(True)


def children(node: Expr) -> tuple:
    if isinstance(node, AgentRef):
        return (node.index,)
    if isinstance(node, Quant):
        return (node.body,)
    if isinstance(node, Bernoulli):
        return (node.p,)
    if isinstance(node, Call):
        return node.args
    if isinstance(node, Unary):
        return (node.operand,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    return ()


def walk(node: Expr) -> Iterator[Expr]:
    yield node
    for c in children(node):
        yield from walk(c)


# --- parser --------------------------------------------------------------


def parse_expr(ts: TokenStream) -> Expr:
    return _or(ts)


def _pos(ts: TokenStream) -> tuple:
    return (ts.peek.line, ts.peek.col)


def _or(ts):
    left = _and(ts)
    while ts.at("or"):
        p = _pos(ts)
        ts.next()
        left = Binary("or", left, _and(ts), pos=p)
    return left


def _and(ts):
    left = _not(ts)
    while ts.at("and"):
        p = _pos(ts)
        ts.next()
        left = Binary("and", left, _not(ts), pos=p)
    return left


def _not(ts):
    if ts.at("not"):
        p = _pos(ts)
        ts.next()
        return Unary("not", _not(ts), pos=p)
    return _cmp(ts)


def _cmp(ts):
    left = _add(ts)
    tok = ts.peek
    if tok.kind == "OP" and tok.text in COMPARISONS + ("==",):
        ts.next()
        op = "=" if tok.text == "==" else tok.text
        left = Binary(op, left, _add(ts), pos=(tok.line, tok.col))
    return left


def _add(ts):
    left = _mul(ts)
    while ts.peek.kind == "OP" and ts.peek.text in ("+", "-"):
        tok = ts.next()
        left = Binary(tok.text, left, _mul(ts), pos=(tok.line, tok.col))
    return left


def _mul(ts):
    left = _unary(ts)
    while ts.peek.kind == "OP" and ts.peek.text in ("*", "/", "//", "%"):
        tok = ts.next()
        left = Binary(tok.text, left, _unary(ts), pos=(tok.line, tok.col))
    return left


def _unary(ts):
    if ts.peek.kind == "OP" and ts.peek.text == "-":
        tok = ts.next()
        operand = _unary(ts)
        if isinstance(operand, Const) and isinstance(operand.value, (int, Decimal)) and not isinstance(operand.value, bool):
            return Const(-operand.value, pos=(tok.line, tok.col))
        return Unary("-", operand, pos=(tok.line, tok.col))
    return _atom(ts)


def _atom(ts) -> Expr:
    tok = ts.peek
    p = (tok.line, tok.col)
    if tok.kind == "NUMBER":
        ts.next()
        return Const(Decimal(tok.text) if "." in tok.text else int(tok.text), pos=p)
    if ts.accept("("):
        inner = parse_expr(ts)
        ts.expect(")")
        return inner
    if tok.kind != "NAME":
        ts.fail("expected an expression")
    word = tok.text
    if word in ("true", "false", "null"):
        ts.next()
        return Const({"true": True, "false": False, "null": None}[word], pos=p)
    if word == "global":
        ts.next()
        ts.expect(".")
        return GlobalRef(ts.expect_name("global variable").text, pos=p)
    if word == "nbr":
        ts.next()
        ts.expect(".")
        return NbrRef(ts.expect_name("neighbor variable").text, pos=p)
    if word == "agent" and ts.peek_at(1).text == "[":
        ts.next()
        ts.expect("[")
        index = parse_expr(ts)
        ts.expect("]")
        ts.expect(".")
        return AgentRef(index, ts.expect_name("agent variable").text, pos=p)
    if ts.peek_at(1).text == "(" and ts.peek_at(1).kind == "OP":
        if word == "bernoulli":
            ts.next()
            ts.expect("(")
            arg = parse_expr(ts)
            ts.expect(")")
            return Bernoulli(arg, pos=p)
        if word in QUANTIFIERS:
            ts.next()
            ts.expect("(")
            body = parse_expr(ts)
            ts.expect(")")
            return Quant(word, body, pos=p)
        if word in FUNCTIONS:
            ts.next()
            ts.expect("(")
            args = [parse_expr(ts)]
            while ts.accept(","):
                args.append(parse_expr(ts))
            ts.expect(")")
            return Call(word, tuple(args), pos=p)
        ts.fail(f"unknown function {word!r}")
    if word in KEYWORDS:
        ts.fail(f"unexpected keyword {word!r}")
    ts.next()
    return Name(word, pos=p)


# --- printer -------------------------------------------------------------

_PREC = {"or": 1, "and": 2, "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6, "//": 6, "%": 6}


def _prec(node: Expr) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary):
        return 3 if node.op == "not" else 7
    if isinstance(node, Const) and isinstance(node.value, (int, Decimal)) and not isinstance(node.value, bool) and node.value < 0:
        return 7
    return 8


def format_expr(node: Expr) -> str:
    if isinstance(node, Const):
        return format_value(node.value)
    if isinstance(node, Name):
        return node.name
    if isinstance(node, GlobalRef):
        return f"global.{node.name}"
    if isinstance(node, NbrRef):
        return f"nbr.{node.name}"
    if isinstance(node, AgentRef):
        return f"agent[{format_expr(node.index)}].{node.name}"
    if isinstance(node, Quant):
        return f"{node.kind}({format_expr(node.body)})"
    if isinstance(node, Bernoulli):
        return f"bernoulli({format_expr(node.p)})"
    if isinstance(node, Call):
        return f"{node.fn}({', '.join(format_expr(a) for a in node.args)})"
    if isinstance(node, Unary):
        inner = format_expr(node.operand)
        if _prec(node.operand) < _prec(node) or (node.op == "-" and _prec(node.operand) == 7):
            inner = f"({inner})"
        return f"not {inner}" if node.op == "not" else f"-{inner}"
    if isinstance(node, Binary):
        prec = _PREC[node.op]
        left, right = format_expr(node.left), format_expr(node.right)
        # comparisons are non-associative; arithmetic is left-associative
        if _prec(node.left) < prec or (prec == 4 and _prec(node.left) == 4):
            left = f"({left})"
        if _prec(node.right) <= prec:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression: {node!r}")


# --- resolution ----------------------------------------------------------


@dataclass(frozen=True)
class Scope:
    """Names visible to an expression.

    ``local`` is None when the expression has no owning agent type (global
    initializers).  ``agent_vars`` lists every agent-local variable of any
    type, for ``nbr.`` and ``agent[..].`` references.
    """

    local: Optional[frozenset]
    params: frozenset
    globals: frozenset
    agent_vars: frozenset = frozenset()
    allow_random: bool = True
    allow_agents: bool = True


def check_expr(node: Expr, scope: Scope, in_quant: bool = False) -> list[Diagnostic]:
    """Name-resolution and well-formedness diagnostics for one expression."""
    out: list[Diagnostic] = []

    def diag(n, code, msg):
        out.append(Diagnostic(code, msg, *n.pos))

    def visit(n, in_q):
        if isinstance(n, Name):
            is_local = scope.local is not None and n.name in scope.local
            if is_local and n.name in scope.params:
                diag(n, "ambiguous name", f"{n.name!r} is both a variable and a parameter")
            elif not is_local and n.name not in scope.params:
                diag(n, "unknown identifier", f"{n.name!r} is not a variable or parameter in scope")
        elif isinstance(n, GlobalRef):
            if n.name not in scope.globals:
                diag(n, "unknown identifier", f"unknown global variable {n.name!r}")
        elif isinstance(n, NbrRef):
            if not in_q:
                diag(n, "nbr outside quantifier", "nbr. may only appear inside any/all/count/frac")
            elif n.name not in scope.agent_vars:
                diag(n, "unknown identifier", f"unknown agent variable {n.name!r}")
        elif isinstance(n, AgentRef):
            if not scope.allow_agents:
                diag(n, "agent reference not allowed", "agent[...] not allowed here")
            elif n.name not in scope.agent_vars:
                diag(n, "unknown identifier", f"unknown agent variable {n.name!r}")
        elif isinstance(n, Quant):
            if not scope.allow_agents or scope.local is None:
                diag(n, "quantifier not allowed", f"{n.kind}(...) needs an agent context")
            if in_q:
                diag(n, "nested quantifier", "quantifiers may not be nested")
        elif isinstance(n, Bernoulli):
            if not scope.allow_random:
                diag(n, "bernoulli not allowed", "bernoulli(...) not allowed here")
            if in_q:
                diag(n, "bernoulli in quantifier", "bernoulli(...) may not appear inside a quantifier")
            if isinstance(n.p, Const):
                p = n.p.value
                if isinstance(p, bool) or not isinstance(p, (int, Decimal)) or not 0 <= p <= 1:
                    diag(n, "probability out of range", f"bernoulli probability {format_value(p)} not in [0, 1]")
        for c in children(n):
            visit(c, in_q or isinstance(n, Quant))

    visit(node, in_quant)
    return out


# --- evaluation ----------------------------------------------------------


class EvalContext:
    """Mutable evaluation state handed to compiled expressions."""

    __slots__ = ("agent", "agents", "globals", "params", "neighbors", "chooser", "reads", "nbr")

    def __init__(self, agents, globals_, params, neighbors=None, chooser=None):
        self.agent = 0
        self.agents = agents
        self.globals = globals_
        self.params = params
        self.neighbors = neighbors
        self.chooser = chooser
        self.reads: Optional[dict] = None
        self.nbr = 0


Compiled = Callable[[EvalContext], Any]


def _num(v, what: str):
    if v is None:
        raise EvalError(f"null used in {what}")
    if isinstance(v, bool):
        raise EvalError(f"boolean used in {what}")
    return v


def _bool(v, what: str) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"{what} expects a boolean, got {format_value(v)}")
    return v


def _equal(a, b) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def _divide(a, b):
    if b == 0:
        raise EvalError("division by zero")
    if isinstance(a, int) and isinstance(b, int) and a % b == 0:
        return a // b
    return Decimal(a) / Decimal(b)


_ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _divide,
    "//": lambda a, b: (a // b) if b != 0 else _divide(a, b),
    "%": lambda a, b: (a % b) if b != 0 else _divide(a, b),
}
_ORDER = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def compile_expr(node: Expr, scope: Scope) -> Compiled:
    """Compile a resolved expression into a closure over EvalContext."""
    if isinstance(node, Const):
        value = node.value
        return lambda ctx: value
    if isinstance(node, Name):
        name = node.name
        if scope.local is not None and name in scope.local:
            def own(ctx):
                v = ctx.agents[ctx.agent][name]
                if ctx.reads is not None:
                    ctx.reads[name] = v
                return v
            return own
        return lambda ctx: ctx.params[name]
    if isinstance(node, GlobalRef):
        key = "global." + node.name
        name = node.name

        def glob(ctx):
            v = ctx.globals[name]
            if ctx.reads is not None:
                ctx.reads[key] = v
            return v
        return glob
    if isinstance(node, NbrRef):
        name = node.name

        def nbr(ctx):
            row = ctx.agents[ctx.nbr]
            if name not in row:
                raise EvalError(f"agent {ctx.nbr} has no variable {name!r}")
            v = row[name]
            if ctx.reads is not None:
                ctx.reads[f"@{ctx.nbr}.{name}"] = v
            return v
        return nbr
    if isinstance(node, AgentRef):
        index = compile_expr(node.index, scope)
        name = node.name

        def other(ctx):
            i = index(ctx)
            if isinstance(i, bool) or not isinstance(i, int) or not 0 <= i < len(ctx.agents):
                raise EvalError(f"agent[{format_value(i)}] does not exist")
            row = ctx.agents[i]
            if name not in row:
                raise EvalError(f"agent {i} has no variable {name!r}")
            v = row[name]
            if ctx.reads is not None:
                ctx.reads[f"@{i}.{name}"] = v
            return v
        return other
    if isinstance(node, Quant):
        body = compile_expr(node.body, scope)
        kind = node.kind

        def quant(ctx):
            hits = 0
            nbrs = ctx.neighbors[ctx.agent]
            saved = ctx.nbr
            try:
                for j in nbrs:
                    ctx.nbr = j
                    if _bool(body(ctx), kind):
                        hits += 1
                        if kind == "any":
                            return True
                    elif kind == "all":
                        return False
            finally:
                ctx.nbr = saved
            if kind == "any":
                return False
            if kind == "all":
                return True
            if kind == "count":
                return hits
            return Decimal(hits) / Decimal(len(nbrs)) if nbrs else Decimal(0)
        return quant
    if isinstance(node, Bernoulli):
        p_fn = compile_expr(node.p, scope)

        def bern(ctx):
            p = _num(p_fn(ctx), "bernoulli")
            if not 0 <= p <= 1:
                raise EvalError(f"bernoulli probability {format_value(p)} not in [0, 1]")
            return ctx.chooser.bernoulli(p)
        return bern
    if isinstance(node, Call):
        args = [compile_expr(a, scope) for a in node.args]
        fn = node.fn
        if fn == "abs":
            if len(args) != 1:
                raise EvalError("abs takes one argument")
            a0 = args[0]
            return lambda ctx: abs(_num(a0(ctx), "abs"))
        pick = min if fn == "min" else max
        return lambda ctx: pick(_num(a(ctx), fn) for a in args)
    if isinstance(node, Unary):
        operand = compile_expr(node.operand, scope)
        if node.op == "not":
            return lambda ctx: not _bool(operand(ctx), "not")
        return lambda ctx: -_num(operand(ctx), "negation")
    if isinstance(node, Binary):
        left = compile_expr(node.left, scope)
        right = compile_expr(node.right, scope)
        op = node.op
        if op == "and":
            return lambda ctx: _bool(left(ctx), "and") and _bool(right(ctx), "and")
        if op == "or":
            return lambda ctx: _bool(left(ctx), "or") or _bool(right(ctx), "or")
        if op == "=":
            return lambda ctx: _equal(left(ctx), right(ctx))
        if op == "!=":
            return lambda ctx: not _equal(left(ctx), right(ctx))
        if op in _ORDER:
            cmp = _ORDER[op]

            def order(ctx):
                a, b = left(ctx), right(ctx)
                if a is None or b is None:
                    return False
                return cmp(_num(a, op), _num(b, op))
            return order
        arith = _ARITH[op]
        return lambda ctx: arith(_num(left(ctx), op), _num(right(ctx), op))
    raise TypeError(f"not an expression: {node!r}")


def parse_expr_text(text: str) -> Expr:
    """Parse a standalone expression (used by tests and the pattern language)."""
    from .lexing import tokenize

    ts = TokenStream(tokenize(text))
    node = parse_expr(ts)
    ts.expect_eof()
    return node


__all__ = [
    "AgentRef", "Bernoulli", "Binary", "Call", "Compiled", "Const", "EvalContext", "EvalError",
    "Expr", "GlobalRef", "Name", "NbrRef", "ParseError", "Quant", "Scope", "TRUE", "Unary",
    "check_expr", "compile_expr", "format_expr", "parse_expr", "parse_expr_text", "walk",
]
