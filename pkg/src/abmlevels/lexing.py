"""Tokenizer and diagnostics shared by the model and pattern languages."""

from __future__ import annotations

import re
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        where = f"{self.line}:{self.col}: " if self.line else ""
        return f"{where}{self.code}: {self.message}"


class ParseError(Exception):
    """Raised with the full diagnostic list when source text is rejected."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str  # NAME, NUMBER, OP, EOF
    text: str
    line: int
    col: int


_UNICODE_OPS = {"≤": "<=", "≥": ">=", "≠": "!=", "→": "->"}
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#.*)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|->|<=|>=|!=|//|==|--|[-+*/%()\[\]{},.:=<>?@|≤≥≠→])
    """,
    re.VERBOSE,
)


def tokenize(text: str, line: int = 1, col: int = 1) -> list[Token]:
    """Tokenize one logical line (or a multi-line fragment).

    Raises ParseError on an unexpected character.
    """
    tokens: list[Token] = []
    pos = 0
    cur_line, line_start = line, -(col - 1)
    while pos < len(text):
        ch = text[pos]
        if ch == "\n":
            cur_line += 1
            pos += 1
            line_start = pos
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError([Diagnostic("syntax", f"unexpected character {ch!r}", cur_line, pos - line_start + 1)])
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tok_text = m.group()
            if kind == "op":
                tok_text = _UNICODE_OPS.get(tok_text, tok_text)
            tokens.append(Token(kind.upper(), tok_text, cur_line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("EOF", "", cur_line, pos - line_start + 1))
    return tokens


@dataclass
class TokenStream:
    tokens: list[Token]
    pos: int = 0
    context: str = field(default="")

    @property
    def peek(self) -> Token:
        return self.tokens[self.pos]

    def peek_at(self, offset: int) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek
        return tok.kind in ("OP", "NAME") and tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.next()

    def expect_name(self, what: str = "identifier") -> Token:
        tok = self.peek
        if tok.kind != "NAME":
            self.fail(f"expected {what}")
        return self.next()

    def expect_eof(self) -> None:
        if self.peek.kind != "EOF":
            self.fail("unexpected trailing input")

    def fail(self, message: str) -> None:
        tok = self.peek
        found = "end of input" if tok.kind == "EOF" else repr(tok.text)
        raise ParseError([Diagnostic("syntax", f"{message}, found {found}", tok.line, tok.col)])
