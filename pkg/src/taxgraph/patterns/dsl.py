"""Tokenizer, recursive-descent parser and printer for the pattern language.

Grammar::

    pattern    := stmt+
    stmt       := constraint ";" | edge ";"
    constraint := VAR "." field "=" VALUE
    field      := "hq" | "legal" | "form" | "region"
    edge       := VAR "-[" kind ("+")? "]->" VAR
    kind       := "direct" | "ultimate"
    VAR        := [a-z][a-z0-9]*
    VALUE      := [A-Z0-9]+

Whitespace is insignificant and ``#`` starts a comment running to the end of
the line.  Variables are declared implicitly by their first use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from ..model import EdgeKind

FIELDS = ("hq", "legal", "form", "region")
KINDS = {"direct": EdgeKind.DIRECT, "ultimate": EdgeKind.ULTIMATE}

_VAR_RE = re.compile(r"[a-z][a-z0-9]*")
_VALUE_RE = re.compile(r"[A-Z0-9]+")
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<edge_open>-\[)
  | (?P<edge_close>\]->)
  | (?P<punct>[.=;+])
  | (?P<word>[A-Za-z0-9_]+)
    """,
    re.VERBOSE,
)


class PatternError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class PatternSyntaxError(PatternError):
    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        if expected:
            message = f"{message}; expected one of {', '.join(sorted(expected))}"
        super().__init__(message, line, column)
        self.expected = expected


class PatternSemanticError(PatternError):
    pass


@dataclass(frozen=True)
class Token:
    type: str  # VAR, VALUE, -[, ]->, ., =, ;, +, EOF
    text: str
    line: int
    column: int


def tokenize(text: str) -> Iterator[Token]:
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if m is None:
            raise PatternSyntaxError(f"unexpected character {text[pos]!r}", line, column)
        kind, lexeme = m.lastgroup, m.group()
        if kind == "word":
            if _VAR_RE.fullmatch(lexeme):
                yield Token("VAR", lexeme, line, column)
            elif _VALUE_RE.fullmatch(lexeme):
                yield Token("VALUE", lexeme, line, column)
            else:
                raise PatternSyntaxError(f"invalid word {lexeme!r}", line, column)
        elif kind in ("edge_open", "edge_close", "punct"):
            yield Token(lexeme, lexeme, line, column)
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    yield Token("EOF", "", line, pos - line_start + 1)


@dataclass(frozen=True, order=True)
class Constraint:
    var: str
    field: str
    value: str


@dataclass(frozen=True)
class EdgeClause:
    """``source`` is consolidated by ``target`` (child -> parent)."""

    source: str
    target: str
    kind: EdgeKind
    transitive: bool = False


@dataclass(frozen=True)
class PatternAST:
    variables: tuple[str, ...]
    constraints: tuple[Constraint, ...]
    edges: tuple[EdgeClause, ...]

    def constraints_for(self, var: str) -> dict[str, str]:
        return {c.field: c.value for c in self.constraints if c.var == var}


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(tokenize(text))
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def expect(self, *types: str) -> Token:
        tok = self.tok
        if tok.type not in types:
            found = "end of input" if tok.type == "EOF" else repr(tok.text)
            raise PatternSyntaxError(
                f"unexpected {found}", tok.line, tok.column, frozenset(types)
            )
        self.pos += 1
        return tok

    def keyword(self, options, role: str) -> Token:
        tok = self.tok
        if tok.type != "VAR" or tok.text not in options:
            found = "end of input" if tok.type == "EOF" else repr(tok.text)
            raise PatternSyntaxError(
                f"unexpected {found} as {role}", tok.line, tok.column, frozenset(options)
            )
        self.pos += 1
        return tok

    def parse(self) -> PatternAST:
        constraints: dict[tuple[str, str], Constraint] = {}
        edges: list[EdgeClause] = []
        seen_vars: set[str] = set()
        if self.tok.type == "EOF":
            self.expect("VAR")
        while self.tok.type != "EOF":
            var_tok = self.expect("VAR")
            seen_vars.add(var_tok.text)
            if self.tok.type == ".":
                self.pos += 1
                field_tok = self.keyword(FIELDS, "field")
                self.expect("=")
                value = self.expect("VALUE").text
                key = (var_tok.text, field_tok.text)
                if key in constraints:
                    raise PatternSemanticError(
                        f"duplicate constraint {var_tok.text}.{field_tok.text}",
                        field_tok.line, field_tok.column,
                    )
                constraints[key] = Constraint(var_tok.text, field_tok.text, value)
            elif self.tok.type == "-[":
                self.pos += 1
                kind_tok = self.keyword(KINDS, "edge kind")
                transitive = False
                if self.tok.type == "+":
                    self.pos += 1
                    transitive = True
                self.expect("]->")
                target = self.expect("VAR")
                if target.text == var_tok.text:
                    raise PatternSemanticError(
                        f"edge connects variable {target.text} to itself",
                        target.line, target.column,
                    )
                seen_vars.add(target.text)
                edges.append(EdgeClause(var_tok.text, target.text, KINDS[kind_tok.text], transitive))
            else:
                self.expect(".", "-[")
            self.expect(";")
        if not edges:
            tok = self.tok
            raise PatternSemanticError("pattern needs at least one edge clause", tok.line, tok.column)
        order = {f: i for i, f in enumerate(FIELDS)}
        ordered = sorted(constraints.values(), key=lambda c: (c.var, order[c.field]))
        return PatternAST(tuple(sorted(seen_vars)), tuple(ordered), tuple(edges))


def parse_pattern(text: str) -> PatternAST:
    """Parse pattern text into a :class:`PatternAST`.

    Raises :class:`PatternSyntaxError` or :class:`PatternSemanticError`, both
    carrying the 1-based line and column of the offending token.
    """
    return _Parser(text).parse()


def format_pattern(ast: PatternAST) -> str:
    """Canonical text form; ``parse_pattern(format_pattern(a)) == a``."""
    lines = [f"{c.var}.{c.field}={c.value};" for c in ast.constraints]
    for e in ast.edges:
        plus = "+" if e.transitive else ""
        lines.append(f"{e.source} -[{e.kind.value}{plus}]-> {e.target};")
    return "\n".join(lines) + "\n"
