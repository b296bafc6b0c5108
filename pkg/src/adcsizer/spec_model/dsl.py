"""Line-oriented parser for the relation DSL.

One statement per line, ``#`` starts a comment::

    var C_L : measured unit "F"
    var D : empirical in [1, 3]
    C_L >= 6*2^(2*N-2)*k*T_abs/(V_fs^2*(10^0.1-1)) @ Eq.2

Identifiers follow ``[A-Za-z_][A-Za-z0-9_,.]*``. Inside the argument list of
a function call a comma always separates arguments, so ``max(a,b)`` is a
two-argument call; outside calls ``R_on,max`` is a single name.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DslSyntaxError
from .expr import FUNCTIONS, BinOp, Call, Expr, Neg, Num, Var
from .library import ASSIGN, KINDS, LOWER, UPPER, Relation, RelationLibrary, VariableDef

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_START = re.compile(r"[A-Za-z_]")
_IDENT_BODY = "A-Za-z0-9_"


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, str, end
    text: str
    col: int  # 1-based


def _ident_end(src: str, pos: int, allow_comma: bool) -> int:
    n = len(src)
    while pos < n:
        c = src[pos]
        if c.isalnum() or c == "_":
            pos += 1
        elif c == "." or (c == "," and allow_comma):
            # a trailing separator is not part of the name
            if pos + 1 < n and (src[pos + 1].isalnum() or src[pos + 1] == "_"):
                pos += 1
            else:
                break
        else:
            break
    return pos


def tokenize(src: str, line: int = 1) -> list[Token]:
    toks: list[Token] = []
    # stack of open brackets: True for a function-call paren
    parens: list[bool] = []
    pos, n = 0, len(src)
    while pos < n:
        c = src[pos]
        if c.isspace():
            pos += 1
            continue
        if c == "#":
            break
        col = pos + 1
        m = _NUMBER.match(src, pos)
        if m and (c.isdigit() or c == "."):
            toks.append(Token("num", m.group(), col))
            pos = m.end()
            continue
        if _IDENT_START.match(c):
            in_call = any(parens)
            end = _ident_end(src, pos, allow_comma=not in_call)
            toks.append(Token("name", src[pos:end], col))
            pos = end
            continue
        if c == '"':
            end = src.find('"', pos + 1)
            if end < 0:
                raise DslSyntaxError(line, col, "closing '\"'")
            toks.append(Token("str", src[pos + 1 : end], col))
            pos = end + 1
            continue
        two = src[pos : pos + 2]
        if two in ("<=", ">="):
            toks.append(Token("op", two, col))
            pos += 2
            continue
        if c == "@":
            toks.append(Token("tag", src[pos + 1 :].split("#", 1)[0].strip(), col))
            break
        if c in "+-*/^()[],:=":
            if c == "(":
                parens.append(bool(toks) and toks[-1].kind == "name" and toks[-1].text in FUNCTIONS)
            elif c == ")" and parens:
                parens.pop()
            toks.append(Token("op", c, col))
            pos += 1
            continue
        raise DslSyntaxError(line, col, "a token", c)
    toks.append(Token("end", "", len(src) + 1))
    return toks


class _Parser:
    def __init__(self, toks: list[Token], line: int):
        self.toks = toks
        self.i = 0
        self.line = line

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, expected: str) -> DslSyntaxError:
        return DslSyntaxError(self.line, self.tok.col, expected, self.tok.text or "end of line")

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            raise self.fail(repr(text))

    def name(self) -> str:
        if self.tok.kind != "name":
            raise self.fail("identifier")
        text = self.tok.text
        self.i += 1
        return text

    def signed_number(self) -> float:
        sign = -1.0 if self.accept("-") else 1.0
        if self.tok.kind != "num":
            raise self.fail("number")
        value = float(self.tok.text)
        self.i += 1
        return sign * value

    def at_end(self) -> bool:
        return self.tok.kind in ("end", "tag")

    # expr := term (('+'|'-') term)*
    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    # term := unary (('*'|'/') unary)*
    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    # unary := '-' unary | power
    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    # power := atom ('^' unary)?     (right-associative)
    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if self.accept("("):
                if tok.text not in FUNCTIONS:
                    raise DslSyntaxError(self.line, tok.col, "a known function", tok.text)
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                lo, hi, _ = FUNCTIONS[tok.text]
                if len(args) < lo or (hi is not None and len(args) > hi):
                    raise DslSyntaxError(
                        self.line, tok.col, f"{lo}{'' if hi == lo else '+'} argument(s) to {tok.text}"
                    )
                return Call(tok.text, tuple(args))
            return Var(tok.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise self.fail("number, identifier or '('")


def parse_expr(text: str, line: int = 1) -> Expr:
    p = _Parser(tokenize(text, line), line)
    node = p.expr()
    if p.tok.kind != "end":
        raise p.fail("end of expression")
    return node


_RELOPS = {"=": ASSIGN, ">=": LOWER, "<=": UPPER}


def _parse_vardecl(p: _Parser, line: int) -> VariableDef:
    p.i += 1  # 'var'
    name = p.name()
    p.expect(":")
    kind = p.name()
    if kind not in KINDS:
        raise DslSyntaxError(line, p.toks[p.i - 1].col, f"one of {', '.join(KINDS)}", kind)
    lower = upper = value = None
    unit = ""
    if p.tok.kind == "name" and p.tok.text == "in":
        p.i += 1
        p.expect("[")
        lower = p.signed_number()
        p.expect(",")
        upper = p.signed_number()
        p.expect("]")
    if p.accept("="):
        value = p.signed_number()
    if p.tok.kind == "name" and p.tok.text == "unit":
        p.i += 1
        if p.tok.kind != "str":
            raise p.fail("quoted unit string")
        unit = p.tok.text
        p.i += 1
    if p.tok.kind != "end":
        raise p.fail("end of declaration")
    if kind == "empirical" and lower is None:
        raise DslSyntaxError(line, p.tok.col, f"an 'in [lo, hi]' interval for empirical {name}")
    if lower is not None and not lower <= upper:
        raise DslSyntaxError(line, p.tok.col, f"lower <= upper in the interval of {name}")
    return VariableDef(name, kind, lower, upper, value, unit, line)


def _parse_relation(p: _Parser, line: int) -> Relation:
    lhs = p.name()
    if not (p.tok.kind == "op" and p.tok.text in _RELOPS):
        raise p.fail("'=', '<=' or '>='")
    kind = _RELOPS[p.tok.text]
    p.i += 1
    rhs = p.expr()
    tag = ""
    if p.tok.kind == "tag":
        tag = p.tok.text
        p.i += 1
    if p.tok.kind != "end":
        raise p.fail("operator or end of relation")
    return Relation(lhs, kind, rhs, tag or f"L{line}", line)


def parse_library(text: str) -> RelationLibrary:
    """Parse DSL source into a validated :class:`RelationLibrary`."""
    variables: list[VariableDef] = []
    relations: list[Relation] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = tokenize(raw, lineno)
        if toks[0].kind == "end":
            continue
        p = _Parser(toks, lineno)
        if toks[0].kind == "name" and toks[0].text == "var" and toks[1].kind == "name":
            variables.append(_parse_vardecl(p, lineno))
        else:
            relations.append(_parse_relation(p, lineno))
    return RelationLibrary.build(variables, relations)
