"""Parser for the expression grammar.

Grammar (whitespace insignificant):

    expr    := term (('+' | '-') term)*
    term    := factor ('*' factor)*
    factor  := '-' factor | '+' factor | primary ('^' nonneg-int)*
    primary := literal | variable | func '(' expr ')' | '(' expr ')'

Literals are integers ``p``, rationals ``p/q`` and decimals (converted
exactly).  Variables are ``x1`` .. ``x<n>``.  The only functions are ``sin``,
``cos`` and ``exp``, and their arguments must be affine in the variables.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import (
    ExprSyntaxError,
    NonAffineArgumentError,
    UnsupportedFunctionError,
)
from .expr import COS, SIN, CanonicalExpr

_FUNCTIONS = (SIN, COS, "exp")


class _Token:
    __slots__ = ("kind", "value", "pos")

    def __init__(self, kind, value, pos):
        self.kind = kind
        self.value = value
        self.pos = pos

    def __repr__(self):
        return f"_Token({self.kind!r}, {self.value!r})"


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i, size = 0, len(text)
    while i < size:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < size and text[i + 1].isdigit()):
            start = i
            seen_dot = False
            while i < size and (text[i].isdigit() or (text[i] == "." and not seen_dot)):
                if text[i] == ".":
                    seen_dot = True
                i += 1
            tokens.append(_Token("num", text[start:i], start))
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < size and (text[i].isalnum() or text[i] == "_"):
                i += 1
            tokens.append(_Token("ident", text[start:i], start))
            continue
        if ch in "+-*^()/":
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", size))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def advance(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            found = repr(tok.value) if tok.value else "end of input"
            raise ExprSyntaxError(f"expected {kind!r}, found {found}", tok.pos)
        return self.advance()

    # ------------------------------------------------------------------

    def parse(self) -> CanonicalExpr:
        value = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected trailing {tok.value!r}", tok.pos)
        return value

    def expr(self) -> CanonicalExpr:
        value = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.advance().kind
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> CanonicalExpr:
        value = self.factor()
        while self.peek().kind == "*":
            self.advance()
            value = value * self.factor()
        return value

    def factor(self) -> CanonicalExpr:
        tok = self.peek()
        if tok.kind == "-":
            self.advance()
            return -self.factor()
        if tok.kind == "+":
            self.advance()
            return self.factor()
        value = self.primary()
        while self.peek().kind == "^":
            self.advance()
            etok = self.expect("num")
            if "." in etok.value:
                raise ExprSyntaxError("exponent must be a non-negative integer", etok.pos)
            value = value.power(int(etok.value))
        return value

    def primary(self) -> CanonicalExpr:
        tok = self.advance()
        if tok.kind == "num":
            return CanonicalExpr.const(self.n, self.literal(tok))
        if tok.kind == "(":
            value = self.expr()
            self.expect(")")
            return value
        if tok.kind == "ident":
            return self.ident(tok)
        found = repr(tok.value) if tok.value else "end of input"
        raise ExprSyntaxError(f"unexpected {found}", tok.pos)

    def literal(self, tok: _Token) -> Fraction:
        value = Fraction(tok.value)  # decimal strings convert exactly
        if self.peek().kind == "/":
            if "." in tok.value:
                raise ExprSyntaxError("rational literal p/q needs integer p", tok.pos)
            self.advance()
            dtok = self.expect("num")
            if "." in dtok.value or int(dtok.value) == 0:
                raise ExprSyntaxError(
                    "rational literal p/q needs a positive integer q", dtok.pos
                )
            value = value / int(dtok.value)
        return value

    def ident(self, tok: _Token) -> CanonicalExpr:
        name = tok.value
        if self.peek().kind == "(":
            if name not in _FUNCTIONS:
                raise UnsupportedFunctionError(
                    f"unsupported function {name!r} (only sin, cos, exp)", tok.pos
                )
            self.advance()
            arg = self.expr()
            self.expect(")")
            form = arg.as_affine()
            if form is None:
                raise NonAffineArgumentError(
                    f"{name} argument must be affine in x1..x{self.n}", tok.pos
                )
            if name == "exp":
                return CanonicalExpr.exp_atom(self.n, form)
            return CanonicalExpr.trig_atom(self.n, name, form)
        if name.startswith("x") and name[1:].isdigit():
            idx = int(name[1:])
            if not 1 <= idx <= self.n:
                raise ExprSyntaxError(
                    f"variable {name} outside x1..x{self.n}", tok.pos
                )
            return CanonicalExpr.coordinate(self.n, idx)
        raise ExprSyntaxError(f"unknown identifier {name!r}", tok.pos)


def parse_expr(text: str, n: int) -> CanonicalExpr:
    """Parse ``text`` over variables x1..xn into canonical form."""
    return _Parser(text, n).parse()
