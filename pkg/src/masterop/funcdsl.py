"""A small expression language for user-defined u(x, t) on the command line.

Grammar (standard precedence, left associative, pow binds tightest):

    expr    := term (('+'|'-') term)*
    term    := unary (('*'|'/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' NUMBER)*
    atom    := NUMBER | 'x1'|'x2'|'x3' | 't' | NAME '(' args ')' | '(' expr ')'

Math functions: exp, cos, sin, abs, sqrt, pos (positive part).
Family atoms: phi(j,alpha,beta), psi(j,alpha,beta), w(j,gamma), bump(expr);
family arguments must be numeric literals.  Power exponents must be
literals so differentiability metadata stays decidable.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import families
from .handles import C1_TIME, FunctionHandle, SMOOTH, SupportBox
from .kernel import NORMALIZED


class ParseError(ValueError):
    """Syntax or validation error with a 1-based column."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str       # x1, x2, x3 or t


@dataclass(frozen=True)
class Unary:
    op: str         # neg, exp, cos, sin, abs, sqrt, pos
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str         # + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Family:
    name: str       # phi, psi, w
    args: tuple


@dataclass(frozen=True)
class Bump:
    arg: "Expr"


Expr = Num | Var | Unary | Bin | Family | Bump

_UNARY_FUNCS = ("exp", "cos", "sin", "abs", "sqrt", "pos")
_FAMILY_ARITY = {"phi": 3, "psi": 3, "w": 2}


# ---------------------------------------------------------------------------
# tokenizer / parser
# ---------------------------------------------------------------------------

@dataclass
class _Token:
    kind: str       # num, name, op, lparen, rparen, comma, end
    text: str
    column: int     # 1-based
    value: float = 0.0


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        col = i + 1
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
            j = i
            while j < len(text) and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < len(text) and text[j] in "eE":
                k = j + 1
                if k < len(text) and text[k] in "+-":
                    k += 1
                if k < len(text) and text[k].isdigit():
                    j = k
                    while j < len(text) and text[j].isdigit():
                        j += 1
            try:
                val = float(text[i:j])
            except ValueError:
                raise ParseError(f"bad number {text[i:j]!r}", col) from None
            tokens.append(_Token("num", text[i:j], col, val))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], col))
            i = j
            continue
        if ch in "+-*/^":
            tokens.append(_Token("op", ch, col))
        elif ch == "(":
            tokens.append(_Token("lparen", ch, col))
        elif ch == ")":
            tokens.append(_Token("rparen", ch, col))
        elif ch == ",":
            tokens.append(_Token("comma", ch, col))
        else:
            raise ParseError(f"unexpected character {ch!r}", col)
        i += 1
    tokens.append(_Token("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {what}", tok.column)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected {tok.text!r}", tok.column)
        return e

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = Bin(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        while self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            tok = self.peek()
            neg = False
            if tok.kind == "op" and tok.text == "-":
                self.advance()
                neg = True
                tok = self.peek()
            if tok.kind != "num":
                raise ParseError("power exponent must be a numeric literal", tok.column)
            self.advance()
            node = Bin("^", node, Num(-tok.value if neg else tok.value))
        return node

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(tok.value)
        if tok.kind == "lparen":
            self.advance()
            node = self.expr()
            self.expect("rparen", "')'")
            return node
        if tok.kind == "name":
            self.advance()
            name = tok.text
            if name in ("x1", "x2", "x3", "t"):
                return Var(name)
            if name in _UNARY_FUNCS:
                self.expect("lparen", "'('")
                arg = self.expr()
                self.expect("rparen", "')'")
                return Unary(name, arg)
            if name == "bump":
                self.expect("lparen", "'('")
                arg = self.expr()
                self.expect("rparen", "')'")
                return Bump(arg)
            if name in _FAMILY_ARITY:
                self.expect("lparen", "'('")
                args = [self.family_arg()]
                while self.peek().kind == "comma":
                    self.advance()
                    args.append(self.family_arg())
                self.expect("rparen", "')'")
                if len(args) != _FAMILY_ARITY[name]:
                    raise ParseError(
                        f"{name}() takes {_FAMILY_ARITY[name]} arguments", tok.column)
                return Family(name, tuple(args))
            raise ParseError(f"unknown identifier {name!r}", tok.column)
        raise ParseError("expected an expression", tok.column)

    def family_arg(self) -> float:
        tok = self.peek()
        neg = False
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            neg = True
            tok = self.peek()
        if tok.kind != "num":
            raise ParseError("family arguments must be numeric literals", tok.column)
        self.advance()
        return -tok.value if neg else tok.value


def parse(text: str) -> Expr:
    """Parse an expression; raises ParseError with a 1-based column."""
    if not text or not text.strip():
        raise ParseError("empty expression", 1)
    return _Parser(_tokenize(text)).parse()


# ---------------------------------------------------------------------------
# printing, validation, evaluation
# ---------------------------------------------------------------------------

def to_string(e: Expr) -> str:
    """Fully parenthesized rendering that reparses to an identical tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_string(e.arg)})"
        return f"{e.op}({to_string(e.arg)})"
    if isinstance(e, Bin):
        return f"({to_string(e.left)}{e.op}{to_string(e.right)})"
    if isinstance(e, Family):
        return f"{e.name}({','.join(repr(a) for a in e.args)})"
    if isinstance(e, Bump):
        return f"bump({to_string(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def validate(e: Expr, dim: int) -> None:
    """Check variable indices against the run dimension and family parameters."""
    if isinstance(e, Var):
        if e.name != "t" and int(e.name[1]) > dim:
            raise ParseError(f"variable {e.name} invalid in a {dim}-D run", 1)
    elif isinstance(e, Unary):
        validate(e.arg, dim)
    elif isinstance(e, Bin):
        validate(e.left, dim)
        validate(e.right, dim)
    elif isinstance(e, Bump):
        validate(e.arg, dim)
    elif isinstance(e, Family):
        j = e.args[0]
        if j < 1 or j != int(j):
            raise ParseError(f"{e.name}() needs a positive integer index", 1)
        if any(a <= 0 for a in e.args[1:]):
            raise ParseError(f"{e.name}() parameters must be positive", 1)


def _has_pos(e: Expr) -> bool:
    if isinstance(e, Unary):
        return e.op == "pos" or _has_pos(e.arg)
    if isinstance(e, Bin):
        return _has_pos(e.left) or _has_pos(e.right)
    if isinstance(e, Bump):
        return _has_pos(e.arg)
    return isinstance(e, Family) and e.name == "w"


def _is_constant(e: Expr) -> bool:
    if isinstance(e, Num):
        return True
    if isinstance(e, Unary):
        return _is_constant(e.arg)
    if isinstance(e, Bin):
        return _is_constant(e.left) and _is_constant(e.right)
    if isinstance(e, Bump):
        return _is_constant(e.arg)
    return False


def _evaluate(e: Expr, pts, tt, s: float, n: int, normalization: str):
    if isinstance(e, Num):
        return np.full(pts.shape[0], e.value)
    if isinstance(e, Var):
        if e.name == "t":
            return tt.astype(float)
        return pts[:, int(e.name[1]) - 1]
    if isinstance(e, Unary):
        v = _evaluate(e.arg, pts, tt, s, n, normalization)
        if e.op == "neg":
            return -v
        if e.op == "exp":
            return np.exp(v)
        if e.op == "cos":
            return np.cos(v)
        if e.op == "sin":
            return np.sin(v)
        if e.op == "abs":
            return np.abs(v)
        if e.op == "sqrt":
            return np.sqrt(v)
        if e.op == "pos":
            return np.maximum(v, 0.0)
        raise TypeError(f"unknown unary {e.op!r}")
    if isinstance(e, Bin):
        a = _evaluate(e.left, pts, tt, s, n, normalization)
        if e.op == "^":
            return a ** e.right.value
        b = _evaluate(e.right, pts, tt, s, n, normalization)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            return a / b
        raise TypeError(f"unknown binary {e.op!r}")
    if isinstance(e, Bump):
        return families.standard_bump(_evaluate(e.arg, pts, tt, s, n, normalization))
    if isinstance(e, Family):
        h = _family_handle(e, s, n, normalization)
        return h.evaluator(pts, tt)
    raise TypeError(f"not an expression node: {e!r}")


@lru_cache(maxsize=256)
def _family_handle(e: Family, s: float, n: int, normalization: str) -> FunctionHandle:
    if e.name == "phi":
        j, alpha, beta = e.args
        return families.phi_family(int(j), alpha, beta, dim=n)
    if e.name == "psi":
        j, alpha, beta = e.args
        return families.psi_family(int(j), alpha, beta, dim=n)
    if e.name == "w":
        j, gamma = e.args
        if s is None:
            raise ParseError("w() needs the fractional order from the run config", 1)
        return families.w_family(int(j), gamma, s, n=n, normalization=normalization)
    raise TypeError(f"unknown family {e.name!r}")


def to_handle(e: Expr, dim: int, s: float | None = None,
              normalization: str = NORMALIZED,
              support: SupportBox | None = None,
              growth: str | None = None) -> FunctionHandle:
    """Compile an AST into a FunctionHandle.

    The support box is inferred when the expression is exactly one family
    atom; otherwise it is absent unless overridden.  pos() (and the w
    family) limit time regularity to C^1 and mark the kink at t = 0.
    """
    validate(e, dim)
    if isinstance(e, Family):
        base = _family_handle(e, s, dim, normalization)
        if support is not None or growth is not None:
            base = replace(base, support=support or base.support,
                           growth=growth or base.growth)
        return base
    if _is_constant(e):
        from .handles import constant as _constant
        value = float(_evaluate(e, np.zeros((1, dim)), np.zeros(1), s, dim,
                                normalization)[0])
        return _constant(value, dim)

    def evaluator(pts, tt):
        return np.asarray(_evaluate(e, pts, tt, s, dim, normalization), dtype=float)

    c1 = _has_pos(e)
    return FunctionHandle(
        evaluator=evaluator, dim=dim, support=support, growth=growth,
        smoothness=C1_TIME if c1 else SMOOTH,
        time_kinks=(0.0,) if c1 else (),
    )
