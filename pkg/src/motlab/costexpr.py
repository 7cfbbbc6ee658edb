"""Payoff expressions Phi(x1, x2) given as text.

Grammar (precedence climbing, unary minus binds tightest)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | primary
    primary := NUMBER | 'x1' | 'x2' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Functions: abs(a), max(a, b, ...), min(a, b, ...), call(a, k) = max(a - k, 0),
put(a, k) = max(k - a, 0). Evaluation is numpy-vectorised so a payoff can be
tabulated on a whole support grid at once.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

DIV_FLOOR = 1e-300


class ParseError(ValueError):
    def __init__(self, message: str, column: int):
        super().__init__(f"column {column}: {message}")
        self.column = column
        self.reason = message


class EvalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float

    def __repr__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Neg:
    arg: "Expr"

    def __repr__(self):
        return f"Neg({self.arg!r})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    _NAMES = {"+": "Add", "-": "Sub", "*": "Mul", "/": "Div"}

    def __repr__(self):
        return f"{self._NAMES[self.op]}({self.left!r}, {self.right!r})"


@dataclass(frozen=True)
class Func:
    name: str
    args: tuple

    def __repr__(self):
        inner = ", ".join(repr(a) for a in self.args)
        return f"{self.name.capitalize()}({inner})"


Expr = Union[Num, Var, Neg, BinOp, Func]

ARITY = {"abs": (1, 1), "max": (2, None), "min": (2, None), "call": (2, 2), "put": (2, 2)}
VARIABLES = ("x1", "x2")

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),])"
)


@dataclass(frozen=True)
class PayoffExpr:
    """A parsed payoff; ``text`` is the source it came from."""

    ast: Expr
    text: str = ""

    def __call__(self, x1, x2):
        return evaluate(self, x1, x2)

    def __repr__(self):
        return repr(self.ast)

    def __str__(self):
        return self.text or to_text(self.ast)

    def grid(self, xs, ys) -> np.ndarray:
        """Matrix [Phi(xs[i], ys[j])]."""
        X1, X2 = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
        return np.asarray(evaluate(self, X1, X2), dtype=float)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos + 1)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, col = self.take()
        if text != value:
            raise ParseError(f"expected {value!r}, found {_describe(kind, text)}", col)

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        kind, text, col = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in VARIABLES:
                return Var(text)
            if text not in ARITY:
                raise ParseError(f"unknown name {text!r}", col)
            self.expect("(")
            args = [self.expr()]
            while self.peek()[1] == ",":
                self.take()
                args.append(self.expr())
            lo, hi = ARITY[text]
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise ParseError(f"{text}() takes {lo if lo == hi else f'at least {lo}'} argument(s), got {len(args)}", col)
            self.expect(")")
            return Func(text, tuple(args))
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {_describe(kind, text)}", col)


def _describe(kind: str, text: str) -> str:
    return "end of input" if kind == "end" else f"token {text!r}"


def parse(text: str) -> PayoffExpr:
    p = _Parser(text)
    ast = p.expr()
    kind, tok, col = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {_describe(kind, tok)}", col)
    return PayoffExpr(ast, text)


def to_text(e: Union[Expr, PayoffExpr]) -> str:
    """Fully parenthesised source; parse(to_text(e)) rebuilds the same tree."""
    if isinstance(e, PayoffExpr):
        e = e.ast
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    return f"{e.name}({', '.join(to_text(a) for a in e.args)})"


def _eval(e: Expr, env: dict):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, BinOp):
        a, b = _eval(e.left, env), _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if np.any(np.abs(b) < DIV_FLOOR):
            raise EvalError("division by zero")
        return a / b
    args = [_eval(a, env) for a in e.args]
    if e.name == "abs":
        return np.abs(args[0])
    if e.name == "max":
        return _fold(np.maximum, args)
    if e.name == "min":
        return _fold(np.minimum, args)
    if e.name == "call":
        return np.maximum(args[0] - args[1], 0.0)
    return np.maximum(args[1] - args[0], 0.0)


def _fold(f, args):
    out = args[0]
    for a in args[1:]:
        out = f(out, a)
    return out


def evaluate(e: Union[PayoffExpr, Expr], x1, x2):
    """Evaluate at scalars or broadcastable arrays."""
    ast = e.ast if isinstance(e, PayoffExpr) else e
    scalar = np.ndim(x1) == 0 and np.ndim(x2) == 0
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
        raise EvalError("non-finite input")
    with np.errstate(all="ignore"):
        out = _eval(ast, {"x1": x1, "x2": x2})
    out = np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x1, x2).shape)
    if not np.all(np.isfinite(out)):
        raise EvalError("payoff evaluated to a non-finite value")
    return float(out) if scalar else np.array(out)


def depends_on_variable(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Num):
        return False
    if isinstance(e, Neg):
        return depends_on_variable(e.arg)
    if isinstance(e, BinOp):
        return depends_on_variable(e.left) or depends_on_variable(e.right)
    return any(depends_on_variable(a) for a in e.args)


@dataclass(frozen=True)
class LintResult:
    ok: bool
    reason: str = ""


def lint_linear_growth(e: Union[PayoffExpr, Expr]) -> LintResult:
    """Syntactic check for super-linear growth; advisory only."""
    ast = e.ast if isinstance(e, PayoffExpr) else e
    stack = [ast]
    while stack:
        node = stack.pop()
        if isinstance(node, BinOp):
            if node.op == "*" and depends_on_variable(node.left) and depends_on_variable(node.right):
                return LintResult(False, "product of variable terms")
            if node.op == "/" and depends_on_variable(node.right):
                return LintResult(False, "division by a variable term")
            stack += [node.left, node.right]
        elif isinstance(node, Neg):
            stack.append(node.arg)
        elif isinstance(node, Func):
            stack.extend(node.args)
    return LintResult(True)


def as_payoff(p) -> PayoffExpr:
    if isinstance(p, PayoffExpr):
        return p
    if isinstance(p, str):
        return parse(p)
    raise TypeError(f"expected a payoff expression or its text, got {type(p).__name__}")
