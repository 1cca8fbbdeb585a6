"""A small arithmetic DSL for transition-rate functions.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' atom)?
    atom   := number | ident | '(' expr ')' | func '(' expr ')'
    func   := 'exp' | 'log' | 'sqrt'
    ident  := 'y' digit+ | parameter name

Binary operators are left-associative. There is no unary minus; write
``0-x`` or rearrange the expression. Evaluation is vectorised: ``y`` may be
a ``(k,)`` vector or a ``(k, n)`` array of ``n`` points.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifier

FUNCTIONS = ("exp", "log", "sqrt")


@dataclass(frozen=True)
class Num:
    value: float
    text: str


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written (y1, y2, ...)


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Param, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)
_VAR = re.compile(r"y(\d+)$")


def _tokenize(text):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, k, params):
        self.text = text
        self.k = k
        self.params = frozenset(params)
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            what = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {what}", self.text, pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", self.text, pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            node = BinOp("^", node, self.atom())
        return node

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val), val)
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            m = _VAR.match(val)
            if m and val not in self.params:
                idx = int(m.group(1))
                if not 1 <= idx <= self.k:
                    raise UnknownIdentifier(
                        f"state variable {val} out of range for k={self.k}", self.text, pos)
                return Var(idx)
            if val in self.params:
                return Param(val)
            raise UnknownIdentifier(f"unknown identifier {val!r}", self.text, pos)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {what}", self.text, pos)


# --- printing -------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _prec(node):
    return _PREC[node.op] if isinstance(node, BinOp) else 4


def to_text(node: Node) -> str:
    """Print with the minimal parentheses needed to parse back to the same tree."""
    if isinstance(node, Num):
        return node.text
    if isinstance(node, Var):
        return f"y{node.index}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    p = _PREC[node.op]
    if node.op == "^":
        lmin, rmin = 4, 4
    else:
        lmin, rmin = p, p + 1
    left = to_text(node.left)
    right = to_text(node.right)
    if _prec(node.left) < lmin:
        left = f"({left})"
    if _prec(node.right) < rmin:
        right = f"({right})"
    return f"{left}{node.op}{right}"


# --- evaluation -----------------------------------------------------------------

def _div(a, b):
    if np.any(np.asarray(b) == 0):
        raise DomainError("division by zero")
    return a / b


def _log(a):
    if np.any(np.asarray(a) <= 0):
        raise DomainError("log of a non-positive value")
    return np.log(a)


def _sqrt(a):
    if np.any(np.asarray(a) < 0):
        raise DomainError("sqrt of a negative value")
    return np.sqrt(a)


def _pow(a, b):
    with np.errstate(all="ignore"):
        out = np.power(np.asarray(a, dtype=float), b)
    if not np.all(np.isfinite(out)):
        raise DomainError("power is undefined or infinite")
    return out


_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}
_UNARY = {"exp": np.exp, "log": _log, "sqrt": _sqrt}


def _compile(node: Node) -> Callable:
    if isinstance(node, Num):
        v = node.value
        return lambda y, p: v
    if isinstance(node, Var):
        i = node.index - 1
        return lambda y, p: y[i]
    if isinstance(node, Param):
        name = node.name
        return lambda y, p: p[name]
    if isinstance(node, Call):
        f, g = _UNARY[node.func], _compile(node.arg)
        return lambda y, p: f(g(y, p))
    op, lhs, rhs = _BINARY[node.op], _compile(node.left), _compile(node.right)
    return lambda y, p: op(lhs(y, p), rhs(y, p))


def variables(node: Node) -> set:
    """Indices of the state variables the expression depends on."""
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        return variables(node.arg)
    return set()


def rename_variables(node: Node, mapping: Mapping[int, int]) -> Node:
    if isinstance(node, Var):
        return Var(mapping[node.index])
    if isinstance(node, BinOp):
        return BinOp(node.op, rename_variables(node.left, mapping),
                     rename_variables(node.right, mapping))
    if isinstance(node, Call):
        return Call(node.func, rename_variables(node.arg, mapping))
    return node


@dataclass(frozen=True)
class RateExpr:
    ast: Node
    source: str
    k: int
    _fn: Callable = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_fn", _compile(self.ast))

    def __call__(self, y, params):
        y = np.asarray(y, dtype=float)
        out = self._fn(y, params)
        if np.ndim(out) == 0 and y.ndim > 1:
            out = np.full(y.shape[1:], float(out))
        return out

    def __str__(self):
        return to_text(self.ast)


def parse_rate_expr(text: str, k: int, params=()) -> RateExpr:
    if not text or not text.strip():
        raise ParseError("empty expression", text or "", 0)
    ast = _Parser(text, k, params).parse()
    return RateExpr(ast, text, k)


def eval_rate(expr: RateExpr, y, params):
    """Evaluate a rate; raises ``DomainError`` on non-finite or negative values."""
    out = expr(y, params)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"non-finite rate {expr.source!r} at {y}")
    if np.any(np.asarray(out) < 0):
        raise DomainError(f"negative rate {expr.source!r} at {y}")
    return out
