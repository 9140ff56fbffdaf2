"""Coefficient expressions in one real variable ``x``.

Expressions are parsed from text, evaluated in double precision and
differentiated symbolically.  The grammar is the usual one:

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := number | 'x' | 'pi' | 'e' | name '(' expr ')' | '(' expr ')'

so ``^`` binds tighter than unary minus (``-x^2 == -(x^2)``), and there
is no implicit multiplication and no unary plus.

>>> e = parse("2*x^2 + exp(-x)")
>>> e(0.0)
1.0
>>> differentiate(parse("x^2"))(3.0)
6.0
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable

from .errors import DomainError, ExprSyntaxError

FUNCTIONS = ("exp", "log", "sin", "cos", "sinh", "cosh", "sqrt", "abs", "sign")
CONSTANTS = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------------------
# AST


class Node:
    __slots__ = ()

    def depends_on_x(self) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Node):
    value: float

    def depends_on_x(self):
        return False


@dataclass(frozen=True)
class Var(Node):
    def depends_on_x(self):
        return True


@dataclass(frozen=True)
class Const(Node):
    name: str

    def depends_on_x(self):
        return False


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def depends_on_x(self):
        return self.arg.depends_on_x()


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def depends_on_x(self):
        return self.left.depends_on_x() or self.right.depends_on_x()


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node

    def depends_on_x(self):
        return self.arg.depends_on_x()


# ---------------------------------------------------------------------------
# Tokenizer and parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

_ATOM_START = {"number", "x", "pi", "e", "(", "-"} | set(FUNCTIONS)


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError("unexpected character %r" % source[pos], source, pos)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected, tok=None):
        tok = tok or self.peek()
        what = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ExprSyntaxError("unexpected %s" % what, self.source, tok[2], expected)

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail({"+", "-", "*", "/", "^", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(text))
        if kind == "name":
            self.advance()
            if text == "x":
                return Var()
            if text in CONSTANTS:
                return Const(text)
            if text in FUNCTIONS:
                if self.peek()[:2] != ("op", "("):
                    self.fail({"("})
                self.advance()
                arg = self.expr()
                if self.peek()[:2] != ("op", ")"):
                    self.fail({")", "+", "-", "*", "/", "^"})
                self.advance()
                return Func(text, arg)
            raise ExprSyntaxError("unknown name %r" % text, self.source, pos, _ATOM_START - {"-"})
        if (kind, text) == ("op", "("):
            self.advance()
            node = self.expr()
            if self.peek()[:2] != ("op", ")"):
                self.fail({")", "+", "-", "*", "/", "^"})
            self.advance()
            return node
        self.fail(_ATOM_START)


# ---------------------------------------------------------------------------
# Printing (fully parenthesised, so parse(print(e)) rebuilds the same tree)


def to_source(node: Node) -> str:
    if isinstance(node, Num):
        v = node.value
        if not math.isfinite(v):
            raise ValueError("non-finite literal cannot be printed")
        text = repr(float(abs(v)))
        return "(-%s)" % text if math.copysign(1.0, v) < 0 else text
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        return "(-%s)" % to_source(node.arg)
    if isinstance(node, BinOp):
        return "(%s %s %s)" % (to_source(node.left), node.op, to_source(node.right))
    if isinstance(node, Func):
        return "%s(%s)" % (node.name, to_source(node.arg))
    raise TypeError(node)


# ---------------------------------------------------------------------------
# Evaluation.  Trees are compiled once into a Python closure over checked
# primitives; DomainError carries the offending x.


class _Bad(Exception):
    pass


def _div(a, b):
    if b == 0.0:
        raise _Bad("division by zero")
    return a / b


def _pow(a, b):
    if a < 0.0 and b != math.floor(b):
        raise _Bad("non-integer power of a negative number")
    if a == 0.0 and b < 0.0:
        raise _Bad("division by zero in negative power")
    return math.pow(a, b)


def _log(a):
    if a <= 0.0:
        raise _Bad("log of a non-positive number")
    return math.log(a)


def _sqrt(a):
    if a < 0.0:
        raise _Bad("sqrt of a negative number")
    return math.sqrt(a)


def _sign(a):
    return (a > 0.0) - (a < 0.0)


_RUNTIME = {
    "_div": _div,
    "_pow": _pow,
    "_log": _log,
    "_sqrt": _sqrt,
    "_sign": _sign,
    "_exp": math.exp,
    "_sin": math.sin,
    "_cos": math.cos,
    "_sinh": math.sinh,
    "_cosh": math.cosh,
    "_abs": abs,
}


def _py(node: Node) -> str:
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Const):
        return repr(CONSTANTS[node.name])
    if isinstance(node, Neg):
        return "(-%s)" % _py(node.arg)
    if isinstance(node, BinOp):
        a, b = _py(node.left), _py(node.right)
        if node.op in "+-*":
            return "(%s %s %s)" % (a, node.op, b)
        if node.op == "/":
            return "_div(%s, %s)" % (a, b)
        return "_pow(%s, %s)" % (a, b)
    if isinstance(node, Func):
        name = {"log": "_log", "sqrt": "_sqrt", "sign": "_sign"}.get(node.name, "_" + node.name)
        return "%s(%s)" % (name, _py(node.arg))
    raise TypeError(node)


def _compile(node: Node) -> Callable[[float], float]:
    src = "lambda x: " + _py(node)
    return eval(compile(src, "<expr>", "eval"), dict(_RUNTIME))


class Expression:
    """Immutable parsed expression; call it to evaluate at a point."""

    __slots__ = ("node", "_fn", "_deriv")

    def __init__(self, node: Node):
        object.__setattr__(self, "node", node)
        object.__setattr__(self, "_fn", _compile(node))
        object.__setattr__(self, "_deriv", None)

    def __setattr__(self, name, value):
        raise AttributeError("Expression is immutable")

    def __call__(self, x: float) -> float:
        try:
            value = self._fn(float(x))
        except _Bad as exc:
            raise DomainError(str(exc), x) from None
        except (OverflowError, ValueError) as exc:
            raise DomainError(str(exc), x) from None
        if not math.isfinite(value):
            raise DomainError("non-finite value", x)
        return float(value)

    def evaluate_many(self, xs: Iterable[float]):
        import numpy as np

        return np.array([self(x) for x in xs], dtype=float)

    def derivative(self) -> "Expression":
        # Cached: differentiation is pure and Expressions are immutable.
        d = self._deriv
        if d is None:
            d = Expression(_diff(self.node))
            object.__setattr__(self, "_deriv", d)
        return d

    @property
    def is_constant(self) -> bool:
        return not self.node.depends_on_x()

    def is_zero(self) -> bool:
        return isinstance(self.node, Num) and self.node.value == 0.0

    def __str__(self):
        return to_source(self.node)

    def __repr__(self):
        return "Expression(%r)" % to_source(self.node)

    def __eq__(self, other):
        return isinstance(other, Expression) and other.node == self.node

    def __hash__(self):
        return hash(self.node)

    # arithmetic builders, used to assemble identities symbolically
    def __add__(self, other):
        return Expression(_add(self.node, _as_node(other)))

    def __radd__(self, other):
        return Expression(_add(_as_node(other), self.node))

    def __sub__(self, other):
        return Expression(_sub(self.node, _as_node(other)))

    def __rsub__(self, other):
        return Expression(_sub(_as_node(other), self.node))

    def __mul__(self, other):
        return Expression(_mul(self.node, _as_node(other)))

    def __rmul__(self, other):
        return Expression(_mul(_as_node(other), self.node))

    def __truediv__(self, other):
        return Expression(_div_node(self.node, _as_node(other)))

    def __rtruediv__(self, other):
        return Expression(_div_node(_as_node(other), self.node))

    def __pow__(self, other):
        return Expression(_pow_node(self.node, _as_node(other)))

    def __neg__(self):
        return Expression(_neg(self.node))


def _as_node(value) -> Node:
    if isinstance(value, Expression):
        return value.node
    if isinstance(value, Node):
        return value
    if isinstance(value, (int, float)):
        return Num(float(value))
    if isinstance(value, str):
        return parse(value).node
    raise TypeError("cannot use %r in an expression" % (value,))


def parse(source: str) -> Expression:
    """Parse ``source`` into an :class:`Expression`."""
    if isinstance(source, Expression):
        return source
    if isinstance(source, (int, float)):
        return Expression(Num(float(source)))
    return Expression(_Parser(source).parse())


def evaluate(e: Expression, x: float) -> float:
    return e(x)


def differentiate(e: Expression) -> Expression:
    return e.derivative()


def func(name: str, arg) -> Expression:
    if name not in FUNCTIONS:
        raise ValueError(name)
    return Expression(Func(name, _as_node(arg)))


# ---------------------------------------------------------------------------
# Symbolic differentiation.  Constructors fold only trivial identities
# (0 and 1 units, numeric constants); no further simplification.

ZERO = Num(0.0)
ONE = Num(1.0)


def _is(node, value):
    return isinstance(node, Num) and node.value == value


def _neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _add(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a, b):
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return _neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def _div_node(a, b):
    if _is(b, 1.0):
        return a
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    return BinOp("/", a, b)


def _pow_node(a, b):
    if _is(b, 1.0):
        return a
    if _is(b, 0.0):
        return ONE
    return BinOp("^", a, b)


def _diff(node: Node) -> Node:
    if not node.depends_on_x():
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Neg):
        return _neg(_diff(node.arg))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        if node.op == "+":
            return _add(_diff(u), _diff(v))
        if node.op == "-":
            return _sub(_diff(u), _diff(v))
        if node.op == "*":
            return _add(_mul(_diff(u), v), _mul(u, _diff(v)))
        if node.op == "/":
            # (u'v - uv') / v^2
            return _div_node(_sub(_mul(_diff(u), v), _mul(u, _diff(v))), _pow_node(v, Num(2.0)))
        if node.op == "^":
            if not v.depends_on_x():
                exponent = _sub(v, ONE)
                return _mul(_mul(v, _pow_node(u, exponent)), _diff(u))
            if not u.depends_on_x():
                return _mul(_mul(node, Func("log", u)), _diff(v))
            inner = _add(_mul(_diff(v), Func("log", u)), _div_node(_mul(v, _diff(u)), u))
            return _mul(node, inner)
    if isinstance(node, Func):
        u = node.arg
        du = _diff(u)
        name = node.name
        if name == "exp":
            outer = node
        elif name == "log":
            return _div_node(du, u)
        elif name == "sin":
            outer = Func("cos", u)
        elif name == "cos":
            outer = _neg(Func("sin", u))
        elif name == "sinh":
            outer = Func("cosh", u)
        elif name == "cosh":
            outer = Func("sinh", u)
        elif name == "sqrt":
            return _div_node(du, _mul(Num(2.0), node))
        elif name == "abs":
            outer = Func("sign", u)
        elif name == "sign":
            return ZERO
        else:  # pragma: no cover
            raise ValueError(name)
        return _mul(outer, du)
    raise TypeError(node)
