"""Small expression language for the profile functions.

Expressions are written in ordinary infix notation (``z*exp(-a*z)``) over a
declared set of variables (normally ``z`` and ``y``) and named parameters.
Trees are immutable, evaluate on floats or numpy arrays, and can be
differentiated symbolically.

Precedence, tightest first: ``^`` (right associative), ``* /``, unary ``-``,
``+ -``. So ``-a*z`` is ``-(a*z)`` and ``-z^2`` is ``-(z^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np
from scipy import special

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "tanh", "erf", "abs")

_NUMPY_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "erf": special.erf,
    "abs": np.abs,
}


class ExprError(Exception):
    pass


class ParseError(ExprError):
    """Syntax error; ``offset`` is the byte offset into the UTF-8 source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, offset: int):
        ExprError.__init__(self, f"unknown identifier {name!r} (at byte {offset})")
        self.name = name
        self.offset = offset


class MissingBindingError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"no binding for {name!r}")
        self.name = name


# --------------------------------------------------------------------------
# Tree nodes


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Param, Neg, BinOp, Call]
Bindings = Mapping[str, object]


# --------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, ident, op, end
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    byte_pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", byte_pos)
        text = m.group()
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, text, byte_pos))
        pos = m.end()
        byte_pos += len(text.encode("utf-8"))
    tokens.append(_Token("end", "", byte_pos))
    return tokens


# --------------------------------------------------------------------------
# Pratt parser

_INFIX_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 15


class _Parser:
    def __init__(self, source, variables, parameters):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = frozenset(variables)
        self.parameters = frozenset(parameters)

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        tok = self.next()
        if tok.text != text:
            found = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", tok.offset)

    def parse(self) -> Expr:
        expr = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected token {tok.text!r}", tok.offset)
        return expr

    def expression(self, min_bp: int) -> Expr:
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _INFIX_BP:
                break
            bp = _INFIX_BP[tok.text]
            if bp <= min_bp:
                break
            self.next()
            # right associativity for ^: parse the right side at bp - 1
            right = self.expression(bp - 1 if tok.text == "^" else bp)
            left = BinOp(tok.text, left, right)
        return left

    def prefix(self) -> Expr:
        tok = self.next()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "ident":
            return self.identifier(tok)
        if tok.text == "-":
            return Neg(self.expression(_UNARY_BP))
        if tok.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        found = tok.text or "end of input"
        raise ParseError(f"unexpected {found!r}", tok.offset)

    def identifier(self, tok: _Token) -> Expr:
        name = tok.text
        if name in FUNCTIONS:
            self.expect("(")
            arg = self.expression(0)
            self.expect(")")
            return Call(name, arg)
        if name in self.variables:
            return Var(name)
        if name in self.parameters:
            return Param(name)
        raise UnknownIdentifierError(name, tok.offset)


def parse(source: str, variables: Iterable[str] = ("z",),
          parameters: Iterable[str] = ()) -> Expr:
    """Parse ``source`` into an expression tree.

    Every identifier must be a function name, one of ``variables`` or one of
    ``parameters``; anything else raises :class:`UnknownIdentifierError`.
    """
    if not isinstance(source, str) or not source.strip():
        raise ParseError("empty expression", 0)
    variables = tuple(variables)
    parameters = tuple(parameters)
    clash = set(variables) & set(parameters)
    if clash:
        raise ExprError(f"names declared as both variable and parameter: {sorted(clash)}")
    return _Parser(source, variables, parameters).parse()


# --------------------------------------------------------------------------
# Rendering

_ATOM = 100


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _INFIX_BP[e.op]
    if isinstance(e, Neg):
        return _UNARY_BP
    return _ATOM


def _render_num(v: float) -> str:
    if not math.isfinite(v):
        raise ExprError(f"cannot render non-finite constant {v}")
    if v < 0:
        return f"(-{_render_num(-v)})"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def render(e: Expr) -> str:
    """Infix text for ``e`` that parses back to the same tree."""
    if isinstance(e, Num):
        return _render_num(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({render(e.arg)})"
    if isinstance(e, Neg):
        inner = render(e.arg)
        if _prec(e.arg) < _UNARY_BP:
            inner = f"({inner})"
        return f"-{inner}"
    p = _INFIX_BP[e.op]
    left, right = render(e.left), render(e.right)
    if e.op == "^":
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < p:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# --------------------------------------------------------------------------
# Evaluation


def _evaluate(e: Expr, b: Bindings):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, (Var, Param)):
        try:
            return b[e.name]
        except KeyError:
            raise MissingBindingError(e.name) from None
    if isinstance(e, Neg):
        return np.negative(_evaluate(e.arg, b))
    if isinstance(e, Call):
        return _NUMPY_FUNCS[e.func](_evaluate(e.arg, b))
    lhs = _evaluate(e.left, b)
    rhs = _evaluate(e.right, b)
    if e.op == "+":
        return np.add(lhs, rhs)
    if e.op == "-":
        return np.subtract(lhs, rhs)
    if e.op == "*":
        return np.multiply(lhs, rhs)
    if e.op == "/":
        return np.true_divide(lhs, rhs)
    return np.power(np.asarray(lhs, dtype=float), rhs)


def evaluate(e: Expr, bindings: Bindings):
    """Evaluate ``e`` with IEEE semantics.

    Bindings may be floats or numpy arrays (broadcast together). Non-finite
    results are returned, never raised. Scalar inputs give a Python float.
    """
    with np.errstate(all="ignore"):
        out = _evaluate(e, bindings)
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


# --------------------------------------------------------------------------
# Construction helpers with light simplification

ZERO = Num(0.0)
ONE = Num(1.0)


def num(v: float) -> Expr:
    v = float(v)
    if v < 0:
        return Neg(Num(-v))
    return Num(v + 0.0)  # normalises -0.0


def _const(e: Expr):
    """Numeric value of a constant tree (Num or negated Num), else None."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Neg) and isinstance(e.arg, Num):
        return -e.arg.value
    return None


def _fold(v: float):
    return num(v) if math.isfinite(v) else None


def neg(a: Expr) -> Expr:
    ca = _const(a)
    if ca is not None:
        return num(-ca)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if ca == 0:
        return b
    if cb == 0:
        return a
    if ca is not None and cb is not None:
        folded = _fold(ca + cb)
        if folded is not None:
            return folded
    if isinstance(b, Neg):
        return BinOp("-", a, b.arg)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if a == b:
        return ZERO
    ca, cb = _const(a), _const(b)
    if cb == 0:
        return a
    if ca == 0:
        return neg(b)
    if ca is not None and cb is not None:
        folded = _fold(ca - cb)
        if folded is not None:
            return folded
    if isinstance(b, Neg):
        return BinOp("+", a, b.arg)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if ca == 0 or cb == 0:
        return ZERO
    if ca == 1:
        return b
    if cb == 1:
        return a
    if ca == -1:
        return neg(b)
    if cb == -1:
        return neg(a)
    if ca is not None and cb is not None:
        folded = _fold(ca * cb)
        if folded is not None:
            return folded
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if ca == 0 and cb != 0:
        return ZERO
    if cb == 1:
        return a
    if ca is not None and cb is not None and cb != 0:
        folded = _fold(ca / cb)
        if folded is not None:
            return folded
    return BinOp("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    cb = _const(b)
    if cb == 0:
        return ONE
    if cb == 1:
        return a
    return BinOp("^", a, b)


def call(func: str, a: Expr) -> Expr:
    if func not in FUNCTIONS:
        raise ExprError(f"unknown function {func!r}")
    return Call(func, a)


# --------------------------------------------------------------------------
# Tree queries


def free_names(e: Expr) -> frozenset:
    """Names of all variables and parameters referenced by ``e``."""
    if isinstance(e, (Var, Param)):
        return frozenset((e.name,))
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, (Neg, Call)):
        return free_names(e.arg)
    return free_names(e.left) | free_names(e.right)


def variables_of(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, (Num, Param)):
        return frozenset()
    if isinstance(e, (Neg, Call)):
        return variables_of(e.arg)
    return variables_of(e.left) | variables_of(e.right)


def depends_on(e: Expr, var: str) -> bool:
    return var in variables_of(e)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (parameters are left alone)."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, (Num, Param)):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, mapping))
    return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))


# --------------------------------------------------------------------------
# Differentiation

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def differentiate(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to variable ``var``.

    Parameters and other variables are constants. The result is only lightly
    simplified; compare derivatives numerically, not structurally.
    """
    if isinstance(e, Num) or isinstance(e, Param):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, var))
    if isinstance(e, Call):
        return _diff_call(e, var)

    u, v = e.left, e.right
    du = differentiate(u, var)
    dv = differentiate(v, var)
    if e.op == "+":
        return add(du, dv)
    if e.op == "-":
        return sub(du, dv)
    if e.op == "*":
        return add(mul(du, v), mul(u, dv))
    if e.op == "/":
        # (du*v - u*dv) / v^2, split so constant denominators stay simple
        if dv == ZERO:
            return div(du, v)
        return sub(div(du, v), div(mul(u, dv), power(v, Num(2.0))))
    # power
    if dv == ZERO:
        cv = _const(v)
        if cv is not None:
            lowered = num(cv - 1.0)
        else:
            lowered = sub(v, ONE)
        return mul(mul(v, power(u, lowered)), du)
    # u^v * (dv*log(u) + v*du/u)
    return mul(e, add(mul(dv, Call("log", u)), div(mul(v, du), u)))


def _diff_call(e: Call, var: str) -> Expr:
    u = e.arg
    du = differentiate(u, var)
    if du == ZERO:
        return ZERO
    f = e.func
    if f == "exp":
        outer = e
    elif f == "log":
        return div(du, u)
    elif f == "sqrt":
        return div(du, mul(Num(2.0), e))
    elif f == "sin":
        outer = Call("cos", u)
    elif f == "cos":
        outer = neg(Call("sin", u))
    elif f == "tanh":
        outer = sub(ONE, power(e, Num(2.0)))
    elif f == "erf":
        outer = mul(Num(_TWO_OVER_SQRT_PI), Call("exp", neg(power(u, Num(2.0)))))
    else:  # abs: sign(u) written as u/abs(u); undefined at u = 0
        outer = div(u, e)
    return mul(outer, du)


def total_derivative(e: Expr, var: str, dependents: Mapping[str, Expr]) -> Expr:
    """d/d(var) of ``e`` where each variable in ``dependents`` is a function
    of ``var`` with the given derivative expression (chain rule)."""
    result = differentiate(e, var)
    for name, dname in dependents.items():
        if depends_on(e, name):
            result = add(result, mul(differentiate(e, name), dname))
    return result
