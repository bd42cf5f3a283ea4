"""Parser and vectorized evaluator for scalar expressions in one variable.

Grammar (usual precedence, ``^`` right-associative, no implicit
multiplication)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

A bare NAME is the independent variable (``t``, ``x``, ``u`` or ``s``) or the
constant ``pi``.  At most one variable name may appear in an expression.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import (
    ArityError,
    EvalError,
    ExpressionSyntaxError,
    RangeError,
    UnknownFunction,
)

__all__ = [
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "parse",
    "eval_expr",
    "pretty",
    "besselj",
    "erf",
    "compile_expr",
]

VARIABLES = frozenset({"t", "x", "u", "s"})
CONSTANTS = {"pi": math.pi}

BESSEL_MAX_ORDER = 20
BESSEL_MAX_ARG = 500.0


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]


# ------------------------------------------------------------------ special functions


def erf(x):
    """Error function, elementwise (stdlib ``math.erf``)."""
    if np.ndim(x) == 0:
        return math.erf(float(x))
    return np.frompyfunc(math.erf, 1, 1)(np.asarray(x, dtype=float)).astype(float)


def _bessel_series(nu: int, x: np.ndarray) -> np.ndarray:
    # J_nu(x) = sum_k (-1)^k (x/2)^(2k+nu) / (k! (k+nu)!)
    h = 0.5 * x
    term = h**nu / math.factorial(nu)
    total = term.copy()
    q = -h * h
    for k in range(1, 60):
        term = term * q / (k * (k + nu))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _bessel_miller(nu: int, x: np.ndarray) -> np.ndarray:
    """Backward recurrence normalized by J_0 + 2 sum J_2k = 1 (x > 0)."""
    xmax = float(np.max(x))
    top = max(nu, int(xmax))
    m = 2 * ((top + 20 + int(math.sqrt(60.0 * top))) // 2)
    inv = 2.0 / x
    b_next = np.zeros_like(x)  # b_{k+1}
    b = np.full_like(x, 1e-30)  # b_k, k = m
    norm = np.zeros_like(x)
    ans = np.zeros_like(x)
    for k in range(m, 0, -1):
        b_prev = k * inv * b - b_next  # b_{k-1}
        b_next, b = b, b_prev
        big = np.abs(b) > 1e250
        if np.any(big):
            s = np.where(big, 1e-250, 1.0)
            b *= s
            b_next *= s
            norm *= s
            ans *= s
        if k - 1 == nu:
            ans = b.copy()
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * b
    norm += b  # b_0
    if nu == 0:
        ans = b
    return ans / norm


def besselj(nu, x):
    """Bessel function of the first kind J_nu(x) for integer 0 <= nu <= 20, |x| <= 500.

    Ascending series for |x| <= 2 (which keeps full relative accuracy near the
    origin), Miller backward recurrence otherwise.

    Raises:
        RangeError: Outside the supported envelope.
    """
    if float(nu) != int(nu) or not 0 <= int(nu) <= BESSEL_MAX_ORDER:
        raise RangeError(f"besselj order must be an integer in [0, {BESSEL_MAX_ORDER}], got {nu!r}")
    nu = int(nu)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > BESSEL_MAX_ARG):
        raise RangeError(f"besselj argument must satisfy |x| <= {BESSEL_MAX_ARG:g}")
    ax = np.abs(x)
    out = np.empty_like(x)
    small = ax <= 2.0
    if np.any(small):
        out[small] = _bessel_series(nu, ax[small])
    if np.any(~small):
        out[~small] = _bessel_miller(nu, ax[~small])
    if nu % 2:
        out = np.where(x < 0, -out, out)
    return float(out[0]) if scalar else out


# ------------------------------------------------------------------- function table


def _checked_log(v, strict):
    bad = v <= 0
    if np.any(bad):
        if strict:
            raise EvalError("log of non-positive argument")
        v = np.where(bad, np.nan, v)
    return np.log(v)


def _checked_sqrt(v, strict):
    bad = v < 0
    if np.any(bad):
        if strict:
            raise EvalError("sqrt of negative argument")
        v = np.where(bad, np.nan, v)
    return np.sqrt(v)


def _checked_pow(a, b, strict):
    with np.errstate(all="ignore"):
        out = np.power(a, b)
    bad = ~np.isfinite(out) & np.isfinite(a) & np.isfinite(b)
    if np.any(bad):
        if strict:
            raise EvalError("invalid power (negative base with fractional exponent, or 0^negative)")
        out = np.where(bad, np.nan, out)
    return out


_UNARY = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "abs": np.abs,
    "erf": erf,
}

# name -> arity
FUNCTIONS = {name: 1 for name in _UNARY}
FUNCTIONS.update({"log": 1, "sqrt": 1, "pow": 2, "besselj": 2})


# ----------------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str  # 'num', 'name', 'op', 'end'
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            toks.append(_Tok("end", "", len(src.encode()[:pos])))
            return toks
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ExpressionSyntaxError(
                f"unexpected character {src[pos]!r}", len(src[:pos].encode()),
                {"number", "name", "operator"},
            )
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), len(src[:start].encode())))
        pos = m.end()


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0
        self.variable = None

    @property
    def tok(self):
        return self.toks[self.i]

    def advance(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, expected):
        tok = self.tok
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExpressionSyntaxError(f"unexpected {what}", tok.offset, expected)

    def expect(self, text):
        if self.tok.kind == "op" and self.tok.text == text:
            return self.advance()
        self.fail({repr(text)})

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            self.fail({"operator", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(tok)
            if tok.text in CONSTANTS:
                return Var(tok.text)
            if tok.text in VARIABLES:
                if self.variable is not None and self.variable != tok.text:
                    raise ExpressionSyntaxError(
                        f"expression mixes variables {self.variable!r} and {tok.text!r}",
                        tok.offset,
                        {repr(self.variable)},
                    )
                self.variable = tok.text
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                self.fail({"'('"})
            raise ExpressionSyntaxError(
                f"unknown name {tok.text!r}", tok.offset, set(VARIABLES) | set(CONSTANTS)
            )
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail({"number", "name", "'('"})

    def call(self, name_tok):
        name = name_tok.text
        if name not in FUNCTIONS:
            raise UnknownFunction(name, name_tok.offset)
        self.expect("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTIONS[name]:
            raise ArityError(name, FUNCTIONS[name], len(args), name_tok.offset)
        if name == "besselj":
            order = args[0]
            if not (isinstance(order, Num) and order.value >= 0 and order.value == int(order.value)):
                raise ExpressionSyntaxError(
                    "besselj order must be a non-negative integer literal",
                    name_tok.offset,
                    {"integer literal"},
                )
        return Call(name, tuple(args))


def parse(src: str) -> Expr:
    """Parse expression text into an AST.

    Raises:
        ExpressionSyntaxError: Malformed input (carries byte offset and the
            set of expected tokens).
        UnknownFunction: Call of a function not in the table.
        ArityError: Wrong number of arguments.
    """
    return _Parser(src).parse()


# ---------------------------------------------------------------------- evaluation


def _eval(node, t, strict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in CONSTANTS:
            return CONSTANTS[node.name]
        return t
    if isinstance(node, Neg):
        return -_eval(node.operand, t, strict)
    if isinstance(node, BinOp):
        a = _eval(node.left, t, strict)
        b = _eval(node.right, t, strict)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            zero = np.asarray(b) == 0
            if np.any(zero):
                if strict:
                    raise EvalError("division by zero")
                with np.errstate(all="ignore"):
                    return np.where(zero, np.nan, np.asarray(a, dtype=float) / np.where(zero, 1.0, b))
            return a / b
        return _checked_pow(np.asarray(a, dtype=float), np.asarray(b, dtype=float), strict)
    if isinstance(node, Call):
        args = [_eval(a, t, strict) for a in node.args]
        name = node.name
        if name in _UNARY:
            with np.errstate(over="ignore"):
                return _UNARY[name](np.asarray(args[0], dtype=float))
        if name == "log":
            return _checked_log(np.asarray(args[0], dtype=float), strict)
        if name == "sqrt":
            return _checked_sqrt(np.asarray(args[0], dtype=float), strict)
        if name == "pow":
            return _checked_pow(np.asarray(args[0], dtype=float), np.asarray(args[1], dtype=float), strict)
        if name == "besselj":
            return besselj(node.args[0].value, args[1])
    raise TypeError(f"not an expression node: {node!r}")


def eval_expr(e: Expr, t, strict: bool = True):
    """Evaluate an expression at t (scalar or array).

    With ``strict`` (the default) any domain violation raises
    :class:`EvalError`; otherwise offending entries come back as NaN.
    """
    scalar = np.ndim(t) == 0
    tt = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(_eval(e, tt, strict), dtype=float)
    out = np.broadcast_to(out, tt.shape).copy() if out.shape != tt.shape else out
    if strict and not np.all(np.isfinite(out)):
        raise EvalError("expression evaluated to a non-finite value")
    return float(out) if scalar else out


def is_constant(e: Expr) -> bool:
    if isinstance(e, Num):
        return True
    if isinstance(e, Var):
        return e.name in CONSTANTS
    if isinstance(e, Neg):
        return is_constant(e.operand)
    if isinstance(e, BinOp):
        return is_constant(e.left) and is_constant(e.right)
    return all(is_constant(a) for a in e.args)


def compile_expr(src: str) -> Callable:
    """Parse once and return a vectorized callable ``f(t)``."""
    tree = parse(src)

    def f(t):
        return eval_expr(tree, t)

    f.expr = tree
    f.source = src
    return f


# ---------------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def _wrap(node, min_prec):
    s = pretty(node)
    return f"({s})" if _prec(node) < min_prec else s


def pretty(e: Expr) -> str:
    """Render an AST with the minimal parentheses that preserve its shape."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _PREC["neg"])
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        if e.op == "^":
            return f"{_wrap(e.left, _PREC['atom'])}^{_wrap(e.right, _PREC['neg'])}"
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(pretty(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")
