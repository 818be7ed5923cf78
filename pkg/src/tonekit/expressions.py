"""Scalar expression trees over x, y, z with symbolic differentiation.

The grammar (whitespace insignificant):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' integer)?
    base   := number | 'x'|'y'|'z' | func '(' expr ')' | '(' expr ')'
    func   in {sin, cos, exp, sqrt, tanh}

Expressions are immutable; evaluation is vectorized over point arrays and may
be called concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Func",
    "ParseError",
    "EvaluationError",
    "parse_expr",
    "diff",
    "compose",
    "evaluate",
    "const",
    "var",
    "add",
    "sub",
    "mul",
    "div",
    "powi",
    "func",
]

VAR_NAMES = ("x", "y", "z")
FUNC_NAMES = ("sin", "cos", "exp", "sqrt", "tanh")


class ParseError(ValueError):
    """Syntax or identifier error, annotated with a 1-based column."""

    def __init__(self, message, column):
        super().__init__(f"{message} (column {column})")
        self.column = column


class EvaluationError(ArithmeticError):
    """Raised when an expression or its gradient is undefined at a point."""


class Expr:
    __slots__ = ()

    def variables(self):
        """Set of variable indices appearing in the tree."""
        out = set()
        _collect_vars(self, out)
        return out

    def __str__(self):
        return _render(self)


@dataclass(frozen=True)
class Const(Expr):
    __slots__ = ("value",)
    value: float


@dataclass(frozen=True)
class Var(Expr):
    __slots__ = ("index",)
    index: int


@dataclass(frozen=True)
class Add(Expr):
    __slots__ = ("a", "b")
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Sub(Expr):
    __slots__ = ("a", "b")
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Mul(Expr):
    __slots__ = ("a", "b")
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Div(Expr):
    __slots__ = ("a", "b")
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Pow(Expr):
    __slots__ = ("base", "exponent")
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Func(Expr):
    __slots__ = ("name", "arg")
    name: str
    arg: Expr


def _collect_vars(e, out):
    if isinstance(e, Var):
        out.add(e.index)
    elif isinstance(e, (Add, Sub, Mul, Div)):
        _collect_vars(e.a, out)
        _collect_vars(e.b, out)
    elif isinstance(e, Pow):
        _collect_vars(e.base, out)
    elif isinstance(e, Func):
        _collect_vars(e.arg, out)


# ---------------------------------------------------------------------------
# Smart constructors with constant folding.  Keeps differentiated / composed
# trees from drowning in 0*... and 1*... noise.


def const(v):
    return Const(float(v))


def var(i):
    return Var(int(i))


def _is_const(e, v=None):
    return isinstance(e, Const) and (v is None or e.value == v)


def add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a, b):
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Sub(a, b)


def mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def div(a, b):
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    return Div(a, b)


def powi(base, k):
    k = int(k)
    if k == 0:
        return Const(1.0)
    if k == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value**k)
    return Pow(base, k)


def func(name, arg):
    if name not in FUNC_NAMES:
        raise ValueError(f"unknown function {name!r}")
    return Func(name, arg)


# ---------------------------------------------------------------------------
# Parsing


class _Lexer:
    def __init__(self, source):
        self.src = source
        self.pos = 0
        self.tokens = []
        self._scan()
        self.cursor = 0

    def _scan(self):
        src = self.src
        i = 0
        n = len(src)
        while i < n:
            c = src[i]
            if c.isspace():
                i += 1
                continue
            col = i + 1
            if c in "+-*/^()":
                self.tokens.append((c, c, col))
                i += 1
            elif c.isdigit() or c == ".":
                j = i
                while j < n and (src[j].isdigit() or src[j] == "."):
                    j += 1
                # exponent part of a float literal
                if j < n and src[j] in "eE":
                    k = j + 1
                    if k < n and src[k] in "+-":
                        k += 1
                    if k < n and src[k].isdigit():
                        j = k
                        while j < n and src[j].isdigit():
                            j += 1
                text = src[i:j]
                try:
                    value = float(text)
                except ValueError:
                    raise ParseError(f"malformed number {text!r}", col) from None
                self.tokens.append(("num", value, col))
                i = j
            elif c.isalpha():
                j = i
                while j < n and (src[j].isalnum() or src[j] == "_"):
                    j += 1
                self.tokens.append(("name", src[i:j], col))
                i = j
            else:
                raise ParseError(f"unexpected character {c!r}", col)
        self.tokens.append(("end", None, n + 1))

    def peek(self):
        return self.tokens[self.cursor]

    def next(self):
        tok = self.tokens[self.cursor]
        self.cursor += 1
        return tok


def parse_expr(source):
    """Parse a scalar expression; raises ParseError with a column on bad input."""
    lex = _Lexer(source)
    e = _parse_sum(lex)
    kind, _, col = lex.peek()
    if kind != "end":
        raise ParseError("unexpected trailing input", col)
    return e


def _parse_sum(lex):
    e = _parse_term(lex)
    while lex.peek()[0] in ("+", "-"):
        op = lex.next()[0]
        rhs = _parse_term(lex)
        e = Add(e, rhs) if op == "+" else Sub(e, rhs)
    return e


def _parse_term(lex):
    e = _parse_factor(lex)
    while lex.peek()[0] in ("*", "/"):
        op = lex.next()[0]
        rhs = _parse_factor(lex)
        e = Mul(e, rhs) if op == "*" else Div(e, rhs)
    return e


def _parse_factor(lex):
    e = _parse_base(lex)
    if lex.peek()[0] == "^":
        lex.next()
        kind, value, col = lex.next()
        sign = 1
        if kind in ("+", "-"):
            sign = -1 if kind == "-" else 1
            kind, value, col = lex.next()
        if kind != "num":
            raise ParseError("exponent must be an integer", col)
        if value != int(value):
            raise ParseError("non-integer exponent", col)
        return Pow(e, sign * int(value))
    return e


def _parse_base(lex):
    kind, value, col = lex.next()
    if kind == "num":
        return Const(value)
    if kind == "name":
        if value in VAR_NAMES:
            return Var(VAR_NAMES.index(value))
        if value in FUNC_NAMES:
            kind2, _, col2 = lex.next()
            if kind2 != "(":
                raise ParseError(f"expected '(' after {value}", col2)
            arg = _parse_sum(lex)
            kind3, _, col3 = lex.next()
            if kind3 != ")":
                raise ParseError("expected ')'", col3)
            return Func(value, arg)
        raise ParseError(f"unknown identifier {value!r}", col)
    if kind == "(":
        e = _parse_sum(lex)
        kind2, _, col2 = lex.next()
        if kind2 != ")":
            raise ParseError("expected ')'", col2)
        return e
    raise ParseError("syntax error", col)


# ---------------------------------------------------------------------------
# Differentiation and substitution


def diff(e, index):
    """Symbolic partial derivative with respect to variable `index`."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.index == index else 0.0)
    if isinstance(e, Add):
        return add(diff(e.a, index), diff(e.b, index))
    if isinstance(e, Sub):
        return sub(diff(e.a, index), diff(e.b, index))
    if isinstance(e, Mul):
        return add(mul(diff(e.a, index), e.b), mul(e.a, diff(e.b, index)))
    if isinstance(e, Div):
        num = sub(mul(diff(e.a, index), e.b), mul(e.a, diff(e.b, index)))
        return div(num, powi(e.b, 2))
    if isinstance(e, Pow):
        inner = diff(e.base, index)
        return mul(mul(const(e.exponent), powi(e.base, e.exponent - 1)), inner)
    if isinstance(e, Func):
        inner = diff(e.arg, index)
        if e.name == "sin":
            outer = Func("cos", e.arg)
        elif e.name == "cos":
            outer = mul(const(-1.0), Func("sin", e.arg))
        elif e.name == "exp":
            outer = e
        elif e.name == "tanh":
            outer = sub(const(1.0), powi(Func("tanh", e.arg), 2))
        elif e.name == "sqrt":
            outer = div(const(0.5), Func("sqrt", e.arg))
        else:  # pragma: no cover
            raise ValueError(e.name)
        return mul(outer, inner)
    raise TypeError(f"not an expression node: {e!r}")


def compose(e, subs):
    """Substitute subs[i] for variable i throughout the tree."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return subs[e.index]
    if isinstance(e, Add):
        return add(compose(e.a, subs), compose(e.b, subs))
    if isinstance(e, Sub):
        return sub(compose(e.a, subs), compose(e.b, subs))
    if isinstance(e, Mul):
        return mul(compose(e.a, subs), compose(e.b, subs))
    if isinstance(e, Div):
        return div(compose(e.a, subs), compose(e.b, subs))
    if isinstance(e, Pow):
        return powi(compose(e.base, subs), e.exponent)
    if isinstance(e, Func):
        return func(e.name, compose(e.arg, subs))
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation

_FUNC_IMPL = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
}


def _ev(e, cols):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return cols[e.index]
    if isinstance(e, Add):
        return _ev(e.a, cols) + _ev(e.b, cols)
    if isinstance(e, Sub):
        return _ev(e.a, cols) - _ev(e.b, cols)
    if isinstance(e, Mul):
        return _ev(e.a, cols) * _ev(e.b, cols)
    if isinstance(e, Div):
        return _ev(e.a, cols) / _ev(e.b, cols)
    if isinstance(e, Pow):
        base = _ev(e.base, cols)
        if e.exponent < 0:
            return np.asarray(base, dtype=float) ** e.exponent
        return base**e.exponent
    if isinstance(e, Func):
        return _FUNC_IMPL[e.name](_ev(e.arg, cols))
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e, points, check=True):
    """Evaluate at points of shape (m, dim); returns an (m,) float array.

    With check=True a non-finite result (division by zero, sqrt of a negative
    number, ...) raises EvaluationError.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    needed = e.variables()
    if needed and max(needed) >= pts.shape[1]:
        name = VAR_NAMES[max(needed)]
        raise EvaluationError(f"expression references {name!r} but points are {pts.shape[1]}-dimensional")
    cols = [pts[:, j] if j < pts.shape[1] else None for j in range(3)]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = _ev(e, cols)
    out = np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()
    if check and not np.all(np.isfinite(out)):
        raise EvaluationError("expression undefined (non-finite value) at a requested point")
    return out


def _render(e):
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return VAR_NAMES[e.index]
    if isinstance(e, Add):
        return f"({_render(e.a)} + {_render(e.b)})"
    if isinstance(e, Sub):
        return f"({_render(e.a)} - {_render(e.b)})"
    if isinstance(e, Mul):
        return f"({_render(e.a)} * {_render(e.b)})"
    if isinstance(e, Div):
        return f"({_render(e.a)} / {_render(e.b)})"
    if isinstance(e, Pow):
        return f"{_render(e.base)}^{e.exponent}"
    if isinstance(e, Func):
        return f"{e.name}({_render(e.arg)})"
    return repr(e)
