"""Time-dependent scalar expressions: a small AST grammar plus sampled grids.

The grammar covers real literals, the variable ``t``, the four arithmetic
operators, unary minus, and the functions ``sin cos exp abs pow``.  An
expression can alternatively be backed by a uniform sample grid with linear
interpolation, in which case evaluation outside the grid range is an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, EvaluationError, WindowError

_FUNCTIONS = {
    "sin": (1, math.sin),
    "cos": (1, math.cos),
    "exp": (1, math.exp),
    "abs": (1, abs),
    "pow": (2, math.pow),
}

GRAMMAR_VERSION = 1


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass  # the time variable t


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


class _Tokenizer:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._scan()
        self.index = 0

    def _scan(self):
        text = self.text
        i = 0
        n = len(text)
        while i < n:
            c = text[i]
            if c.isspace():
                i += 1
                continue
            if c in "+-*/(),":
                self.tokens.append((c, c, i))
                i += 1
                continue
            if c.isdigit() or c == ".":
                j = i
                while j < n and (text[j].isdigit() or text[j] == "."):
                    j += 1
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    if k < n and text[k].isdigit():
                        j = k
                        while j < n and text[j].isdigit():
                            j += 1
                try:
                    value = float(text[i:j])
                except ValueError:
                    raise ConfigError(f"bad numeric literal {text[i:j]!r}", column=i + 1)
                self.tokens.append(("num", value, i))
                i = j
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("name", text[i:j], i))
                i = j
                continue
            raise ConfigError(f"unexpected character {c!r}", column=i + 1)
        self.tokens.append(("end", None, n))

    def peek(self):
        return self.tokens[self.index]

    def next(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok


def _parse_expr(tk):
    node = _parse_term(tk)
    while tk.peek()[0] in ("+", "-"):
        op = tk.next()[0]
        node = BinOp(op, node, _parse_term(tk))
    return node


def _parse_term(tk):
    node = _parse_factor(tk)
    while tk.peek()[0] in ("*", "/"):
        op = tk.next()[0]
        node = BinOp(op, node, _parse_factor(tk))
    return node


def _parse_factor(tk):
    kind, _, pos = tk.peek()
    if kind == "-":
        tk.next()
        return Neg(_parse_factor(tk))
    if kind == "+":
        tk.next()
        return _parse_factor(tk)
    return _parse_primary(tk)


def _parse_primary(tk):
    kind, value, pos = tk.next()
    if kind == "num":
        return Num(value)
    if kind == "name":
        if value == "t":
            return Var()
        if value in _FUNCTIONS:
            arity = _FUNCTIONS[value][0]
            if tk.peek()[0] != "(":
                raise ConfigError(f"function {value!r} requires '('", column=tk.peek()[2] + 1)
            tk.next()
            args = [_parse_expr(tk)]
            while tk.peek()[0] == ",":
                tk.next()
                args.append(_parse_expr(tk))
            if tk.peek()[0] != ")":
                raise ConfigError("expected ')'", column=tk.peek()[2] + 1)
            tk.next()
            if len(args) != arity:
                raise ConfigError(
                    f"function {value!r} takes {arity} argument(s), got {len(args)}",
                    column=pos + 1,
                )
            return Call(value, tuple(args))
        raise ConfigError(f"unknown name {value!r}", column=pos + 1)
    if kind == "(":
        node = _parse_expr(tk)
        if tk.peek()[0] != ")":
            raise ConfigError("expected ')'", column=tk.peek()[2] + 1)
        tk.next()
        return node
    raise ConfigError(f"unexpected token {kind!r}", column=pos + 1)


def _compile(node):
    """Build a float->float closure for an AST node."""
    if isinstance(node, Num):
        v = node.value
        return lambda t: v
    if isinstance(node, Var):
        return lambda t: t
    if isinstance(node, Neg):
        f = _compile(node.arg)
        return lambda t: -f(t)
    if isinstance(node, BinOp):
        fl, fr = _compile(node.left), _compile(node.right)
        op = node.op
        if op == "+":
            return lambda t: fl(t) + fr(t)
        if op == "-":
            return lambda t: fl(t) - fr(t)
        if op == "*":
            return lambda t: fl(t) * fr(t)
        return lambda t: fl(t) / fr(t)
    if isinstance(node, Call):
        fn = _FUNCTIONS[node.name][1]
        fargs = [_compile(a) for a in node.args]
        if len(fargs) == 1:
            fa = fargs[0]
            return lambda t: fn(fa(t))
        fa, fb = fargs
        return lambda t: fn(fa(t), fb(t))
    raise TypeError(f"unknown AST node {node!r}")


def _print(node):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Neg):
        return f"-{_print_tight(node.arg)}"
    if isinstance(node, BinOp):
        return f"({_print(node.left)} {node.op} {_print(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_print(a) for a in node.args)})"
    raise TypeError(f"unknown AST node {node!r}")


def _print_tight(node):
    text = _print(node)
    if isinstance(node, (BinOp,)):
        return text  # already parenthesised
    if isinstance(node, (Num, Var, Call)):
        return f"({text})" if isinstance(node, Num) and node.value < 0 else text
    return f"({text})"


class TimeExpression:
    """A scalar function of time, either an AST or a uniform sample grid."""

    def __init__(self, ast=None, grid=None):
        if (ast is None) == (grid is None):
            raise ValueError("exactly one of ast/grid must be given")
        self.ast = ast
        self.grid = grid
        if grid is not None:
            t0, dt, values = grid
            if dt <= 0:
                raise ConfigError("grid dt must be positive")
            if len(values) < 2:
                raise ConfigError("grid needs at least 2 samples")
            self._t0 = float(t0)
            self._dt = float(dt)
            self._values = [float(v) for v in values]
            self._t1 = self._t0 + (len(values) - 1) * self._dt
            self._fn = None
        else:
            self._fn = _compile(ast)

    @classmethod
    def parse(cls, text):
        tk = _Tokenizer(text)
        node = _parse_expr(tk)
        kind, _, pos = tk.peek()
        if kind != "end":
            raise ConfigError(f"trailing input starting at {text[pos:]!r}", column=pos + 1)
        return cls(ast=node)

    @classmethod
    def from_grid(cls, t0, dt, values):
        return cls(grid=(t0, dt, list(values)))

    @property
    def is_grid(self):
        return self.grid is not None

    def __call__(self, t):
        if self._fn is not None:
            try:
                value = self._fn(t)
            except (ZeroDivisionError, OverflowError, ValueError) as exc:
                raise EvaluationError(f"expression failed at t={t}: {exc}") from exc
            if not math.isfinite(value):
                raise EvaluationError(f"expression non-finite at t={t}")
            return value
        if t < self._t0 - 1e-12 or t > self._t1 + 1e-12:
            raise WindowError(
                f"t={t} outside grid range [{self._t0}, {self._t1}]"
            )
        u = (t - self._t0) / self._dt
        i = int(math.floor(u))
        i = min(max(i, 0), len(self._values) - 2)
        frac = u - i
        if frac < 1e-9:
            return self._values[i]
        if frac > 1 - 1e-9:
            return self._values[i + 1]
        return self._values[i] * (1 - frac) + self._values[i + 1] * frac

    def to_text(self):
        if self.is_grid:
            raise ValueError("grid-backed expressions print via their config block")
        return _print(self.ast)

    def __eq__(self, other):
        if not isinstance(other, TimeExpression):
            return NotImplemented
        if self.is_grid != other.is_grid:
            return False
        if self.is_grid:
            return (self._t0, self._dt, self._values) == (other._t0, other._dt, other._values)
        return self.ast == other.ast

    def __repr__(self):
        if self.is_grid:
            return f"TimeExpression(grid=({self._t0}, {self._dt}, {len(self._values)} samples))"
        return f"TimeExpression({self.to_text()!r})"
