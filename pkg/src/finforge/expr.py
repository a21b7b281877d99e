"""Prefix-notation arithmetic expressions.

Identities and tool behaviors are stored as s-expressions over the four
arithmetic operators, e.g. ``(= assets (+ liabilities equity))``. ``+`` and
``*`` are n-ary, ``-`` and ``/`` are binary. Unicode aliases for minus,
times, and division are accepted on parse and normalized to ASCII.

Solving for one unknown uses path inversion when the unknown occurs exactly
once in the tree; otherwise it falls back to bracketed bisection over the
unknown's declared interval (tolerance 1e-10).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from .errors import InputError, SolveError

BISECTION_TOL = 1e-10
_BISECTION_GRID = 256

_OP_ALIASES = {"−": "-", "×": "*", "·": "*", "÷": "/"}
_OPS = {"+", "-", "*", "/"}


@dataclass(frozen=True)
class Sym:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Num:
    value: float

    def __str__(self) -> str:
        v = self.value
        return str(int(v)) if float(v).is_integer() else repr(v)


@dataclass(frozen=True)
class Call:
    op: str
    args: tuple["Expr", ...]

    def __str__(self) -> str:
        return "(" + " ".join([self.op] + [str(a) for a in self.args]) + ")"


Expr = Union[Sym, Num, Call]

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text)


def _parse_tokens(tokens: list[str], pos: int) -> tuple[Expr, int]:
    if pos >= len(tokens):
        raise InputError("unexpected end of expression")
    tok = tokens[pos]
    if tok == "(":
        pos += 1
        if pos >= len(tokens):
            raise InputError("dangling '('")
        op = _OP_ALIASES.get(tokens[pos], tokens[pos])
        if op not in _OPS:
            raise InputError(f"unknown operator {tokens[pos]!r}")
        pos += 1
        args: list[Expr] = []
        while pos < len(tokens) and tokens[pos] != ")":
            arg, pos = _parse_tokens(tokens, pos)
            args.append(arg)
        if pos >= len(tokens):
            raise InputError("missing ')'")
        pos += 1
        if op in ("-", "/") and len(args) != 2:
            raise InputError(f"operator {op!r} takes exactly two operands")
        if len(args) < 2:
            raise InputError(f"operator {op!r} takes at least two operands")
        return Call(op, tuple(args)), pos
    if tok == ")":
        raise InputError("unexpected ')'")
    if _NUMBER.match(tok):
        return Num(float(tok)), pos + 1
    return Sym(tok), pos + 1


def parse_expr(text: str) -> Expr:
    """Parse a bare prefix expression, e.g. ``(+ liabilities equity)``."""
    tokens = _tokenize(text)
    expr, pos = _parse_tokens(tokens, 0)
    if pos != len(tokens):
        raise InputError(f"trailing tokens after expression: {tokens[pos:]}")
    return expr


def parse_relation(text: str) -> tuple[str, Expr]:
    """Parse ``(= lhs_symbol <expr>)`` into (lhs symbol, rhs expression)."""
    tokens = _tokenize(text)
    if len(tokens) < 4 or tokens[0] != "(" or tokens[1] != "=":
        raise InputError("relation must have the form '(= symbol expr)'")
    lhs = tokens[2]
    if lhs in ("(", ")") or _NUMBER.match(lhs) or lhs in _OPS:
        raise InputError("relation left-hand side must be a plain symbol")
    rhs, pos = _parse_tokens(tokens, 3)
    if pos != len(tokens) - 1 or tokens[pos] != ")":
        raise InputError("malformed relation")
    return lhs, rhs


def render_relation(lhs: str, rhs: Expr) -> str:
    return f"(= {lhs} {rhs})"


def symbols(expr: Expr) -> set[str]:
    return {s for s in _walk_symbols(expr)}


def _walk_symbols(expr: Expr) -> Iterator[str]:
    if isinstance(expr, Sym):
        yield expr.name
    elif isinstance(expr, Call):
        for a in expr.args:
            yield from _walk_symbols(a)


def occurrences(expr: Expr, name: str) -> int:
    return sum(1 for s in _walk_symbols(expr) if s == name)


def evaluate(expr: Expr, env: Mapping[str, float]) -> float:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Sym):
        try:
            return float(env[expr.name])
        except KeyError:
            raise InputError(f"unbound symbol {expr.name!r}") from None
    vals = [evaluate(a, env) for a in expr.args]
    if expr.op == "+":
        return sum(vals)
    if expr.op == "*":
        out = 1.0
        for v in vals:
            out *= v
        return out
    if expr.op == "-":
        return vals[0] - vals[1]
    # "/"
    if vals[1] == 0.0:
        raise SolveError("division by zero while evaluating")
    return vals[0] / vals[1]


def _invert_step(node: Call, target: float, hidden: str, env: Mapping[str, float]) -> tuple[Expr, float]:
    """One inversion step: return (subtree containing hidden, new target)."""
    holding = [a for a in node.args if occurrences(a, hidden) > 0]
    assert len(holding) == 1
    inner = holding[0]
    rest = [a for a in node.args if a is not inner]
    if node.op == "+":
        return inner, target - sum(evaluate(a, env) for a in rest)
    if node.op == "*":
        prod = 1.0
        for a in rest:
            prod *= evaluate(a, env)
        if prod == 0.0:
            raise SolveError("cannot invert product with zero coefficient")
        return inner, target / prod
    if node.op == "-":
        if inner is node.args[0]:
            return inner, target + evaluate(node.args[1], env)
        return inner, evaluate(node.args[0], env) - target
    # "/"
    if inner is node.args[0]:
        return inner, target * evaluate(node.args[1], env)
    if target == 0.0:
        raise SolveError("cannot invert division with zero target")
    return inner, evaluate(node.args[0], env) / target


def solve(
    lhs: str,
    rhs: Expr,
    hidden: str,
    env: Mapping[str, float],
    interval: tuple[float, float] | None = None,
) -> float:
    """Solve ``lhs = rhs`` for ``hidden`` given values for every other symbol.

    ``env`` must bind every symbol of the relation except ``hidden``. When the
    hidden symbol occurs exactly once, the tree is unwound algebraically;
    otherwise ``interval`` is required and the root is bisected to 1e-10.
    """
    rel_syms = symbols(rhs) | {lhs}
    if hidden not in rel_syms:
        raise InputError(f"hidden symbol {hidden!r} not in relation")

    if hidden == lhs:
        if occurrences(rhs, hidden) > 0:
            return _bisect(lhs, rhs, hidden, env, interval)
        return evaluate(rhs, env)

    if occurrences(rhs, hidden) == 1:
        target = float(env[lhs])
        node: Expr = rhs
        while not isinstance(node, Sym):
            assert isinstance(node, Call)
            node, target = _invert_step(node, target, hidden, env)
        return target

    return _bisect(lhs, rhs, hidden, env, interval)


def _bisect(
    lhs: str,
    rhs: Expr,
    hidden: str,
    env: Mapping[str, float],
    interval: tuple[float, float] | None,
) -> float:
    if interval is None:
        raise SolveError(f"{hidden!r} occurs multiple times; an interval is required")
    lo, hi = interval

    def g(x: float) -> float:
        scope = dict(env)
        scope[hidden] = x
        lhs_val = x if hidden == lhs else float(env[lhs])
        return lhs_val - evaluate(rhs, scope)

    # Scan a uniform grid for a sign change; identities are piecewise smooth
    # over declared intervals so this finds a bracket when a root exists.
    xs = [lo + (hi - lo) * i / _BISECTION_GRID for i in range(_BISECTION_GRID + 1)]
    prev_x, prev_v = None, None
    for x in xs:
        try:
            v = g(x)
        except SolveError:
            prev_x, prev_v = None, None
            continue
        if v == 0.0:
            return x
        if prev_v is not None and (prev_v < 0) != (v < 0):
            a, b, fa = prev_x, x, prev_v
            while b - a > BISECTION_TOL:
                mid = (a + b) / 2
                fm = g(mid)
                if fm == 0.0:
                    return mid
                if (fa < 0) != (fm < 0):
                    b = mid
                else:
                    a, fa = mid, fm
            return (a + b) / 2
        prev_x, prev_v = x, v
    raise SolveError(f"no root for {hidden!r} in [{lo}, {hi}]")


def residual(lhs: str, rhs: Expr, env: Mapping[str, float]) -> float:
    """Relative identity residual |lhs - rhs| / max(1, |lhs|)."""
    lhs_val = float(env[lhs])
    return abs(lhs_val - evaluate(rhs, env)) / max(1.0, abs(lhs_val))
