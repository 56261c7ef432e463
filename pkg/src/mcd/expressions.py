"""A tiny arithmetic expression language.

Used in two places: composed auxiliary objectives (arithmetic over predictor
channel names) and sweep schedule definitions (arithmetic over the grid
indices ``i``/``j`` and size ``n``). Supports + - * / ^ (right-associative
power), unary minus, parentheses, numbers, and bare variable names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


class ExpressionError(ValueError):
    """Malformed expression text."""


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if not match or match.end() == pos:
            raise ExpressionError(f"cannot parse expression at {text[pos:]!r}")
        if match.lastgroup:
            tokens.append((match.lastgroup, match.group(match.lastgroup)))
        pos = match.end()
    return tokens


@dataclass(frozen=True)
class CompiledExpression:
    """A parsed expression; call with a variable mapping to evaluate."""

    source: str
    variables: tuple[str, ...]
    _fn: Callable[[Mapping[str, float]], float]

    def __call__(self, variables: Mapping[str, float]) -> float:
        return self._fn(variables)


def compile_expression(text: str) -> CompiledExpression:
    tokens = _tokenize(text)
    names: set[str] = set()
    index = 0

    def peek():
        return tokens[index] if index < len(tokens) else (None, None)

    def take(expected_op=None):
        nonlocal index
        if index >= len(tokens):
            raise ExpressionError(f"unexpected end of expression in {text!r}")
        kind, value = tokens[index]
        if expected_op is not None and (kind != "op" or value != expected_op):
            raise ExpressionError(f"expected {expected_op!r} in {text!r}, got {value!r}")
        index += 1
        return kind, value

    def parse_expr():
        node = parse_term()
        while peek() == ("op", "+") or peek() == ("op", "-"):
            _, op = take()
            rhs = parse_term()
            node = (lambda left, right: (lambda env: left(env) + right(env)))(node, rhs) \
                if op == "+" else (lambda left, right: (lambda env: left(env) - right(env)))(node, rhs)
        return node

    def parse_term():
        node = parse_unary()
        while peek() == ("op", "*") or peek() == ("op", "/"):
            _, op = take()
            rhs = parse_unary()
            node = (lambda left, right: (lambda env: left(env) * right(env)))(node, rhs) \
                if op == "*" else (lambda left, right: (lambda env: left(env) / right(env)))(node, rhs)
        return node

    def parse_unary():
        if peek() == ("op", "-"):
            take()
            inner = parse_unary()
            return lambda env: -inner(env)
        return parse_power()

    def parse_power():
        base = parse_atom()
        if peek() == ("op", "^"):
            take()
            exponent = parse_unary()
            return lambda env: base(env) ** exponent(env)
        return base

    def parse_atom():
        kind, value = take()
        if kind == "num":
            number = float(value)
            return lambda env: number
        if kind == "name":
            names.add(value)
            name = value
            def lookup(env, name=name):
                try:
                    return float(env[name])
                except KeyError:
                    raise ExpressionError(f"unknown variable {name!r} in {text!r}") from None
            return lookup
        if kind == "op" and value == "(":
            inner = parse_expr()
            take(")")
            return inner
        raise ExpressionError(f"unexpected token {value!r} in {text!r}")

    fn = parse_expr()
    if index != len(tokens):
        raise ExpressionError(f"trailing input {tokens[index:]} in {text!r}")
    return CompiledExpression(source=text, variables=tuple(sorted(names)), _fn=fn)
