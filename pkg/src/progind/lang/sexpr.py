"""Canonical text syntax for expressions and types.

    (+ x1 2)
    (let ((y int (uniform-int 0 9))) (+ y x1))
    (if (< x1 0) 0 x1)
    (lambda ((x1 int) (x2 int)) int (+ x1 x2))
    (recur (- x1 1))

Floats always carry a decimal point and are written with 17 significant
digits, so ``parse(render(e)) == e`` and ``render(parse(s)) == s`` for
canonical ``s``.
"""

from __future__ import annotations

import math
import re

from .expr import App, ConstBool, ConstFloat, ConstInt, If, Lam, Let, Recur, Var
from .typetags import BASE_TYPES, Base, Func

RESERVED = frozenset({"let", "if", "recur", "lambda", "true", "false", "->"})

_TOKEN = re.compile(r"\s*(?:([()])|([^\s()]+))")
_INT = re.compile(r"[+-]?\d+\Z")
_FLOAT = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+(\.\d*)?[eE][+-]?\d+|\d+\.\d*[eE][+-]?\d+)\Z")


class ParseError(ValueError):
    pass


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite float {x!r} has no literal form")
    s = format(x, ".17g")
    mantissa, e, exp = s.partition("e")
    if "." not in mantissa:
        mantissa += ".0"
    return mantissa + e + exp


def render_type(t) -> str:
    return str(t)


def render(expr) -> str:
    if isinstance(expr, ConstBool):
        return "true" if expr.value else "false"
    if isinstance(expr, ConstInt):
        return str(expr.value)
    if isinstance(expr, ConstFloat):
        return format_float(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, App):
        return "(" + " ".join([expr.fn, *map(render, expr.args)]) + ")"
    if isinstance(expr, Let):
        return f"(let (({expr.name} {expr.type} {render(expr.bound)})) {render(expr.body)})"
    if isinstance(expr, If):
        return f"(if {render(expr.cond)} {render(expr.then)} {render(expr.else_)})"
    if isinstance(expr, Recur):
        return "(" + " ".join(["recur", *map(render, expr.args)]) + ")"
    if isinstance(expr, Lam):
        params = " ".join(f"({n} {t})" for n, t in expr.params)
        return f"(lambda ({params}) {expr.ret} {render(expr.body)})"
    raise TypeError(f"not an expression: {expr!r}")


def read(text: str):
    """Read one s-expression into nested lists of atom strings."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unreadable text at offset {pos}")
        tokens.append(m.group(1) or m.group(2))
        pos = m.end()
    if not tokens:
        raise ParseError("empty input")
    tree, end = _read_tokens(tokens, 0)
    if end != len(tokens):
        raise ParseError(f"trailing tokens after expression: {' '.join(tokens[end:])}")
    return tree


def _read_tokens(tokens, i):
    tok = tokens[i]
    if tok == ")":
        raise ParseError("unexpected ')'")
    if tok != "(":
        return tok, i + 1
    items = []
    i += 1
    while True:
        if i >= len(tokens):
            raise ParseError("missing ')'")
        if tokens[i] == ")":
            return items, i + 1
        item, i = _read_tokens(tokens, i)
        items.append(item)


def parse(text: str):
    return _expr(read(text))


def parse_type(text: str):
    return _type(read(text))


def _type(tree):
    if isinstance(tree, str):
        if tree in BASE_TYPES:
            return BASE_TYPES[tree]
        raise ParseError(f"unknown type name {tree!r}")
    if len(tree) == 3 and tree[0] == "->" and isinstance(tree[1], list):
        return Func(tuple(_type(p) for p in tree[1]), _type(tree[2]))
    raise ParseError(f"malformed type {tree!r}")


def _symbol(tok):
    if not isinstance(tok, str) or tok in RESERVED or _INT.match(tok) or _FLOAT.match(tok):
        raise ParseError(f"expected a symbol, got {tok!r}")
    return tok


def _expr(tree):
    if isinstance(tree, str):
        if tree == "true":
            return ConstBool(True)
        if tree == "false":
            return ConstBool(False)
        if _INT.match(tree):
            return ConstInt(int(tree))
        if _FLOAT.match(tree):
            return ConstFloat(float(tree))
        return Var(_symbol(tree))
    if not tree:
        raise ParseError("empty application ()")
    head = tree[0]
    if head == "let":
        if len(tree) != 3 or not isinstance(tree[1], list) or len(tree[1]) != 1:
            raise ParseError("let takes one binding: (let ((name type expr)) body)")
        binding = tree[1][0]
        if not isinstance(binding, list) or len(binding) != 3:
            raise ParseError("malformed let binding")
        return Let(_symbol(binding[0]), _type(binding[1]), _expr(binding[2]), _expr(tree[2]))
    if head == "if":
        if len(tree) != 4:
            raise ParseError("if takes exactly three operands")
        return If(_expr(tree[1]), _expr(tree[2]), _expr(tree[3]))
    if head == "recur":
        return Recur(tuple(_expr(a) for a in tree[1:]))
    if head == "lambda":
        if len(tree) != 4 or not isinstance(tree[1], list):
            raise ParseError("lambda form is (lambda ((name type) ...) ret-type body)")
        params = []
        for p in tree[1]:
            if not isinstance(p, list) or len(p) != 2:
                raise ParseError(f"malformed lambda parameter {p!r}")
            params.append((_symbol(p[0]), _type(p[1])))
        return Lam(tuple(params), _type(tree[2]), _expr(tree[3]))
    return App(_symbol(head), tuple(_expr(a) for a in tree[1:]))


__all__ = ["ParseError", "Base", "format_float", "parse", "parse_type", "read", "render", "render_type"]
