"""Expression trees of the induced-program language.

Every node class corresponds to one grammar production, so a derivation can
be recovered from the tree alone.
"""

from __future__ import annotations

from dataclasses import dataclass

from .typetags import Func, TypeTag


@dataclass(frozen=True)
class ConstInt:
    value: int


@dataclass(frozen=True)
class ConstFloat:
    value: float


@dataclass(frozen=True)
class ConstBool:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class App:
    fn: str
    args: tuple = ()


@dataclass(frozen=True)
class Let:
    name: str
    type: TypeTag
    bound: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    else_: "Expr"


@dataclass(frozen=True)
class Recur:
    args: tuple = ()


@dataclass(frozen=True)
class Lam:
    params: tuple  # ((name, TypeTag), ...)
    ret: TypeTag
    body: "Expr"

    @property
    def type(self) -> Func:
        return Func(tuple(t for _, t in self.params), self.ret)


Expr = ConstInt | ConstFloat | ConstBool | Var | App | Let | If | Recur | Lam

CONSTANTS = (ConstInt, ConstFloat, ConstBool)
TERMINALS = (ConstInt, ConstFloat, ConstBool, Var)


def children(expr) -> tuple:
    """Child expressions in path-index order."""
    if isinstance(expr, (App, Recur)):
        return expr.args
    if isinstance(expr, Let):
        return (expr.bound, expr.body)
    if isinstance(expr, If):
        return (expr.cond, expr.then, expr.else_)
    if isinstance(expr, Lam):
        return (expr.body,)
    return ()


def replace_child(expr, index: int, new):
    if isinstance(expr, App):
        args = list(expr.args)
        args[index] = new
        return App(expr.fn, tuple(args))
    if isinstance(expr, Recur):
        args = list(expr.args)
        args[index] = new
        return Recur(tuple(args))
    if isinstance(expr, Let):
        if index == 0:
            return Let(expr.name, expr.type, new, expr.body)
        return Let(expr.name, expr.type, expr.bound, new)
    if isinstance(expr, If):
        parts = [expr.cond, expr.then, expr.else_]
        parts[index] = new
        return If(*parts)
    if isinstance(expr, Lam):
        return Lam(expr.params, expr.ret, new)
    raise IndexError(f"{type(expr).__name__} has no children")


def subexpr(expr, path):
    for i in path:
        expr = children(expr)[i]
    return expr


def replace_at(expr, path, new):
    if not path:
        return new
    head, rest = path[0], path[1:]
    return replace_child(expr, head, replace_at(children(expr)[head], rest, new))


def size(expr) -> int:
    return 1 + sum(size(c) for c in children(expr))


def height(expr) -> int:
    """Longest root-to-leaf edge count; a leaf has height 0."""
    kids = children(expr)
    if not kids:
        return 0
    return 1 + max(height(c) for c in kids)


def let_nesting(expr) -> int:
    """Deepest chain of nested Let nodes."""
    below = max((let_nesting(c) for c in children(expr)), default=0)
    return below + 1 if isinstance(expr, Let) else below
