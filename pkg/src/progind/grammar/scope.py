"""Typed scopes, adaptor keys and alpha-canonical expression forms."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from ..lang.expr import App, ConstBool, ConstFloat, ConstInt, If, Lam, Let, Recur, Var, height, let_nesting
from ..lang.sexpr import format_float, parse
from ..lang.typetags import Func


@dataclass(frozen=True)
class ScopeSignature:
    """Scope types with symbols dropped; names are implied positionally."""

    types: tuple
    self_sig: Func | None = None

    def pairs(self):
        return [(f"v{i}", t) for i, t in enumerate(self.types)]

    def key(self, req) -> str:
        return adaptor_key(req, self)


def adaptor_key(req, sig: ScopeSignature) -> str:
    scope = " ".join(str(t) for t in sig.types)
    self_part = str(sig.self_sig) if sig.self_sig is not None else "-"
    return f"{req} | ({scope}) | {self_part}"


@dataclass(frozen=True)
class Scope:
    names: tuple = ()
    types: tuple = ()
    self_sig: Func | None = None

    @classmethod
    def of(cls, pairs=(), self_sig=None) -> "Scope":
        pairs = list(pairs)
        return cls(tuple(n for n, _ in pairs), tuple(t for _, t in pairs), self_sig)

    def extend(self, name, t) -> "Scope":
        return Scope(self.names + (name,), self.types + (t,), self.self_sig)

    def with_self(self, self_sig) -> "Scope":
        return Scope(self.names, self.types, self_sig)

    def pairs(self):
        return list(zip(self.names, self.types))

    def type_of(self, name):
        for n, t in zip(self.names, self.types):
            if n == name:
                return t
        return None

    def vars_of(self, t):
        return [n for n, ty in zip(self.names, self.types) if ty == t]

    def functions_returning(self, ret):
        return [n for n, ty in zip(self.names, self.types) if isinstance(ty, Func) and ty.ret == ret]

    @property
    def signature(self) -> ScopeSignature:
        return ScopeSignature(self.types, self.self_sig)

    def key(self, req) -> str:
        return adaptor_key(req, self.signature)


def fresh_name(taken) -> str:
    i = len(taken)
    while f"y{i}" in taken:
        i += 1
    return f"y{i}"


def canonical(expr, names) -> str:
    """Render `expr` with every variable renamed by its scope position.

    Free variables at position i of `names` become ``v<i>``; a binder that
    extends a scope of length k becomes ``v<k>``. Alpha-equivalent
    expressions under equal scope signatures therefore render identically,
    and the canonical form of a child is a substring of its parent's.
    """
    mapping = {n: f"v{i}" for i, n in enumerate(names)}
    return _canon(expr, mapping, len(names))


def _canon(expr, mapping, level):
    if isinstance(expr, ConstBool):
        return "true" if expr.value else "false"
    if isinstance(expr, ConstInt):
        return str(expr.value)
    if isinstance(expr, ConstFloat):
        return format_float(expr.value)
    if isinstance(expr, Var):
        return mapping.get(expr.name, expr.name)
    if isinstance(expr, App):
        fn = mapping.get(expr.fn, expr.fn)
        return "(" + " ".join([fn] + [_canon(a, mapping, level) for a in expr.args]) + ")"
    if isinstance(expr, Let):
        v = f"v{level}"
        inner = dict(mapping)
        inner[expr.name] = v
        return f"(let (({v} {expr.type} {_canon(expr.bound, mapping, level)})) {_canon(expr.body, inner, level + 1)})"
    if isinstance(expr, If):
        return f"(if {_canon(expr.cond, mapping, level)} {_canon(expr.then, mapping, level)} {_canon(expr.else_, mapping, level)})"
    if isinstance(expr, Recur):
        return "(" + " ".join(["recur"] + [_canon(a, mapping, level) for a in expr.args]) + ")"
    if isinstance(expr, Lam):
        inner = dict(mapping)
        params = []
        for i, (n, t) in enumerate(expr.params):
            v = f"v{level + i}"
            inner[n] = v
            params.append(f"({v} {t})")
        body = _canon(expr.body, inner, level + len(expr.params))
        return f"(lambda ({' '.join(params)}) {expr.ret} {body})"
    raise TypeError(f"not an expression: {expr!r}")


@lru_cache(maxsize=65536)
def parse_canonical(text: str):
    return parse(text)


@lru_cache(maxsize=65536)
def canonical_metrics(text: str):
    """(height, let nesting) of a canonical expression."""
    e = parse_canonical(text)
    return height(e), let_nesting(e)


def instantiate(text: str, scope: Scope):
    """Turn a canonical expression back into one using `scope`'s names.

    Binders get the same fresh names the sampler would have chosen.
    """
    mapping = {f"v{i}": n for i, n in enumerate(scope.names)}
    return _inst(parse_canonical(text), mapping, scope.names)


def _inst(expr, mapping, names):
    if isinstance(expr, Var):
        return Var(mapping.get(expr.name, expr.name))
    if isinstance(expr, App):
        return App(mapping.get(expr.fn, expr.fn), tuple(_inst(a, mapping, names) for a in expr.args))
    if isinstance(expr, Let):
        name = fresh_name(names)
        inner = dict(mapping)
        inner[expr.name] = name
        return Let(name, expr.type, _inst(expr.bound, mapping, names), _inst(expr.body, inner, names + (name,)))
    if isinstance(expr, If):
        return If(_inst(expr.cond, mapping, names), _inst(expr.then, mapping, names), _inst(expr.else_, mapping, names))
    if isinstance(expr, Recur):
        return Recur(tuple(_inst(a, mapping, names) for a in expr.args))
    if isinstance(expr, Lam):
        inner = dict(mapping)
        params = []
        for n, t in expr.params:
            name = fresh_name(names)
            names = names + (name,)
            inner[n] = name
            params.append((name, t))
        return Lam(tuple(params), expr.ret, _inst(expr.body, inner, names))
    return expr
