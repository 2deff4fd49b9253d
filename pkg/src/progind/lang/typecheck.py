"""Static type synthesis for expressions."""

from __future__ import annotations

from .expr import App, ConstBool, ConstFloat, ConstInt, If, Lam, Let, Recur, Var
from .sexpr import render
from .stdlib import Registry, standard_registry
from .typetags import BOOL, FLOAT, INT, Func


class TypeCheckError(Exception):
    """An ill-typed node; `path` is the child-index path from the root."""

    def __init__(self, message: str, path=()):
        self.path = tuple(path)
        where = "/".join(map(str, self.path)) or "root"
        super().__init__(f"{message} (at {where})")
        self.message = message


class UnboundSymbolError(TypeCheckError):
    pass


def typecheck(expr, scope=(), self_sig: Func | None = None, registry: Registry | None = None):
    """Return the type of `expr` under `scope`, a sequence of (symbol, type).

    Binders may not shadow a scope symbol or a primitive name; this keeps
    every variable reference unambiguous.
    """
    registry = registry or standard_registry()
    env = dict(scope)
    if len(env) != len(scope):
        raise TypeCheckError("scope symbols must be distinct")
    return _check(expr, env, self_sig, registry, ())


def _bind(env, name, t, registry, path):
    if name in env or name in registry:
        raise TypeCheckError(f"binder {name!r} shadows an existing name", path)
    out = dict(env)
    out[name] = t
    return out


def _check(expr, env, self_sig, registry, path):
    if isinstance(expr, ConstBool):
        return BOOL
    if isinstance(expr, ConstInt):
        return INT
    if isinstance(expr, ConstFloat):
        return FLOAT
    if isinstance(expr, Var):
        if expr.name not in env:
            raise UnboundSymbolError(f"unbound symbol {expr.name!r}", path)
        return env[expr.name]
    if isinstance(expr, App):
        arg_types = [_check(a, env, self_sig, registry, path + (i,)) for i, a in enumerate(expr.args)]
        if expr.fn in env:
            ft = env[expr.fn]
            if not isinstance(ft, Func):
                raise TypeCheckError(f"{expr.fn!r} is not a function", path)
            _match_args(expr.fn, ft.params, arg_types, path)
            return ft.ret
        overloads = registry.overloads(expr.fn)
        if not overloads:
            raise UnboundSymbolError(f"unknown function {expr.fn!r}", path)
        prim = registry.resolve(expr.fn, arg_types)
        if prim is not None:
            return prim.signature.ret
        # report against the overload that matches the longest prefix
        best = max(overloads, key=lambda p: _prefix_match(p.signature.params, arg_types))
        _match_args(expr.fn, best.signature.params, arg_types, path)
        raise AssertionError("unreachable")
    if isinstance(expr, Let):
        bound_t = _check(expr.bound, env, self_sig, registry, path + (0,))
        if bound_t != expr.type:
            raise TypeCheckError(
                f"let binding {expr.name!r} declared {expr.type} but bound to {bound_t}", path + (0,)
            )
        inner = _bind(env, expr.name, expr.type, registry, path)
        return _check(expr.body, inner, self_sig, registry, path + (1,))
    if isinstance(expr, If):
        ct = _check(expr.cond, env, self_sig, registry, path + (0,))
        if ct != BOOL:
            raise TypeCheckError(f"if condition has type {ct}, expected bool", path + (0,))
        a = _check(expr.then, env, self_sig, registry, path + (1,))
        b = _check(expr.else_, env, self_sig, registry, path + (2,))
        if a != b:
            raise TypeCheckError(f"if branches disagree: {a} vs {b}", path + (2,))
        return a
    if isinstance(expr, Recur):
        if self_sig is None:
            raise TypeCheckError("recur outside of a function", path)
        arg_types = [_check(a, env, self_sig, registry, path + (i,)) for i, a in enumerate(expr.args)]
        _match_args("recur", self_sig.params, arg_types, path)
        return self_sig.ret
    if isinstance(expr, Lam):
        inner = env
        for name, t in expr.params:
            inner = _bind(inner, name, t, registry, path)
        bt = _check(expr.body, inner, expr.type, registry, path + (0,))
        if bt != expr.ret:
            raise TypeCheckError(f"lambda body has type {bt}, declared {expr.ret}", path + (0,))
        return expr.type
    raise TypeCheckError(f"not an expression: {expr!r}", path)


def _prefix_match(params, arg_types):
    n = 0
    for p, a in zip(params, arg_types):
        if p != a:
            break
        n += 1
    return (len(params) == len(arg_types), n)


def _match_args(fn, params, arg_types, path):
    if len(params) != len(arg_types):
        raise TypeCheckError(f"{fn} expects {len(params)} arguments, got {len(arg_types)}", path)
    for i, (p, a) in enumerate(zip(params, arg_types)):
        if p != a:
            raise TypeCheckError(f"argument {i + 1} of {fn} has type {a}, expected {p}", path + (i,))


def check_program(expr, param_types, ret, registry=None):
    """Typecheck a whole model: a lambda with the given signature."""
    t = typecheck(expr, (), None, registry)
    want = Func(tuple(param_types), ret)
    if t != want:
        raise TypeCheckError(f"program {render(expr)[:60]} has type {t}, expected {want}")
    return t
