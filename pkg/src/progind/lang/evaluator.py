"""Budgeted call-by-value evaluator.

Expressions are compiled once into nested Python closures (variables become
tuple indices, overloaded primitives are resolved statically) and then run
against a step budget. Every node visit and every function unrolling costs
one step. All failures come back as an `EvalOutcome`; nothing escapes.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field

from .expr import App, ConstBool, ConstFloat, ConstInt, If, Lam, Let, Recur, Var, children, height
from .outcome import BUDGET_EXCEEDED, ErrorKind, EvalError, Failure, Ok
from .stdlib import INT_MAX, INT_MIN, Registry, standard_registry
from .typetags import BOOL, FLOAT, INT, Func

# Host frames allowed on the calling thread before a run is retried on a
# thread with a stack sized to the budget.
SAFE_FRAMES = 6000
_BYTES_PER_FRAME = 1024


class _OutOfBudget(Exception):
    pass


class _TooDeep(Exception):
    pass


class _Machine:
    __slots__ = ("steps", "rng", "depth", "depth_limit")

    def __init__(self, steps, rng, depth_limit):
        self.steps = steps
        self.rng = rng
        self.depth = 0
        self.depth_limit = depth_limit


@dataclass(eq=False)
class Closure:
    params: tuple  # ((name, TypeTag), ...)
    body: object
    env: tuple  # captured values, positional
    self_type: Func
    code: object = field(repr=False, default=None)
    names: tuple = field(repr=False, default=())  # captured names, positional
    frames_per_call: int = field(repr=False, default=8)
    may_call: bool = field(repr=False, default=True)


class Env:
    """A chain of frames mapping symbol -> (TypeTag, value)."""

    def __init__(self, bindings=None, parent: "Env | None" = None):
        self.frame = dict(bindings or {})
        self.parent = parent

    def child(self, bindings=None) -> "Env":
        return Env(bindings, self)

    def lookup(self, name):
        env = self
        while env is not None:
            if name in env.frame:
                return env.frame[name]
            env = env.parent
        raise EvalError(ErrorKind.UNBOUND_SYMBOL, name)

    def flatten(self):
        """Visible bindings, outermost first, nearest binding winning."""
        frames = []
        env = self
        while env is not None:
            frames.append(env.frame)
            env = env.parent
        merged = {}
        for frame in reversed(frames):
            for k, v in frame.items():
                merged.pop(k, None)
                merged[k] = v
        return merged

    def scope(self):
        return [(k, t) for k, (t, _) in self.flatten().items()]


def value_type(v):
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, float):
        return FLOAT
    if isinstance(v, Closure):
        return v.self_type
    raise TypeError(f"not a language value: {v!r}")


# -- compilation --------------------------------------------------------------


def _tick(m):
    if m.steps <= 0:
        raise _OutOfBudget
    m.steps -= 1


def _call(clo, args, m):
    if m.steps <= 0:
        raise _OutOfBudget
    m.steps -= 1
    m.depth += clo.frames_per_call
    if m.depth > m.depth_limit:
        raise _TooDeep
    out = clo.code(clo.env + args, clo, m)
    m.depth -= clo.frames_per_call
    return out


def _fail(kind, detail=""):
    def run(env, me, m):
        _tick(m)
        raise EvalError(kind, detail)

    return run


class _Compiler:
    def __init__(self, registry: Registry):
        self.registry = registry

    def compile(self, expr, names, types, self_sig):
        """Return (code, type) for `expr` in a positional scope."""
        if isinstance(expr, (ConstInt, ConstFloat, ConstBool)):
            v = expr.value
            if isinstance(expr, ConstInt) and not INT_MIN <= v <= INT_MAX:
                return _fail(ErrorKind.NUMERIC_OVERFLOW, str(v)), INT
            t = INT if isinstance(expr, ConstInt) else FLOAT if isinstance(expr, ConstFloat) else BOOL

            def const(env, me, m):
                if m.steps <= 0:
                    raise _OutOfBudget
                m.steps -= 1
                return v

            return const, t
        if isinstance(expr, Var):
            i = _index(names, expr.name)
            if i is None:
                return _fail(ErrorKind.UNBOUND_SYMBOL, expr.name), None

            def var(env, me, m):
                if m.steps <= 0:
                    raise _OutOfBudget
                m.steps -= 1
                return env[i]

            return var, types[i]
        if isinstance(expr, App):
            compiled = [self.compile(a, names, types, self_sig) for a in expr.args]
            codes = tuple(c for c, _ in compiled)
            arg_types = tuple(t for _, t in compiled)
            i = _index(names, expr.fn)
            if i is not None:
                ft = types[i]
                if not isinstance(ft, Func):
                    return _fail(ErrorKind.DOMAIN_ERROR, f"{expr.fn} is not a function"), None
                if len(ft.params) != len(codes):
                    return _fail(ErrorKind.ARITY_MISMATCH, expr.fn), ft.ret

                def apply_var(env, me, m):
                    _tick(m)
                    args = tuple(c(env, me, m) for c in codes)
                    return _call(env[i], args, m)

                return apply_var, ft.ret
            prims = self.registry.overloads(expr.fn)
            if not prims:
                return _fail(ErrorKind.UNBOUND_SYMBOL, expr.fn), None
            prim = self.registry.resolve(expr.fn, arg_types)
            if prim is None:
                if all(p.arity != len(codes) for p in prims):
                    return _fail(ErrorKind.ARITY_MISMATCH, expr.fn), prims[0].signature.ret
                raise TypeError(f"no overload of {expr.fn} for {arg_types}")
            impl = prim.implementation
            if len(codes) == 1:
                (a,) = codes

                def app1(env, me, m):
                    _tick(m)
                    return impl((a(env, me, m),), m.rng)

                return app1, prim.signature.ret
            if len(codes) == 2:
                a, b = codes

                def app2(env, me, m):
                    _tick(m)
                    x = a(env, me, m)
                    return impl((x, b(env, me, m)), m.rng)

                return app2, prim.signature.ret

            def app(env, me, m):
                _tick(m)
                return impl(tuple(c(env, me, m) for c in codes), m.rng)

            return app, prim.signature.ret
        if isinstance(expr, Let):
            bound, _ = self.compile(expr.bound, names, types, self_sig)
            body, t = self.compile(expr.body, names + (expr.name,), types + (expr.type,), self_sig)

            def let(env, me, m):
                _tick(m)
                return body(env + (bound(env, me, m),), me, m)

            return let, t
        if isinstance(expr, If):
            cond, _ = self.compile(expr.cond, names, types, self_sig)
            then, t = self.compile(expr.then, names, types, self_sig)
            else_, _ = self.compile(expr.else_, names, types, self_sig)

            def if_(env, me, m):
                _tick(m)
                return then(env, me, m) if cond(env, me, m) else else_(env, me, m)

            return if_, t
        if isinstance(expr, Recur):
            codes = tuple(self.compile(a, names, types, self_sig)[0] for a in expr.args)
            if self_sig is None:
                return _fail(ErrorKind.UNBOUND_SYMBOL, "recur"), None
            if len(codes) != len(self_sig.params):
                return _fail(ErrorKind.ARITY_MISMATCH, "recur"), self_sig.ret

            def recur(env, me, m):
                _tick(m)
                args = tuple(c(env, me, m) for c in codes)
                return _call(me, args, m)

            return recur, self_sig.ret
        if isinstance(expr, Lam):
            pnames = tuple(n for n, _ in expr.params)
            ptypes = tuple(t for _, t in expr.params)
            lam_t = expr.type
            body, _ = self.compile(expr.body, names + pnames, types + ptypes, lam_t)
            frames = height(expr.body) + 4
            may_call = _may_call(expr.body)

            def lam(env, me, m):
                _tick(m)
                return Closure(expr.params, expr.body, env, lam_t, body, names, frames, may_call)

            return lam, lam_t
        raise TypeError(f"not an expression: {expr!r}")


def _index(names, name):
    for i in range(len(names) - 1, -1, -1):
        if names[i] == name:
            return i
    return None


def _may_call(expr) -> bool:
    if isinstance(expr, (Recur, Lam)):
        return True
    return any(_may_call(c) for c in children(expr))


# -- running ------------------------------------------------------------------


def _run(thunk, steps, rng, depth_limit):
    m = _Machine(steps, rng, depth_limit)
    try:
        return Ok(thunk(m))
    except _OutOfBudget:
        return BUDGET_EXCEEDED
    except EvalError as e:
        return Failure(e.kind)


def _run_guarded(thunk, budget, rng, may_call, start_depth=0):
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if not may_call:
        return _run(thunk, budget, rng, sys.maxsize)
    state = rng.getstate() if rng is not None else None
    limit = sys.getrecursionlimit()
    if limit < 2 * SAFE_FRAMES:
        sys.setrecursionlimit(2 * SAFE_FRAMES)
    try:
        return _run(thunk, budget, rng, SAFE_FRAMES - start_depth)
    except (_TooDeep, RecursionError):
        pass
    finally:
        sys.setrecursionlimit(limit)
    # Too deep for this thread's stack: replay from the same rng state on a
    # thread with a stack sized for the whole budget.
    if rng is not None:
        rng.setstate(state)
    return _run_on_big_stack(thunk, budget, rng)


def _run_on_big_stack(thunk, budget, rng):
    frames = 4 * budget + 1000
    result = []

    def target():
        try:
            result.append(_run(thunk, budget, rng, sys.maxsize))
        except RecursionError:
            result.append(BUDGET_EXCEEDED)

    with _STACK_LOCK:
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, frames))
        old = threading.stack_size()
        threading.stack_size(min(frames * _BYTES_PER_FRAME + (32 << 20), 2 << 30))
        try:
            t = threading.Thread(target=target, name="progind-deep-eval")
            t.start()
        finally:
            threading.stack_size(old)
        t.join()
        sys.setrecursionlimit(limit)
    return result[0]


_STACK_LOCK = threading.Lock()


def compile_expr(expr, scope=(), self_sig=None, registry: Registry | None = None):
    names = tuple(n for n, _ in scope)
    types = tuple(t for _, t in scope)
    code, _ = _Compiler(registry or standard_registry()).compile(expr, names, types, self_sig)
    return code


def evaluate(expr, env: Env | None, rng, budget: int, self_fn: Closure | None = None, registry=None):
    """Evaluate `expr` in `env`; returns Ok, BudgetExceeded or Failure."""
    bindings = (env or Env()).flatten()
    scope = [(k, t) for k, (t, _) in bindings.items()]
    values = tuple(v for _, v in bindings.values())
    self_sig = self_fn.self_type if self_fn is not None else None
    code = compile_expr(expr, scope, self_sig, registry)
    return _run_guarded(lambda m: code(values, self_fn, m), budget, rng, _may_call(expr) or self_fn is not None)


def make_closure(lam: Lam, registry: Registry | None = None) -> Closure:
    """Close a lambda over the empty environment."""
    pnames = tuple(n for n, _ in lam.params)
    ptypes = tuple(t for _, t in lam.params)
    body, _ = _Compiler(registry or standard_registry()).compile(lam.body, pnames, ptypes, lam.type)
    return Closure(lam.params, lam.body, (), lam.type, body, (), height(lam.body) + 4, _may_call(lam.body))


def apply_model(model: Closure, inputs, rng, budget: int):
    """Apply a closure to input values in a fresh frame of its environment."""
    inputs = tuple(inputs)
    if len(inputs) != len(model.params):
        return Failure(ErrorKind.ARITY_MISMATCH)
    code, env = model.code, model.env + inputs
    return _run_guarded(lambda m: code(env, model, m), budget, rng, model.may_call)
