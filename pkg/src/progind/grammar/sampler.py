"""Sampling and exact scoring of expressions under the typed grammar.

A requested type in a scope expands by one of: constant, variable,
primitive application, let with a fresh variable, if, recur, or (for
function types only) lambda. With the adaptor enabled every expansion first
decides between reusing a memoized expression at its key and drawing fresh
from these productions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..lang.expr import App, ConstBool, ConstFloat, ConstInt, If, Lam, Let, Recur, Var, height, let_nesting
from ..lang.typecheck import TypeCheckError, typecheck
from ..lang.typetags import BOOL, FLOAT, INT, Func
from .adaptor import NEG_INF, AdaptorState
from .config import GrammarConfig
from .scope import Scope, canonical, canonical_metrics, fresh_name, instantiate

_CONST_NODE = {INT: ConstInt, FLOAT: ConstFloat, BOOL: ConstBool}

_KIND = {
    ConstInt: "constant",
    ConstFloat: "constant",
    ConstBool: "constant",
    Var: "variable",
    App: "application",
    Let: "let",
    If: "if",
    Recur: "recur",
    Lam: "lambda",
}


class Unsatisfiable(Exception):
    """No production can expand the requested type in this context."""

    def __init__(self, key: str):
        super().__init__(f"no applicable production for {key}")
        self.key = key


@dataclass(frozen=True)
class Choice:
    site: tuple
    kind: str
    logp: float


@dataclass
class GenTrace:
    """One record per generated node, in pre-order."""

    choices: list = field(default_factory=list)

    @property
    def logp(self) -> float:
        return math.fsum(c.logp for c in self.choices)

    def __len__(self) -> int:
        return len(self.choices)

    def splice(self, path: tuple, sub: "GenTrace") -> "GenTrace":
        """Replace the records under `path` by `sub`, whose sites are relative."""
        n = len(path)
        kept = [c for c in self.choices if c.site[:n] != path]
        new = [Choice(path + c.site, c.kind, c.logp) for c in sub.choices]
        return GenTrace(sorted(kept + new, key=lambda c: c.site))


@dataclass(frozen=True)
class Site:
    path: tuple
    expr: object
    req: object
    scope: Scope
    depth: int
    nesting: int


# -- production tables ----------------------------------------------------------


def app_candidates(req, scope: Scope, cfg: GrammarConfig):
    key = ("app", req, scope.names, scope.types)
    hit = cfg.memo.get(key)
    if hit is None:
        prims = [("prim", p) for p in cfg.registry.returning(req)]
        hit = cfg.memo[key] = prims + [("var", n) for n in scope.functions_returning(req)]
    return hit


def let_types(depth: int, cfg: GrammarConfig):
    key = ("let", depth)
    hit = cfg.memo.get(key)
    if hit is None:
        hit = cfg.memo[key] = _let_types(depth, cfg)
    return hit


def _let_types(depth: int, cfg: GrammarConfig):
    out = []
    for t in cfg.let_types:
        if isinstance(t, Func) and (depth + 2 > cfg.max_depth or cfg.weight("lambda", t) <= 0):
            continue
        out.append(t)
    return out


def applicable(req, scope: Scope, depth: int, nesting: int, cfg: GrammarConfig):
    """Productions with positive effective weight, as (name, weight)."""
    key = ("prods", req, scope.names, scope.types, scope.self_sig, depth, nesting)
    hit = cfg.memo.get(key)
    if hit is None:
        hit = cfg.memo[key] = _applicable(req, scope, depth, nesting, cfg)
    return hit


def _applicable(req, scope: Scope, depth: int, nesting: int, cfg: GrammarConfig):
    out = []

    def add(p):
        w = cfg.weight(p, req)
        if w > 0:
            out.append((p, w))

    has_var = any(t == req for t in scope.types)
    if isinstance(req, Func):
        if has_var:
            add("variable")
        if depth < cfg.max_depth:
            add("lambda")
        return out
    if cfg.pool(req):
        add("constant")
    if has_var:
        add("variable")
    if depth < cfg.max_depth:
        if app_candidates(req, scope, cfg):
            add("application")
        if nesting < cfg.max_let_nesting and let_types(depth, cfg):
            add("let")
        add("if")
        if scope.self_sig is not None and scope.self_sig.ret == req:
            add("recur")
    return out


def _fits(text_or_expr, depth, nesting, cfg) -> bool:
    if isinstance(text_or_expr, str):
        h, n = canonical_metrics(text_or_expr)
    else:
        h, n = height(text_or_expr), let_nesting(text_or_expr)
    return h <= cfg.max_depth - depth and n <= cfg.max_let_nesting - nesting


def _reuse_table(key, adaptor: AdaptorState, cfg: GrammarConfig, depth, nesting):
    """Reuse masses for admissible tables plus the new-table mass.

    Tables whose expression would break the depth or let-nesting bound here
    are excluded and the remaining masses renormalized.
    """
    rows = adaptor.tables(key)
    if not rows:
        return [], 1.0
    n = sum(c for _, c in rows)
    denom = n + cfg.alpha
    d = cfg.discount
    reuse = [(e, (c - d) / denom) for e, c in rows if _fits(e, depth, nesting, cfg)]
    new = (cfg.alpha + d * len(rows)) / denom
    z = new + sum(w for _, w in reuse)
    return [(e, w / z) for e, w in reuse], new / z


# -- sampling -------------------------------------------------------------------


class _Sampler:
    def __init__(self, cfg, adaptor, rng):
        self.cfg = cfg
        self.adaptor = adaptor
        self.rng = rng
        self.choices = []

    def pick(self, n):
        return self.rng.randrange(n)

    def sample(self, req, scope: Scope, depth, nesting, path):
        cfg = self.cfg
        lp = 0.0
        if cfg.adaptor_enabled:
            reuse, new = _reuse_table(scope.key(req), self.adaptor, cfg, depth, nesting)
            if reuse:
                u = self.rng.random()
                for text, w in reuse:
                    if u < w:
                        self.choices.append(Choice(path, "reuse", math.log(w)))
                        return instantiate(text, scope)
                    u -= w
            lp = math.log(new)
        prods = applicable(req, scope, depth, nesting, cfg)
        if not prods:
            raise Unsatisfiable(scope.key(req))
        total = sum(w for _, w in prods)
        u = self.rng.random() * total
        for prod, w in prods:
            if u < w:
                break
            u -= w
        lp += math.log(w / total)
        record = len(self.choices)
        self.choices.append(None)

        if prod == "constant":
            pool = cfg.pool(req)
            value = pool[self.pick(len(pool))]
            lp -= math.log(len(pool))
            out = _CONST_NODE[req](value)
        elif prod == "variable":
            names = scope.vars_of(req)
            lp -= math.log(len(names))
            out = Var(names[self.pick(len(names))])
        elif prod == "application":
            cands = app_candidates(req, scope, cfg)
            lp -= math.log(len(cands))
            kind, what = cands[self.pick(len(cands))]
            if kind == "prim":
                fn, params = what.name, what.signature.params
            else:
                fn, params = what, scope.type_of(what).params
            args = tuple(self.sample(t, scope, depth + 1, nesting, path + (i,)) for i, t in enumerate(params))
            out = App(fn, args)
        elif prod == "let":
            types = let_types(depth, cfg)
            lp -= math.log(len(types))
            t = types[self.pick(len(types))]
            name = fresh_name(scope.names)
            bound = self.sample(t, scope, depth + 1, nesting + 1, path + (0,))
            body = self.sample(req, scope.extend(name, t), depth + 1, nesting + 1, path + (1,))
            out = Let(name, t, bound, body)
        elif prod == "if":
            cond = self.sample(BOOL, scope, depth + 1, nesting, path + (0,))
            then = self.sample(req, scope, depth + 1, nesting, path + (1,))
            else_ = self.sample(req, scope, depth + 1, nesting, path + (2,))
            out = If(cond, then, else_)
        elif prod == "recur":
            params = scope.self_sig.params
            out = Recur(tuple(self.sample(t, scope, depth + 1, nesting, path + (i,)) for i, t in enumerate(params)))
        else:  # lambda
            inner = scope.with_self(req)
            params = []
            for t in req.params:
                name = fresh_name(inner.names)
                params.append((name, t))
                inner = inner.extend(name, t)
            out = Lam(tuple(params), req.ret, self.sample(req.ret, inner, depth + 1, nesting, path + (0,)))
        self.choices[record] = Choice(path, prod, lp)
        return out


def sample_expr(req, scope: Scope, cfg: GrammarConfig, adaptor: AdaptorState, rng, depth: int = 0, nesting: int = 0):
    """Draw an expression of type `req`; returns (expr, GenTrace).

    The adaptor is read, never written; commit with `commit_derivation`.
    Raises Unsatisfiable when some expansion has no applicable production.
    """
    if depth > cfg.max_depth:
        raise ValueError("depth exceeds max_depth")
    s = _Sampler(cfg, adaptor, rng)
    expr = s.sample(req, scope, depth, nesting, ())
    return expr, GenTrace(s.choices)


# -- scoring --------------------------------------------------------------------


class _Scorer:
    def __init__(self, cfg, adaptor):
        self.cfg = cfg
        self.adaptor = adaptor

    def score(self, expr, req, scope: Scope, depth, nesting) -> float:
        cfg = self.cfg
        base = self.base(expr, req, scope, depth, nesting)
        if not cfg.adaptor_enabled:
            return base
        key = scope.key(req)
        if not self.adaptor.tables(key):
            return base
        reuse, new = _reuse_table(key, self.adaptor, cfg, depth, nesting)
        text = canonical(expr, scope.names)
        w = next((w for e, w in reuse if e == text), 0.0)
        parts = [math.log(new) + base]
        if w > 0:
            parts.append(math.log(w))
        return _logsumexp(parts)

    def base(self, expr, req, scope: Scope, depth, nesting) -> float:
        cfg = self.cfg
        kind = _KIND.get(type(expr))
        prods = applicable(req, scope, depth, nesting, cfg)
        weights = dict(prods)
        if kind not in weights:
            return NEG_INF
        lp = math.log(weights[kind] / sum(weights.values()))

        if kind == "constant":
            if _CONST_NODE.get(req) is not type(expr):
                return NEG_INF
            pool = cfg.pool(req)
            hits = sum(1 for v in pool if v == expr.value and type(v) is type(expr.value))
            return lp + math.log(hits / len(pool)) if hits else NEG_INF
        if kind == "variable":
            names = scope.vars_of(req)
            return lp - math.log(len(names)) if expr.name in names else NEG_INF
        if kind == "application":
            params = self._app_params(expr, req, scope)
            if params is None:
                return NEG_INF
            lp -= math.log(len(app_candidates(req, scope, cfg)))
            for a, t in zip(expr.args, params):
                lp += self.score(a, t, scope, depth + 1, nesting)
            return lp
        if kind == "let":
            types = let_types(depth, cfg)
            if expr.type not in types or not self._fresh(expr.name, scope):
                return NEG_INF
            lp -= math.log(len(types))
            lp += self.score(expr.bound, expr.type, scope, depth + 1, nesting + 1)
            return lp + self.score(expr.body, req, scope.extend(expr.name, expr.type), depth + 1, nesting + 1)
        if kind == "if":
            lp += self.score(expr.cond, BOOL, scope, depth + 1, nesting)
            lp += self.score(expr.then, req, scope, depth + 1, nesting)
            return lp + self.score(expr.else_, req, scope, depth + 1, nesting)
        if kind == "recur":
            params = scope.self_sig.params
            if len(params) != len(expr.args):
                return NEG_INF
            for a, t in zip(expr.args, params):
                lp += self.score(a, t, scope, depth + 1, nesting)
            return lp
        # lambda
        if expr.type != req:
            return NEG_INF
        inner = scope.with_self(req)
        for name, t in expr.params:
            if not self._fresh(name, inner):
                return NEG_INF
            inner = inner.extend(name, t)
        return lp + self.score(expr.body, req.ret, inner, depth + 1, nesting)

    def _fresh(self, name, scope) -> bool:
        return name not in scope.names and name not in self.cfg.registry

    def _app_params(self, expr, req, scope):
        if expr.fn in scope.names:
            ft = scope.type_of(expr.fn)
            if not isinstance(ft, Func) or ft.ret != req or len(ft.params) != len(expr.args):
                return None
            return ft.params
        return _prim_params(expr, req, scope, self.cfg)


def _prim_params(expr, req, scope, cfg):
    if expr.fn not in cfg.registry:
        return None
    try:
        arg_types = [typecheck(a, scope.pairs(), scope.self_sig, cfg.registry) for a in expr.args]
    except TypeCheckError:
        return None
    prim = cfg.registry.resolve(expr.fn, arg_types)
    if prim is None or prim.signature.ret != req:
        return None
    return prim.signature.params


def _logsumexp(xs):
    m = max(xs)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(math.fsum(math.exp(x - m) for x in xs))


def score_expr(expr, req, scope: Scope, cfg: GrammarConfig, adaptor: AdaptorState, depth: int = 0, nesting: int = 0) -> float:
    """Exact log-probability that `sample_expr` returns `expr`.

    Returns -inf for expressions the grammar cannot derive here (unknown
    symbols, constants outside the pools, depth or nesting violations).
    """
    return _Scorer(cfg, adaptor).score(expr, req, scope, depth, nesting)


# -- derivation walking ---------------------------------------------------------


def iter_sites(expr, req, scope: Scope, cfg: GrammarConfig, depth: int = 0, nesting: int = 0, path=()):
    """Every node with its grammar context, in pre-order."""
    yield Site(path, expr, req, scope, depth, nesting)
    if isinstance(expr, App):
        if expr.fn in scope.names:
            params = scope.type_of(expr.fn).params
        else:
            params = _prim_params(expr, req, scope, cfg)
            if params is None:
                raise TypeCheckError(f"cannot resolve application of {expr.fn}", path)
        for i, (a, t) in enumerate(zip(expr.args, params)):
            yield from iter_sites(a, t, scope, cfg, depth + 1, nesting, path + (i,))
    elif isinstance(expr, Let):
        yield from iter_sites(expr.bound, expr.type, scope, cfg, depth + 1, nesting + 1, path + (0,))
        yield from iter_sites(
            expr.body, req, scope.extend(expr.name, expr.type), cfg, depth + 1, nesting + 1, path + (1,)
        )
    elif isinstance(expr, If):
        yield from iter_sites(expr.cond, BOOL, scope, cfg, depth + 1, nesting, path + (0,))
        yield from iter_sites(expr.then, req, scope, cfg, depth + 1, nesting, path + (1,))
        yield from iter_sites(expr.else_, req, scope, cfg, depth + 1, nesting, path + (2,))
    elif isinstance(expr, Recur):
        for i, (a, t) in enumerate(zip(expr.args, scope.self_sig.params)):
            yield from iter_sites(a, t, scope, cfg, depth + 1, nesting, path + (i,))
    elif isinstance(expr, Lam):
        inner = scope.with_self(expr.type)
        for name, t in expr.params:
            inner = inner.extend(name, t)
        yield from iter_sites(expr.body, expr.ret, inner, cfg, depth + 1, nesting, path + (0,))


def derivation(expr, req, scope: Scope, cfg: GrammarConfig, depth: int = 0, nesting: int = 0):
    """(adaptor key, canonical expression) for every node of `expr`."""
    return [
        (s.scope.key(s.req), canonical(s.expr, s.scope.names))
        for s in iter_sites(expr, req, scope, cfg, depth, nesting)
    ]


def commit_derivation(adaptor: AdaptorState, expr, req, scope: Scope, cfg: GrammarConfig, delta: int = 1):
    """Add (or with delta=-1 remove) one customer per node of `expr`."""
    for key, text in derivation(expr, req, scope, cfg):
        adaptor.update(key, text, delta)
    return adaptor
