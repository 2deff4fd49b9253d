"""Primitive functions available to induced programs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .outcome import EvalError, ErrorKind, Failure, Ok
from .typetags import BOOL, FLOAT, INT, Func

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


@dataclass(frozen=True)
class PrimitiveDef:
    name: str
    signature: Func
    deterministic: bool
    implementation: Callable  # (args: tuple, rng) -> value, raises EvalError

    @property
    def arity(self) -> int:
        return len(self.signature.params)

    def __call__(self, args, rng=None):
        """Apply to host values, reporting failures as an outcome."""
        if len(args) != self.arity:
            return Failure(ErrorKind.ARITY_MISMATCH)
        try:
            return Ok(self.implementation(tuple(args), rng))
        except EvalError as e:
            return Failure(e.kind)


def check_int(x: int) -> int:
    if x < INT_MIN or x > INT_MAX:
        raise EvalError(ErrorKind.NUMERIC_OVERFLOW, str(x))
    return x


def check_float(x: float) -> float:
    if math.isnan(x) or math.isinf(x):
        raise EvalError(ErrorKind.NUMERIC_OVERFLOW, repr(x))
    return x


def _int_div(a, b):
    if b == 0:
        raise EvalError(ErrorKind.DIV_BY_ZERO)
    return check_int(a // b)


def _int_mod(a, b):
    if b == 0:
        raise EvalError(ErrorKind.DIV_BY_ZERO)
    return a % b


def _float_div(a, b):
    if b == 0.0:
        raise EvalError(ErrorKind.DIV_BY_ZERO)
    return check_float(a / b)


def _exp(x):
    try:
        return check_float(math.exp(x))
    except OverflowError:
        raise EvalError(ErrorKind.NUMERIC_OVERFLOW, f"exp({x!r})") from None


def _log(x):
    if x <= 0.0:
        raise EvalError(ErrorKind.DOMAIN_ERROR, f"log({x!r})")
    return math.log(x)


def _floor(x):
    return check_int(math.floor(x))


def _flip(p, rng):
    if not 0.0 <= p <= 1.0:
        raise EvalError(ErrorKind.DOMAIN_ERROR, f"flip({p!r})")
    return rng.random() < p


def _uniform_continuous(a, b, rng):
    if a > b:
        raise EvalError(ErrorKind.DOMAIN_ERROR, f"uniform-continuous({a!r}, {b!r})")
    return check_float(a + (b - a) * rng.random())


def _uniform_int(a, b, rng):
    if a > b:
        raise EvalError(ErrorKind.DOMAIN_ERROR, f"uniform-int({a}, {b})")
    return rng.randint(a, b)


def _gaussian(m, s, rng):
    if s < 0.0:
        raise EvalError(ErrorKind.DOMAIN_ERROR, f"gaussian sd {s!r}")
    return check_float(rng.gauss(m, s)) if s > 0.0 else m


def _det(name, params, ret, fn):
    return PrimitiveDef(name, Func(tuple(params), ret), True, lambda args, rng: fn(*args))


def _stoch(name, params, ret, fn):
    return PrimitiveDef(name, Func(tuple(params), ret), False, lambda args, rng: fn(*args, rng))


def standard_library() -> list[PrimitiveDef]:
    I, F, B = INT, FLOAT, BOOL
    return [
        _det("+", (I, I), I, lambda a, b: check_int(a + b)),
        _det("-", (I, I), I, lambda a, b: check_int(a - b)),
        _det("*", (I, I), I, lambda a, b: check_int(a * b)),
        _det("safe-div", (I, I), I, _int_div),
        _det("mod", (I, I), I, _int_mod),
        _det("abs", (I,), I, lambda a: check_int(abs(a))),
        _det("min", (I, I), I, min),
        _det("max", (I, I), I, max),
        _det("+", (F, F), F, lambda a, b: check_float(a + b)),
        _det("-", (F, F), F, lambda a, b: check_float(a - b)),
        _det("*", (F, F), F, lambda a, b: check_float(a * b)),
        _det("safe-div", (F, F), F, _float_div),
        _det("abs", (F,), F, abs),
        _det("min", (F, F), F, min),
        _det("max", (F, F), F, max),
        _det("exp", (F,), F, _exp),
        _det("log", (F,), F, _log),
        _det("floor", (F,), I, _floor),
        _det("to-float", (I,), F, float),
        _det("<", (I, I), B, lambda a, b: a < b),
        _det("<=", (I, I), B, lambda a, b: a <= b),
        _det("=", (I, I), B, lambda a, b: a == b),
        _det("<", (F, F), B, lambda a, b: a < b),
        _det("<=", (F, F), B, lambda a, b: a <= b),
        _det("=", (F, F), B, lambda a, b: a == b),
        _det("and", (B, B), B, lambda a, b: a and b),
        _det("or", (B, B), B, lambda a, b: a or b),
        _det("not", (B,), B, lambda a: not a),
        _stoch("flip", (F,), B, _flip),
        _stoch("uniform-continuous", (F, F), F, _uniform_continuous),
        _stoch("uniform-int", (I, I), I, _uniform_int),
        _stoch("gaussian", (F, F), F, _gaussian),
    ]


class Registry:
    """Primitives indexed by name; a name may carry several typed overloads."""

    def __init__(self, prims):
        self.prims = list(prims)
        self.by_name: dict[str, list[PrimitiveDef]] = {}
        for p in self.prims:
            self.by_name.setdefault(p.name, []).append(p)
        self._returning = {}

    def __contains__(self, name) -> bool:
        return name in self.by_name

    def __iter__(self):
        return iter(self.prims)

    def __len__(self) -> int:
        return len(self.prims)

    def overloads(self, name) -> list[PrimitiveDef]:
        return self.by_name.get(name, [])

    def resolve(self, name, arg_types):
        for p in self.by_name.get(name, ()):
            if p.signature.params == tuple(arg_types):
                return p
        return None

    def returning(self, ret) -> list[PrimitiveDef]:
        hit = self._returning.get(ret)
        if hit is None:
            hit = self._returning[ret] = tuple(p for p in self.prims if p.signature.ret == ret)
        return list(hit)

    def restrict(self, names) -> "Registry":
        names = set(names)
        unknown = names - set(self.by_name)
        if unknown:
            raise KeyError(f"unknown primitives: {sorted(unknown)}")
        return Registry(p for p in self.prims if p.name in names)

    def is_stochastic(self, name) -> bool:
        return any(not p.deterministic for p in self.by_name.get(name, ()))


_STANDARD = None


def standard_registry() -> Registry:
    global _STANDARD
    if _STANDARD is None:
        _STANDARD = Registry(standard_library())
    return _STANDARD
