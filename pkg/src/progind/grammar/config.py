"""Grammar settings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..lang.stdlib import Registry, standard_registry
from ..lang.typetags import BOOL, FLOAT, INT, Func, func

PRODUCTIONS = ("constant", "variable", "application", "let", "if", "recur", "lambda")
TERMINAL_PRODUCTIONS = ("constant", "variable")

DEFAULT_WEIGHTS = {
    "constant": 3.0,
    "variable": 3.0,
    "application": 2.0,
    "let": 1.0,
    "if": 1.0,
    "recur": 0.5,
    "lambda": 1.0,
}


def default_constants():
    return {
        INT: (0, 1, 2),
        FLOAT: (0.0, 0.5, 1.0, 2.0, math.pi, math.e),
        BOOL: (True, False),
    }


def default_let_types():
    return (INT, FLOAT, BOOL, func([INT], INT), func([FLOAT], FLOAT))


@dataclass
class GrammarConfig:
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    type_weights: dict = field(default_factory=dict)  # TypeTag -> {production: weight}
    constants: dict = field(default_factory=default_constants)
    max_depth: int = 5
    max_let_nesting: int = 2
    adaptor_enabled: bool = True
    alpha: float = 1.0
    discount: float = 0.1
    registry: Registry = field(default_factory=standard_registry)
    let_types: tuple = field(default_factory=default_let_types)
    # Derived production tables; the config is treated as read-only once built.
    memo: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        for name, w in list(self.weights.items()) + [
            (k, w) for per in self.type_weights.values() for k, w in per.items()
        ]:
            if name not in PRODUCTIONS:
                raise ValueError(f"unknown production {name!r}")
            if w < 0 or not math.isfinite(w):
                raise ValueError(f"production weight for {name!r} must be finite and >= 0")
        for p in PRODUCTIONS:
            self.weights.setdefault(p, 0.0)
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.max_let_nesting < 0:
            raise ValueError("max_let_nesting must be >= 0")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if not self.alpha > -self.discount:
            raise ValueError("alpha must exceed -discount")
        for t, pool in self.constants.items():
            if isinstance(t, Func):
                raise ValueError("constant pools hold base types only")
            self.constants[t] = tuple(pool)
        self.let_types = tuple(self.let_types)

    def weight(self, production: str, req) -> float:
        per = self.type_weights.get(req)
        if per is not None and production in per:
            return per[production]
        return self.weights.get(production, 0.0)

    def pool(self, t) -> tuple:
        return self.constants.get(t, ())

    def replace(self, **changes) -> "GrammarConfig":
        from dataclasses import replace

        return replace(self, **changes)
