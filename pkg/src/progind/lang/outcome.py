"""Results of evaluating a program."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class ErrorKind(enum.Enum):
    DIV_BY_ZERO = "div-by-zero"
    DOMAIN_ERROR = "domain-error"
    UNBOUND_SYMBOL = "unbound-symbol"
    ARITY_MISMATCH = "arity-mismatch"
    NUMERIC_OVERFLOW = "numeric-overflow"


class EvalError(Exception):
    """Raised inside primitives and the evaluator; surfaced as a `Failure`."""

    def __init__(self, kind: ErrorKind, detail: str = ""):
        super().__init__(f"{kind.value}: {detail}" if detail else kind.value)
        self.kind = kind


@dataclass(frozen=True)
class Ok:
    value: object

    ok = True


@dataclass(frozen=True)
class BudgetExceeded:
    ok = False

    def __str__(self) -> str:
        return "budget-exceeded"


@dataclass(frozen=True)
class Failure:
    kind: ErrorKind

    ok = False

    def __str__(self) -> str:
        return self.kind.value


BUDGET_EXCEEDED = BudgetExceeded()

EvalOutcome = Ok | BudgetExceeded | Failure
