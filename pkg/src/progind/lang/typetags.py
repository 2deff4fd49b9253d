"""Types of the induced-program language."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Base:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Func:
    params: tuple
    ret: "TypeTag"

    def __str__(self) -> str:
        return f"(-> ({' '.join(str(p) for p in self.params)}) {self.ret})"


TypeTag = Base | Func

INT = Base("int")
FLOAT = Base("float")
BOOL = Base("bool")

BASE_TYPES = {"int": INT, "float": FLOAT, "bool": BOOL}


def func(params, ret) -> Func:
    return Func(tuple(params), ret)


def is_func(t) -> bool:
    return isinstance(t, Func)
