"""JSON output with floats written at 17 significant digits."""

from __future__ import annotations

import json
import math


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, sort_keys: bool = True, indent: int | None = None, _level: int = 0) -> str:
    """Deterministic JSON text; dict key order is sorted unless told otherwise."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ", " if indent is None else ","
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        keys = sorted(obj) if sort_keys else list(obj)
        items = [pad + json.dumps(str(k)) + ": " + dumps(obj[k], sort_keys, indent, _level + 1) for k in keys]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, sort_keys, indent, _level + 1) for v in obj]
        return "[" + sep.join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")
