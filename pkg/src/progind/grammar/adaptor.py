"""Pitman-Yor memo tables for the adapted grammar.

Each key (requested type, scope signature) holds one table per distinct
canonical expression, with its customer count.
"""

from __future__ import annotations

import json
import math

NEG_INF = float("-inf")


class DecrementMissing(KeyError):
    pass


class AdaptorState:
    """Mutable table counts: key -> {canonical expression: count}.

    A state built with ``signed=True`` holds count differences (deltas
    between two snapshots) and may carry negative entries.
    """

    def __init__(self, tables=None, signed: bool = False):
        self.signed = signed
        self._tables: dict[str, dict[str, int]] = {}
        self._sorted: dict[str, list] = {}
        for key, rows in (tables or {}).items():
            items = rows.items() if isinstance(rows, dict) else rows
            for expr, count in items:
                self._add(key, expr, count)

    # -- queries --------------------------------------------------------------

    def keys(self):
        return sorted(self._tables)

    def tables(self, key) -> list:
        """Tables at `key` as (canonical expression, count), sorted by expression."""
        rows = self._sorted.get(key)
        if rows is None:
            rows = sorted(self._tables.get(key, {}).items())
            self._sorted[key] = rows
        return rows

    def count(self, key, expr) -> int:
        return self._tables.get(key, {}).get(expr, 0)

    def total(self, key) -> int:
        return sum(self._tables.get(key, {}).values())

    def n_tables(self, key) -> int:
        return len(self._tables.get(key, ()))

    def __len__(self) -> int:
        return len(self._tables)

    def __eq__(self, other) -> bool:
        return isinstance(other, AdaptorState) and self._tables == other._tables

    def __repr__(self) -> str:
        return f"AdaptorState({self.to_json()})"

    # -- mutation ---------------------------------------------------------------

    def _add(self, key, expr, delta):
        rows = self._tables.setdefault(key, {})
        new = rows.get(expr, 0) + delta
        if new < 0 and not self.signed:
            raise ValueError(f"negative count for {expr!r} at {key!r}")
        if new == 0:
            rows.pop(expr, None)
        else:
            rows[expr] = new
        if not rows:
            del self._tables[key]
        self._sorted.pop(key, None)

    def update(self, key, expr, delta: int) -> "AdaptorState":
        """Add `delta` customers to the table for `expr` at `key`, in place."""
        if not self.signed and delta < 0 and self.count(key, expr) < -delta:
            raise DecrementMissing(f"no table for {expr!r} at {key!r} to decrement")
        self._add(key, expr, delta)
        return self

    def copy(self) -> "AdaptorState":
        out = AdaptorState(signed=self.signed)
        out._tables = {k: dict(v) for k, v in self._tables.items()}
        return out

    def delta_since(self, base: "AdaptorState") -> "AdaptorState":
        """Signed count difference self - base."""
        out = self.copy()
        out.signed = True
        for key, rows in base._tables.items():
            for expr, c in rows.items():
                out._add(key, expr, -c)
        return out

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {k: [[e, c] for e, c in self.tables(k)] for k in self.keys()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "AdaptorState":
        return cls({k: [(e, c) for e, c in rows] for k, rows in json.loads(text).items()})


def adaptor_update(adaptor: AdaptorState, key: str, expr, delta: int) -> AdaptorState:
    """Adjust a table count in place; `expr` is a canonical expression string."""
    if delta not in (1, -1):
        raise ValueError("delta must be +1 or -1")
    return adaptor.update(key, _expr_text(expr), delta)


def merge_adaptors(a: AdaptorState, b: AdaptorState) -> AdaptorState:
    """Count-wise sum; signed only if both inputs are signed."""
    out = a.copy()
    out.signed = True
    for key, rows in b._tables.items():
        for expr, c in rows.items():
            out._add(key, expr, c)
    out.signed = a.signed and b.signed
    if not out.signed:
        for rows in out._tables.values():
            if any(c < 0 for c in rows.values()):
                raise ValueError("merge produced a negative count")
    return out


def py_predictive(key: str, expr, adaptor: AdaptorState, cfg, base_logprob: float):
    """Pitman-Yor predictive split into (reuse, new-table) log-probabilities.

    With n customers over K tables at `key` and c customers at the table of
    `expr`: reuse = (c - d) / (n + alpha) when that table exists, and
    new-table = (alpha + d K) / (n + alpha) times the base probability.
    """
    alpha, discount = cfg.alpha, cfg.discount
    n = adaptor.total(key)
    if n == 0:
        return NEG_INF, base_logprob
    k = adaptor.n_tables(key)
    c = adaptor.count(key, _expr_text(expr))
    reuse = math.log((c - discount) / (n + alpha)) if c > 0 else NEG_INF
    new = math.log((alpha + discount * k) / (n + alpha)) + base_logprob
    return reuse, new


def _expr_text(expr) -> str:
    if isinstance(expr, str):
        return expr
    from ..lang.sexpr import render

    return render(expr)
