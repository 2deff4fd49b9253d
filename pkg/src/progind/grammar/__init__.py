"""Typed stochastic grammar with Pitman-Yor adapted expansions."""

from .adaptor import AdaptorState, DecrementMissing, adaptor_update, merge_adaptors, py_predictive
from .config import DEFAULT_WEIGHTS, PRODUCTIONS, GrammarConfig
from .sampler import (
    Choice,
    GenTrace,
    Site,
    Unsatisfiable,
    applicable,
    commit_derivation,
    derivation,
    iter_sites,
    sample_expr,
    score_expr,
)
from .scope import Scope, ScopeSignature, adaptor_key, canonical, fresh_name, instantiate

__all__ = [
    "AdaptorState", "Choice", "DEFAULT_WEIGHTS", "DecrementMissing", "GenTrace", "GrammarConfig",
    "PRODUCTIONS", "Scope", "ScopeSignature", "Site", "Unsatisfiable", "adaptor_key", "adaptor_update",
    "applicable", "canonical", "commit_derivation", "derivation", "fresh_name", "instantiate",
    "iter_sites", "merge_adaptors", "py_predictive", "sample_expr", "score_expr",
]
