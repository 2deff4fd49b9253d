"""Probabilistic program induction over a small typed Lisp."""

__version__ = "0.1.0"
