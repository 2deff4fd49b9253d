"""The induced-program language: types, syntax, typing and evaluation."""

from .evaluator import Closure, Env, apply_model, compile_expr, evaluate, make_closure, value_type
from .expr import App, ConstBool, ConstFloat, ConstInt, Expr, If, Lam, Let, Recur, Var
from .outcome import BUDGET_EXCEEDED, BudgetExceeded, ErrorKind, EvalError, EvalOutcome, Failure, Ok
from .sexpr import ParseError, format_float, parse, parse_type, render
from .stdlib import PrimitiveDef, Registry, standard_library, standard_registry
from .typecheck import TypeCheckError, UnboundSymbolError, check_program, typecheck
from .typetags import BOOL, FLOAT, INT, Base, Func, TypeTag, func

__all__ = [
    "App", "BOOL", "BUDGET_EXCEEDED", "Base", "BudgetExceeded", "Closure", "ConstBool", "ConstFloat",
    "ConstInt", "Env", "ErrorKind", "EvalError", "EvalOutcome", "Expr", "FLOAT", "Failure", "Func",
    "INT", "If", "Lam", "Let", "Ok", "ParseError", "PrimitiveDef", "Recur", "Registry",
    "TypeCheckError", "TypeTag", "UnboundSymbolError", "Var", "apply_model", "check_program",
    "compile_expr", "evaluate", "format_float", "func", "make_closure", "parse", "parse_type",
    "render", "standard_library", "standard_registry", "typecheck", "value_type",
]
