"""Variables, expressions and relations; the relation DSL."""

from .dsl import parse_expr, parse_library, tokenize
from .errors import (
    DomainError,
    DslSyntaxError,
    DuplicateAssign,
    DuplicateDeclaration,
    MissingBinding,
    RelationError,
    SelfReference,
    UndeclaredVariable,
)
from .expr import BinOp, Call, Expr, Neg, Num, Var, eval_expr, format_expr, operator_count, variables
from .library import (
    ASSIGN,
    LOWER,
    UPPER,
    ConstraintOutcome,
    Relation,
    RelationLibrary,
    VariableDef,
    check_relation,
    format_library,
    log_margin,
)


def load_default_library() -> RelationLibrary:
    """The shipped SAR ADC relation set."""
    from importlib.resources import files

    return parse_library(files("adcsizer.data").joinpath("sar_adc.rel").read_text())


__all__ = [
    "ASSIGN", "LOWER", "UPPER",
    "BinOp", "Call", "ConstraintOutcome", "DomainError", "DslSyntaxError", "DuplicateAssign",
    "DuplicateDeclaration", "Expr", "MissingBinding", "Neg", "Num", "Relation", "RelationError",
    "RelationLibrary", "SelfReference", "UndeclaredVariable", "Var", "VariableDef",
    "check_relation", "eval_expr", "format_expr", "format_library", "load_default_library",
    "log_margin", "operator_count", "parse_expr", "parse_library", "tokenize", "variables",
]
