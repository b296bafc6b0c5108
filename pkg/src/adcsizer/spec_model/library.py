"""Variables, relations and the validated relation library."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Mapping

from .errors import (
    DomainError,
    DuplicateAssign,
    DuplicateDeclaration,
    SelfReference,
    UndeclaredVariable,
)
from .expr import Expr, Var, eval_expr, format_expr, format_number, variables

KINDS = ("constant", "system_spec", "empirical", "derived", "measured")

ASSIGN = "assign"
LOWER = "lower_bound"
UPPER = "upper_bound"

OPERATORS = {ASSIGN: "=", LOWER: ">=", UPPER: "<="}

ASSIGN_RTOL = 1e-9


@dataclass(frozen=True)
class VariableDef:
    name: str
    kind: str
    lower: float | None = None
    upper: float | None = None
    value: float | None = None
    unit: str = ""
    line: int | None = field(default=None, compare=False)

    @property
    def bounded(self) -> bool:
        return self.lower is not None and self.upper is not None


@dataclass(frozen=True)
class Relation:
    lhs: str
    kind: str
    rhs: Expr
    tag: str = ""
    line: int | None = field(default=None, compare=False)

    @property
    def is_bound(self) -> bool:
        return self.kind != ASSIGN

    @property
    def rhs_variables(self) -> list[str]:
        return variables(self.rhs)

    def __str__(self) -> str:
        return f"{self.lhs} {OPERATORS[self.kind]} {format_expr(self.rhs)}"


@dataclass(frozen=True)
class ConstraintOutcome:
    satisfied: bool
    signed_log_margin: float
    lhs_value: float = math.nan
    rhs_value: float = math.nan


@dataclass(frozen=True)
class RelationLibrary:
    variables: dict[str, VariableDef]
    relations: tuple[Relation, ...]

    def __post_init__(self) -> None:
        assigned: set[str] = set()
        for rel in self.relations:
            if rel.lhs not in self.variables:
                raise UndeclaredVariable(rel.lhs, rel.line)
            for name in rel.rhs_variables:
                if name not in self.variables:
                    raise UndeclaredVariable(name, rel.line)
            if rel.lhs in rel.rhs_variables:
                raise SelfReference(rel.lhs)
            if rel.kind == ASSIGN:
                if rel.lhs in assigned:
                    raise DuplicateAssign(rel.lhs)
                assigned.add(rel.lhs)

    @classmethod
    def build(cls, variables: list[VariableDef], relations: list[Relation]) -> "RelationLibrary":
        table: dict[str, VariableDef] = {}
        for v in variables:
            if v.name in table:
                raise DuplicateDeclaration(v.name, v.line)
            table[v.name] = v
        return cls(table, tuple(relations))

    def assign_for(self, name: str) -> Relation | None:
        for rel in self.relations:
            if rel.kind == ASSIGN and rel.lhs == name:
                return rel
        return None

    def bounds_for(self, name: str) -> list[Relation]:
        return [r for r in self.relations if r.is_bound and r.lhs == name]

    def by_tag(self, tag: str) -> Relation:
        for rel in self.relations:
            if rel.tag == tag:
                return rel
        raise KeyError(tag)

    def defaults(self) -> dict[str, float]:
        """Fixed values declared in the library (constants and fixed specs)."""
        return {n: v.value for n, v in self.variables.items() if v.value is not None}

    def to_text(self) -> str:
        return format_library(self)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def _log10_positive(x: float, what: str) -> float:
    if not x > 0.0:
        raise DomainError(f"{what} must be strictly positive for a log margin, got {x!r}")
    return math.log10(x)


def log_margin(value: float, bound: float, kind: str) -> float:
    """Signed decade margin of ``value`` against ``bound``; positive means slack."""
    lv = _log10_positive(value, "compared value")
    lb = _log10_positive(bound, "bound")
    if kind == LOWER:
        return lv - lb
    if kind == UPPER:
        return lb - lv
    raise ValueError(f"not a bound kind: {kind!r}")


def check_relation(rel: Relation, binding: Mapping[str, float]) -> ConstraintOutcome:
    """Check one relation on a full binding.

    Bounds report ``log10`` margins and need both sides strictly positive.
    Assign relations are satisfied within a relative error of 1e-9 and report
    a margin of zero when they are.
    """
    lhs = eval_expr(Var(rel.lhs), binding)
    rhs = eval_expr(rel.rhs, binding)
    if rel.kind == ASSIGN:
        scale = max(abs(lhs), abs(rhs))
        err = 0.0 if scale == 0.0 else abs(lhs - rhs) / scale
        if err <= ASSIGN_RTOL:
            return ConstraintOutcome(True, 0.0, lhs, rhs)
        margin = -abs(math.log10(abs(lhs) / abs(rhs))) if lhs and rhs else -math.inf
        return ConstraintOutcome(False, margin, lhs, rhs)
    margin = log_margin(lhs, rhs, rel.kind)
    return ConstraintOutcome(margin >= 0.0, margin, lhs, rhs)


def format_variable(v: VariableDef) -> str:
    out = f"var {v.name} : {v.kind}"
    if v.bounded:
        out += f" in [{format_number(v.lower)}, {format_number(v.upper)}]"
    if v.value is not None:
        out += f" = {format_number(v.value)}"
    if v.unit:
        out += f' unit "{v.unit}"'
    return out


def format_relation(rel: Relation) -> str:
    out = str(rel)
    if rel.tag:
        out += f" @ {rel.tag}"
    return out


def format_library(lib: RelationLibrary) -> str:
    lines = [format_variable(v) for v in lib.variables.values()]
    lines.extend(format_relation(r) for r in lib.relations)
    return "\n".join(lines) + "\n"
