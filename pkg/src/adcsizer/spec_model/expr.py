"""Expression trees for the relation DSL and their evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Union

from .errors import DomainError, MissingBinding


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]


def _log_guard(name: str, fn: Callable[[float], float]) -> Callable[[float], float]:
    def wrapped(x: float) -> float:
        if x <= 0.0:
            raise DomainError(f"{name} of non-positive argument {x!r}")
        return fn(x)

    return wrapped


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise DomainError(f"sqrt of negative argument {x!r}")
    return math.sqrt(x)


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError as exc:
        raise DomainError(f"exp overflow for argument {x!r}") from exc


# name -> (min arity, max arity or None, implementation)
FUNCTIONS: dict[str, tuple[int, int | None, Callable[..., float]]] = {
    "ln": (1, 1, _log_guard("ln", math.log)),
    "log10": (1, 1, _log_guard("log10", math.log10)),
    "log2": (1, 1, _log_guard("log2", math.log2)),
    "sqrt": (1, 1, _sqrt),
    "exp": (1, 1, _exp),
    "abs": (1, 1, abs),
    "max": (1, None, max),
    "min": (1, None, min),
}


def _binop(op: str, a: float, b: float) -> float:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0.0:
            raise DomainError("division by zero")
        return a / b
    if op == "^":
        if a == 0.0 and b < 0.0:
            raise DomainError("zero raised to a negative power")
        if a < 0.0 and not float(b).is_integer():
            raise DomainError(f"negative base {a!r} with non-integer exponent {b!r}")
        try:
            return math.pow(a, b)
        except OverflowError as exc:
            raise DomainError(f"overflow in {a!r}^{b!r}") from exc
    raise ValueError(f"unknown operator {op!r}")


def eval_expr(e: Expr, binding: Mapping[str, float]) -> float:
    """Evaluate ``e`` in double precision against ``binding``.

    Raises :class:`MissingBinding` for an unbound variable and
    :class:`DomainError` for division by zero or a log/sqrt outside its domain.
    """
    if isinstance(e, Num):
        return float(e.value)
    if isinstance(e, Var):
        try:
            return float(binding[e.name])
        except KeyError:
            raise MissingBinding(e.name) from None
    if isinstance(e, Neg):
        return -eval_expr(e.operand, binding)
    if isinstance(e, BinOp):
        return _binop(e.op, eval_expr(e.left, binding), eval_expr(e.right, binding))
    if isinstance(e, Call):
        _, _, fn = FUNCTIONS[e.func]
        return float(fn(*(eval_expr(a, binding) for a in e.args)))
    raise TypeError(f"not an expression node: {e!r}")


def iter_nodes(e: Expr) -> Iterator[Expr]:
    """Pre-order walk over every node of the tree."""
    yield e
    if isinstance(e, Neg):
        yield from iter_nodes(e.operand)
    elif isinstance(e, BinOp):
        yield from iter_nodes(e.left)
        yield from iter_nodes(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from iter_nodes(a)


def variables(e: Expr) -> list[str]:
    """Variable names referenced by ``e`` in first-appearance order."""
    seen: dict[str, None] = {}
    for node in iter_nodes(e):
        if isinstance(node, Var):
            seen.setdefault(node.name, None)
    return list(seen)


def operator_count(e: Expr) -> int:
    """Number of interior (operator or call) nodes."""
    return sum(1 for node in iter_nodes(e) if isinstance(node, (Neg, BinOp, Call)))


# Binding strength used by the printer; must agree with the parser's grammar.
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_PREC_UNARY = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC_POW if e.op == "^" else _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC_UNARY
    if isinstance(e, Num) and e.value < 0:
        return _PREC_UNARY
    return _PREC_ATOM


def format_number(x: float) -> str:
    if math.isfinite(x) and float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def format_expr(e: Expr) -> str:
    """Render ``e`` as DSL text that parses back to the same tree."""
    if isinstance(e, Num):
        return format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Neg):
        inner = format_expr(e.operand)
        if _prec(e.operand) < _PREC_UNARY:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, BinOp):
        left, right = format_expr(e.left), format_expr(e.right)
        if e.op == "^":
            if _prec(e.left) <= _PREC_POW:
                left = f"({left})"
            if _prec(e.right) < _PREC_UNARY:
                right = f"({right})"
            return f"{left}^{right}"
        p = _PREC[e.op]
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        sep = f" {e.op} " if p == 1 else e.op
        return f"{left}{sep}{right}"
    raise TypeError(f"not an expression node: {e!r}")
