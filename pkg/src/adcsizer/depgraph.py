"""Variable dependency graph: construction, ordering and value propagation.

Edges point from a relation's left-hand variable to every variable on its
right-hand side ("depends on"). A topological order lists dependencies
before dependents, so walking it front to back evaluates every right-hand
side before the left-hand side that needs it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

from .spec_model import (
    ConstraintOutcome,
    DomainError,
    MissingBinding,
    Relation,
    RelationLibrary,
    Var,
    check_relation,
    eval_expr,
)

Resolver = Callable[[str], Optional[float]]

GIVEN = "given"
COMPUTED = "computed"
MEASURED = "measured"


class CycleError(ValueError):
    def __init__(self, path: Sequence[str]):
        self.path = list(path)
        super().__init__("dependency cycle: " + " -> ".join(self.path))


class RebindError(ValueError):
    pass


@dataclass(frozen=True)
class DepGraph:
    nodes: tuple[str, ...]
    # node -> dependencies, in first-seen order; values are "assign" or "bound"
    edges: dict[str, dict[str, str]]

    def successors(self, node: str) -> list[str]:
        return list(self.edges.get(node, ()))

    def edge_list(self) -> list[tuple[str, str]]:
        return [(u, v) for u in self.nodes for v in self.edges.get(u, ())]

    def to_dot(self, name: str = "dependencies") -> str:
        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for node in self.nodes:
            lines.append(f'  "{node}";')
        for u in self.nodes:
            for v, kind in self.edges.get(u, {}).items():
                style = "solid" if kind == "assign" else "dashed"
                lines.append(f'  "{u}" -> "{v}" [style={style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        adj = {u: self.successors(u) for u in self.nodes}
        return json.dumps(adj, indent=2) + "\n"


def find_cycle(nodes: Sequence[str], edges: Mapping[str, Iterable[str]]) -> list[str] | None:
    """Return one cycle as a closed path ``[a, b, ..., a]``, or None."""
    white, grey, black = 0, 1, 2
    color = {n: white for n in nodes}
    for root in nodes:
        if color[root] != white:
            continue
        stack: list[tuple[str, Iterator[str]]] = [(root, iter(edges.get(root, ())))]
        path = [root]
        color[root] = grey
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = black
                stack.pop()
                path.pop()
                continue
            c = color.get(nxt, white)
            if c == grey:
                return path[path.index(nxt):] + [nxt]
            if c == white:
                color[nxt] = grey
                path.append(nxt)
                stack.append((nxt, iter(edges.get(nxt, ()))))
    return None


def build_graph(lib: RelationLibrary, check: bool = True) -> DepGraph:
    """One node per declared variable, edges from every relation's LHS to its RHS."""
    nodes = tuple(lib.variables)
    edges: dict[str, dict[str, str]] = {}
    for rel in lib.relations:
        deps = edges.setdefault(rel.lhs, {})
        kind = "assign" if rel.kind == "assign" else "bound"
        for v in rel.rhs_variables:
            if deps.get(v) != "assign":
                deps[v] = kind
    graph = DepGraph(nodes, edges)
    if check:
        cycle = find_cycle(nodes, edges)
        if cycle:
            raise CycleError(cycle)
    return graph


def topo_sort(g: DepGraph) -> list[str]:
    """Dependencies-first order; ties follow declaration order.

    Iterative depth-first post-order started from each node in declaration
    order, so the result is deterministic for a given graph.
    """
    done: set[str] = set()
    on_path: set[str] = set()
    order: list[str] = []
    for root in g.nodes:
        if root in done:
            continue
        stack: list[tuple[str, Iterator[str]]] = [(root, iter(g.successors(root)))]
        on_path.add(root)
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                on_path.discard(node)
                done.add(node)
                order.append(node)
            elif nxt in on_path:
                path = [n for n, _ in stack]
                raise CycleError(path[path.index(nxt):] + [nxt])
            elif nxt not in done:
                on_path.add(nxt)
                stack.append((nxt, iter(g.successors(nxt))))
    return order


def is_topological(order: Sequence[str], g: DepGraph) -> bool:
    pos = {n: i for i, n in enumerate(order)}
    if len(pos) != len(g.nodes) or set(pos) != set(g.nodes):
        return False
    return all(pos[v] < pos[u] for u, v in g.edge_list())


@dataclass(frozen=True)
class BoundValue:
    value: float
    provenance: str


class Binding(Mapping[str, float]):
    """Variable values with provenance; each variable may be bound once."""

    def __init__(self, values: Mapping[str, float] | None = None, provenance: str = GIVEN):
        self._items: dict[str, BoundValue] = {}
        for name, value in (values or {}).items():
            self.bind(name, value, provenance)

    def bind(self, name: str, value: float, provenance: str = GIVEN) -> None:
        if name in self._items:
            raise RebindError(f"{name!r} is already bound")
        self._items[name] = BoundValue(float(value), provenance)

    def provenance(self, name: str) -> str:
        return self._items[name].provenance

    def copy(self) -> "Binding":
        new = Binding()
        new._items = dict(self._items)
        return new

    def __getitem__(self, name: str) -> float:
        return self._items[name].value

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __repr__(self) -> str:
        return f"Binding({ {k: v.value for k, v in self._items.items()} })"


@dataclass(frozen=True)
class ReportEntry:
    tag: str
    relation: Relation
    outcome: ConstraintOutcome
    # set when the relation could not be checked (e.g. a non-positive value)
    error: str = ""

    @property
    def is_bound(self) -> bool:
        return self.relation.is_bound


@dataclass
class ConstraintReport:
    entries: list[ReportEntry] = field(default_factory=list)
    # relations that could not be checked because a side was unbound
    pending: list[Relation] = field(default_factory=list)

    @property
    def total_violation(self) -> float:
        return sum(max(0.0, -e.outcome.signed_log_margin) for e in self.entries if e.is_bound)

    @property
    def all_satisfied(self) -> bool:
        return not self.pending and all(e.outcome.satisfied for e in self.entries)

    def failing(self) -> list[ReportEntry]:
        return [e for e in self.entries if not e.outcome.satisfied]

    def get(self, tag: str) -> ReportEntry:
        for e in self.entries:
            if e.tag == tag:
                return e
        raise KeyError(tag)


def propagate(
    g: DepGraph,
    order: Sequence[str],
    lib: RelationLibrary,
    binding: Binding | Mapping[str, float],
    resolver: Resolver | None = None,
    require_all: bool = True,
) -> tuple[Binding, ConstraintReport]:
    """Evaluate derived variables in ``order`` and check every relation.

    Unbound variables without an assign-relation take their declared fixed
    value, or else are requested from ``resolver``. With ``require_all`` an
    unresolvable variable raises :class:`MissingBinding`; without it the
    variable stays unbound and relations touching it are reported pending.
    """
    out = binding.copy() if isinstance(binding, Binding) else Binding(binding)
    for name in order:
        if name in out:
            continue
        rel = lib.assign_for(name)
        if rel is not None:
            if all(v in out for v in rel.rhs_variables):
                out.bind(name, eval_expr(rel.rhs, out), COMPUTED)
            elif require_all:
                missing = next(v for v in rel.rhs_variables if v not in out)
                raise MissingBinding(missing)
            continue
        fixed = lib.variables[name].value
        if fixed is not None:
            out.bind(name, fixed, GIVEN)
            continue
        value = resolver(name) if resolver is not None else None
        if value is not None:
            out.bind(name, value, MEASURED)
        elif require_all:
            raise MissingBinding(name)

    report = ConstraintReport()
    for rel in lib.relations:
        if rel.lhs in out and all(v in out for v in rel.rhs_variables):
            report.entries.append(_checked(rel, out))
        else:
            report.pending.append(rel)
    return out, report


def _checked(rel: Relation, b: Binding) -> ReportEntry:
    # an unmeasurable relation is a failed one with no finite margin
    try:
        return ReportEntry(rel.tag, rel, check_relation(rel, b))
    except DomainError as exc:
        sides = []
        for e in (Var(rel.lhs), rel.rhs):
            try:
                sides.append(eval_expr(e, b))
            except DomainError:
                sides.append(math.nan)
        return ReportEntry(rel.tag, rel, ConstraintOutcome(False, -math.inf, *sides), str(exc))


def hinge_loss(outcomes: Iterable[ConstraintOutcome]) -> float:
    """Sum of decade deficits over violated bounds."""
    total = 0.0
    for o in outcomes:
        m = o.signed_log_margin
        total += max(0.0, -m) if not math.isnan(m) else math.inf
    return total
