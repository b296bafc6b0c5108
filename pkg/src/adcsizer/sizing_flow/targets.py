"""Translate system specs into per-subcircuit targets through the relation graph."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ..depgraph import (
    MEASURED,
    Binding,
    ConstraintReport,
    DepGraph,
    build_graph,
    hinge_loss,
    propagate,
    topo_sort,
)
from ..spec_model import ConstraintOutcome, Relation, RelationLibrary, eval_expr, load_default_library, parse_library

# library variables each sizing step (or the converter simulation) measures
OUTPUT_VARS: dict[str, tuple[str, ...]] = {
    "unit_cap": ("C_L", "sigma_u"),
    "bootstrap": ("ENOB_sw", "R_on_BS"),
    "comparator": ("T_pd", "V_os", "T_h"),
    "preamp": ("A_V", "f_3dB"),
    "system": ("ENOB",),
}
# evaluator inputs that come from another subcircuit rather than the library
CONTEXT_DEPS: dict[str, tuple[str, ...]] = {
    "bootstrap": ("unit_cap",),
    "preamp": ("comparator",),
}
SUBCIRCUITS = ("unit_cap", "bootstrap", "comparator", "preamp")


@dataclass(frozen=True)
class SystemSpec:
    N: int
    f_s: float
    V_fs: float
    V_DD: float = 0.9
    R_on_TG: float = 150.0
    T_abs: float = 300.0

    def __post_init__(self) -> None:
        if not 6 <= self.N <= 16 or int(self.N) != self.N:
            raise ValueError(f"N must be an integer in [6, 16], got {self.N}")
        if not self.f_s > 0:
            raise ValueError("f_s must be positive")
        if not 0 < self.V_fs <= self.V_DD:
            raise ValueError("need 0 < V_fs <= V_DD")
        if self.R_on_TG <= 0 or self.T_abs <= 0:
            raise ValueError("R_on_TG and T_abs must be positive")

    def binding_values(self) -> dict[str, float]:
        return {"N": self.N, "f_s": self.f_s, "V_fs": self.V_fs, "V_DD": self.V_DD,
                "R_on_TG": self.R_on_TG, "T_abs": self.T_abs}


@dataclass(frozen=True)
class EmpiricalVector:
    D: float = 2.0
    E: float = 2.0
    PSA: float = 0.7
    PSTR: float = 0.7

    NAMES = ("D", "E", "PSA", "PSTR")

    def check(self, lib: RelationLibrary) -> None:
        for name in self.NAMES:
            lo, hi = lib.variables[name].lower, lib.variables[name].upper
            v = getattr(self, name)
            if lo is not None and not lo <= v <= hi:
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")

    def as_dict(self) -> dict[str, float]:
        return {n: float(getattr(self, n)) for n in self.NAMES}

    @classmethod
    def centre(cls, lib: RelationLibrary) -> "EmpiricalVector":
        return cls(**{n: 0.5 * (lib.variables[n].lower + lib.variables[n].upper) for n in cls.NAMES})


def base_binding(spec: SystemSpec, emp: EmpiricalVector, n: int = 1) -> Binding:
    b = Binding(spec.binding_values())
    for name, value in emp.as_dict().items():
        b.bind(name, value)
    b.bind("n", n)
    return b


def _measured_closure(lib: RelationLibrary, name: str, seen: set[str] | None = None) -> set[str]:
    """Measured variables a variable's value ultimately depends on."""
    seen = set() if seen is None else seen
    if name in seen:
        return set()
    seen.add(name)
    if lib.variables[name].kind == "measured":
        return {name}
    rel = lib.assign_for(name)
    out: set[str] = set()
    if rel is not None:
        for v in rel.rhs_variables:
            out |= _measured_closure(lib, v, seen)
    return out


def _owner_map() -> dict[str, str]:
    return {v: sub for sub, names in OUTPUT_VARS.items() for v in names}


def relation_owners(lib: RelationLibrary, rel: Relation) -> set[str]:
    owners = _owner_map()
    need = _measured_closure(lib, rel.lhs)
    for v in rel.rhs_variables:
        need |= _measured_closure(lib, v)
    return {owners[v] for v in need if v in owners}


def subcircuit_graph(lib: RelationLibrary) -> DepGraph:
    """Precedence among sizing steps implied by the relations.

    A step depends on another when one of its measured outputs is bounded by
    an expression involving the other's outputs, or when its evaluator needs
    the other's result as context.
    """
    owners = _owner_map()
    edges: dict[str, dict[str, str]] = {s: {} for s in SUBCIRCUITS}
    for rel in lib.relations:
        if not rel.is_bound or rel.lhs not in owners or owners[rel.lhs] not in edges:
            continue
        me = owners[rel.lhs]
        deps: set[str] = set()
        for v in rel.rhs_variables:
            deps |= {owners[m] for m in _measured_closure(lib, v) if m in owners}
        for d in sorted(deps & set(SUBCIRCUITS) - {me}, key=SUBCIRCUITS.index):
            edges[me][d] = "bound"
    for sub, deps in CONTEXT_DEPS.items():
        for d in deps:
            edges[sub].setdefault(d, "assign")
    return DepGraph(SUBCIRCUITS, edges)


def sizing_order(lib: RelationLibrary) -> list[str]:
    return topo_sort(subcircuit_graph(lib))


def local_relations(lib: RelationLibrary, order: Sequence[str]) -> dict[str, list[Relation]]:
    """Each bound relation goes to the first step after which it is checkable."""
    done: set[str] = set()
    out: dict[str, list[Relation]] = {s: [] for s in [*order, "system"]}
    taken: set[int] = set()
    for step in [*order, "system"]:
        done.add(step)
        for i, rel in enumerate(lib.relations):
            if i in taken or not rel.is_bound:
                continue
            owners = relation_owners(lib, rel)
            if owners and owners <= done:
                out[step].append(rel)
                taken.add(i)
    return out


@dataclass
class TargetSet:
    """Bound relations a sizing step must satisfy, evaluated by propagation."""

    lib: RelationLibrary
    relations: list[Relation]
    context: Binding
    outputs: tuple[str, ...]

    def __post_init__(self) -> None:
        self._graph = build_graph(self.lib)
        self._order = topo_sort(self._graph)
        self._tags = [r.tag for r in self.relations]

    @property
    def tags(self) -> list[str]:
        return list(self._tags)

    def report(self, measured: Mapping[str, float]) -> ConstraintReport:
        def resolver(name: str) -> float | None:
            return measured.get(name)

        _, rep = propagate(self._graph, self._order, self.lib, self.context, resolver, require_all=False)
        return rep

    def outcomes(self, measured: Mapping[str, float]) -> dict[str, ConstraintOutcome]:
        rep = self.report(measured)
        by_tag = {e.tag: e.outcome for e in rep.entries}
        missing = [t for t in self._tags if t not in by_tag]
        if missing:
            raise KeyError(f"targets not checkable with the given outputs: {missing}")
        return {t: by_tag[t] for t in self._tags}

    def loss(self, measured: Mapping[str, float]) -> float:
        return hinge_loss(self.outcomes(measured).values())

    def describe(self) -> list[dict[str, object]]:
        """Targets with their right-hand side evaluated on the current context."""
        rows = []
        for rel in self.relations:
            row: dict[str, object] = {"tag": rel.tag, "relation": str(rel), "variable": rel.lhs}
            try:
                row["bound"] = eval_expr(rel.rhs, self.context)
            except (KeyError, ValueError):
                row["bound"] = None
            rows.append(row)
        return rows

    @classmethod
    def from_text(cls, text: str, context: Mapping[str, float] | None = None) -> "TargetSet":
        """Ad-hoc targets written in the relation DSL."""
        lib = parse_library(text)
        ctx = Binding({k: v for k, v in (context or {}).items()})
        outs = tuple(n for n, v in lib.variables.items() if v.kind == "measured")
        return cls(lib, [r for r in lib.relations if r.is_bound], ctx, outs)


def derive_subcircuit_specs(
    spec: SystemSpec,
    emp: EmpiricalVector,
    binding: Mapping[str, float] | None = None,
    lib: RelationLibrary | None = None,
    n: int = 1,
) -> dict[str, TargetSet]:
    """Per-step target sets, with their context computed from what is bound.

    ``binding`` may carry measurements from steps that already ran (e.g. the
    comparator's V_os); they are folded into the context of later steps.
    """
    lib = lib or load_default_library()
    emp.check(lib)
    order = sizing_order(lib)
    rels = local_relations(lib, order)
    g = build_graph(lib)
    topo = topo_sort(g)
    measured = dict(binding or {})
    ctx = base_binding(spec, emp, n)
    for k, v in measured.items():
        if k not in ctx:
            ctx.bind(k, v, MEASURED)
    full, _ = propagate(g, topo, lib, ctx, None, require_all=False)
    return {step: TargetSet(lib, rels[step], full, OUTPUT_VARS[step]) for step in [*order, "system"]}


def floors(spec: SystemSpec, emp: EmpiricalVector, measured: Mapping[str, float] | None = None,
           lib: RelationLibrary | None = None, n: int = 1) -> dict[str, float]:
    """Numeric bounds the derivation produces, keyed by relation tag.

    ``C_u_min`` is added: the unit capacitance implied by C_L sitting on its
    noise floor.
    """
    lib = lib or load_default_library()
    specs = derive_subcircuit_specs(spec, emp, measured, lib, n)
    out: dict[str, float] = {}
    for ts in specs.values():
        for row in ts.describe():
            if row["bound"] is not None:
                out[str(row["tag"])] = float(row["bound"])  # type: ignore[arg-type]
    if "noise_floor" in out:
        out["C_u_min"] = out["noise_floor"] / 2.0 ** (spec.N / 2.0)
    return out


def outputs_to_measured(step: str, metrics: Mapping[str, float], t_comp: float) -> dict[str, float]:
    """Library variables from one evaluator's metrics."""
    if step == "comparator":
        # hold time left after the latch fires; kept positive so a late latch
        # shows up as a (large) negative margin instead of a domain error
        t_h = max(t_comp - metrics["T_pd"], 1e-6 * t_comp)
        return {"T_pd": metrics["T_pd"], "V_os": metrics["V_os"], "T_h": t_h}
    return {v: metrics[v] for v in OUTPUT_VARS[step]}


def all_tags(lib: RelationLibrary) -> list[str]:
    return [r.tag for r in lib.relations]


def unchecked(report: ConstraintReport) -> Iterable[str]:
    return (r.tag for r in report.pending)
