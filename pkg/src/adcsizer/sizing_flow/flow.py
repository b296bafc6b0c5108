"""Dual-loop sizing: an outer search over empirical margins, inner device sizing."""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from ..behavioral_sim import (
    AdcDesign,
    AdcMetrics,
    BehavioralSimulator,
    CountingSimulator,
    DEFAULT_CARD,
    ModelCard,
    SimConfig,
    SimulatorInterface,
    SPACES,
    SubcircuitResult,
    simulate_adc,
)
from ..depgraph import Binding, ConstraintReport, build_graph, propagate, topo_sort
from ..optimizer import COMPLETE, Dim, Optimizer, SearchSpace, run_trials
from ..spec_model import MissingBinding, RelationLibrary, load_default_library
from .targets import (
    SUBCIRCUITS,
    EmpiricalVector,
    SystemSpec,
    TargetSet,
    base_binding,
    derive_subcircuit_specs,
    outputs_to_measured,
    sizing_order,
)

DEFAULT_SPLIT = {"unit_cap": 0.05, "bootstrap": 0.25, "comparator": 0.30, "preamp": 0.40}
SIM_CALL = "adc"


class BudgetExhausted(RuntimeError):
    """Local sizing ran out of evaluations with targets still violated."""

    def __init__(self, result: "SizingResult"):
        self.result = result
        super().__init__(f"{result.subcircuit}: budget exhausted at loss {result.loss:.4g}")


@dataclass
class FlowConfig:
    total_budget: int = 5000
    budget_split: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_SPLIT))
    parallelism: int = 20
    max_system_iters: int = 5
    seed: int = 0
    n: int = 1
    n_fft: int = 4096
    record_wall_time: bool = True
    sampler: str = "tpe"
    # empirical values pinned by the user; the system loop searches the rest
    empirical_fixed: dict[str, float] = field(default_factory=dict)
    waveform_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.total_budget < 1:
            raise ValueError("total_budget must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.max_system_iters < 0:
            raise ValueError("max_system_iters must be >= 0")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if set(self.budget_split) != set(SUBCIRCUITS):
            raise ValueError(f"budget_split must cover {SUBCIRCUITS}")
        if any(v <= 0 for v in self.budget_split.values()) or sum(self.budget_split.values()) > 1.0 + 1e-12:
            raise ValueError("budget fractions must be positive and sum to at most 1")
        unknown = set(self.empirical_fixed) - set(EmpiricalVector.NAMES)
        if unknown:
            raise ValueError(f"unknown empirical values: {sorted(unknown)}")


@dataclass
class SizingResult:
    subcircuit: str
    params: dict[str, float]
    result: Optional[SubcircuitResult]
    loss: float
    log: list[dict[str, Any]]
    evaluations: int
    seconds: float

    @property
    def met(self) -> bool:
        return self.loss == 0.0


@dataclass
class FlowResult:
    converged: bool
    design: Optional[AdcDesign]
    metrics: Optional[AdcMetrics]
    report: ConstraintReport
    sub_results: dict[str, SubcircuitResult]
    sub_logs: dict[str, list[dict[str, Any]]]
    system_log: list[dict[str, Any]]
    runtime: dict[str, dict[str, float]]
    system_iterations: int
    evaluations: int
    spec: SystemSpec
    config: FlowConfig
    empirical: Optional[EmpiricalVector] = None


def _key(params: Mapping[str, float]) -> tuple:
    return tuple(sorted(params.items()))


def size_subcircuit(
    sub_id: str,
    targets: TargetSet,
    ctx: Mapping[str, float],
    budget: int,
    seed: int = 0,
    sim: SimulatorInterface | None = None,
    space: SearchSpace | None = None,
    parallelism: int = 1,
    t_comp: float | None = None,
    record_wall_time: bool = True,
    sampler: str = "tpe",
) -> SizingResult:
    """Size one subcircuit against its local targets.

    The loss is the hinge of log margins over ``targets``; the search stops at
    the first trial with zero loss. Raises :class:`BudgetExhausted` carrying
    the best trial found when the budget runs out first.
    """
    sim = sim or BehavioralSimulator()
    space = space or SPACES[sub_id]()
    if t_comp is None:
        t_comp = targets.context["T_comp"] if "T_comp" in targets.context else math.nan
    cache: dict[tuple, SubcircuitResult] = {}
    lock = threading.Lock()

    def objective(params: dict[str, float]) -> float:
        res = sim.evaluate(sub_id, params, ctx)
        with lock:
            cache[_key(params)] = res
        return targets.loss(outputs_to_measured(sub_id, res.metrics, t_comp))

    t0 = time.perf_counter()
    opt = Optimizer(space, seed=seed, sampler=sampler)
    run_trials(opt, objective, budget, parallelism, target=0.0)
    seconds = time.perf_counter() - t0 if record_wall_time else 0.0

    best = opt.best
    log = [opt.log_record(t, record_wall_time) for t in opt.finished]
    if best is None or best.status != COMPLETE:
        out = SizingResult(sub_id, best.params if best else {}, None, math.inf, log, len(opt.finished), seconds)
        raise BudgetExhausted(out)
    out = SizingResult(sub_id, best.params, cache[_key(best.params)], best.objective, log,
                       len(opt.finished), seconds)
    if best.objective > 0.0:
        raise BudgetExhausted(out)
    return out


def evaluator_context(step: str, spec: SystemSpec, n: int, done: Mapping[str, SubcircuitResult]) -> dict[str, float]:
    base = {"N": spec.N, "f_s": spec.f_s, "V_fs": spec.V_fs, "V_DD": spec.V_DD, "n": n}
    if step == "bootstrap":
        base["C_L"] = done["unit_cap"]["C_L"]
    elif step == "comparator":
        base["f_clk"] = spec.f_s * (spec.N + n)
    elif step == "preamp":
        base["C_load"] = done["comparator"]["C_in"]
    return base


def full_check(
    spec: SystemSpec,
    emp: EmpiricalVector,
    n: int,
    measured: Mapping[str, float],
    lib: RelationLibrary,
    require_all: bool = True,
) -> tuple[Binding, ConstraintReport]:
    g = build_graph(lib)
    b = base_binding(spec, emp, n)
    return propagate(g, topo_sort(g), lib, b, measured.get, require_all=require_all)


def _measure_all(spec: SystemSpec, n: int, sub: Mapping[str, SubcircuitResult]) -> dict[str, float]:
    t_comp = 1.0 / (spec.f_s * (spec.N + n))
    out: dict[str, float] = {}
    for step, res in sub.items():
        out.update(outputs_to_measured(step, res.metrics, t_comp))
    return out


def _emp_space(lib: RelationLibrary, exclude: Mapping[str, float] | None = None) -> SearchSpace:
    skip = exclude or {}
    return SearchSpace([Dim(n, lib.variables[n].lower, lib.variables[n].upper)
                        for n in EmpiricalVector.NAMES if n not in skip])


def card_of(sim: SimulatorInterface) -> ModelCard:
    """Model card behind a (possibly wrapped) behavioral simulator."""
    inner = getattr(sim, "inner", sim)
    return getattr(inner, "card", DEFAULT_CARD)


class _Flow:
    def __init__(self, spec: SystemSpec, cfg: FlowConfig, lib: RelationLibrary, sim: SimulatorInterface):
        self.spec, self.cfg, self.lib = spec, cfg, lib
        self.sim = sim if isinstance(sim, CountingSimulator) else CountingSimulator(sim)
        self.sub_logs: dict[str, list[dict[str, Any]]] = {s: [] for s in SUBCIRCUITS}
        self.runtime = {s: {"seconds": 0.0, "iterations": 0} for s in [*SUBCIRCUITS, "system"]}
        self.card = card_of(sim)

    def run_iteration(self, it: int, emp: EmpiricalVector, budget: int) -> dict[str, Any]:
        spec, cfg = self.spec, self.cfg
        t0 = time.perf_counter()
        sub_budget = max(budget - 1, len(SUBCIRCUITS))
        done: dict[str, SubcircuitResult] = {}
        params: dict[str, dict[str, float]] = {}
        local: dict[str, float] = {}
        measured: dict[str, float] = {}
        for step in sizing_order(self.lib):
            # later targets may need what earlier steps measured (V_os -> A_V)
            targets = derive_subcircuit_specs(spec, emp, measured, self.lib, cfg.n)[step]
            b = max(1, int(sub_budget * cfg.budget_split[step]))
            ctx = evaluator_context(step, spec, cfg.n, done)
            seed = cfg.seed * 1_000_003 + it * 101 + SUBCIRCUITS.index(step)
            try:
                res = size_subcircuit(step, targets, ctx, b, seed, self.sim, parallelism=cfg.parallelism,
                                      record_wall_time=cfg.record_wall_time, sampler=cfg.sampler)
            except BudgetExhausted as exc:
                res = exc.result
            for rec in res.log:
                rec["system_iter"] = it
            self.sub_logs[step].extend(res.log)
            self.runtime[step]["seconds"] += res.seconds
            self.runtime[step]["iterations"] += res.evaluations
            local[step] = res.loss
            if res.result is None:
                return {"loss": math.inf, "local_loss": local, "failed_step": step}
            done[step] = res.result
            params[step] = res.params
            measured.update(outputs_to_measured(step, res.result.metrics, targets.context["T_comp"]))

        design = AdcDesign(spec.N, spec.f_s, spec.V_fs, spec.V_DD, cfg.n, emp.as_dict(),
                           done["unit_cap"]["C_u"], params, spec.R_on_TG, spec.T_abs, cfg.seed)
        self.sim.bump(SIM_CALL)
        metrics = simulate_adc(design, done, SimConfig(n_fft=cfg.n_fft, seed=cfg.seed), self.card)
        measured["ENOB"] = metrics.ENOB
        _, report = full_check(spec, emp, cfg.n, measured, self.lib)
        self.runtime["system"]["seconds"] += (time.perf_counter() - t0) if cfg.record_wall_time else 0.0
        return {
            "loss": report.total_violation,
            "local_loss": local,
            "design": design,
            "metrics": metrics,
            "report": report,
            "sub": done,
        }


def run_flow(
    spec: SystemSpec,
    cfg: FlowConfig | None = None,
    lib: RelationLibrary | None = None,
    sim: SimulatorInterface | None = None,
) -> FlowResult:
    """Search empirical margins; for each candidate, size every subcircuit and check the lot.

    Stops at the first system trial whose full constraint check has zero
    violation, or after ``cfg.max_system_iters`` trials. The chosen design
    gets a final verification pass with fresh measurements.
    """
    cfg = cfg or FlowConfig()
    lib = lib or load_default_library()
    flow = _Flow(spec, cfg, lib, sim or BehavioralSimulator())
    fixed = dict(cfg.empirical_fixed)
    EmpiricalVector(**{**EmpiricalVector.centre(lib).as_dict(), **fixed}).check(lib)
    space = _emp_space(lib, exclude=fixed)
    # with every margin pinned there is nothing to search: one pass decides
    max_iters = cfg.max_system_iters if len(space) else min(cfg.max_system_iters, 1)
    opt = Optimizer(space, seed=cfg.seed, sampler=cfg.sampler)
    centre = EmpiricalVector.centre(lib).as_dict()
    opt.enqueue({n: centre[n] for n in space.names})

    best: dict[str, Any] | None = None
    system_log: list[dict[str, Any]] = []
    iters = 0
    while iters < max_iters:
        remaining = cfg.total_budget - flow.sim.total
        left = max_iters - iters
        budget = remaining // left
        if budget < len(SUBCIRCUITS) + 1:
            break
        tid, p = opt.suggest()
        emp = EmpiricalVector(**{**p, **fixed})
        t0 = time.perf_counter()
        out = flow.run_iteration(iters, emp, budget)
        dt = time.perf_counter() - t0 if cfg.record_wall_time else 0.0
        loss = out["loss"]
        trial = opt.observe(tid, loss if math.isfinite(loss) else math.nan, wall_time=dt)
        trial.info = {
            "local_loss": out["local_loss"],
            "budget": budget,
            "evaluations": flow.sim.total,
        }
        if "metrics" in out:
            trial.info["ENOB"] = out["metrics"].ENOB
        system_log.append(opt.log_record(trial, cfg.record_wall_time))
        iters += 1
        flow.runtime["system"]["iterations"] = iters
        if "design" in out and (best is None or loss < best["loss"]):
            best = dict(out, emp=emp)
        if loss == 0.0:
            break

    if best is None:
        emp = EmpiricalVector(**{**centre, **fixed})
        _, report = full_check(spec, emp, cfg.n, {}, lib, require_all=False)
        return FlowResult(False, None, None, report, {}, flow.sub_logs, system_log, flow.runtime,
                          iters, flow.sim.total, spec, cfg, None)

    design: AdcDesign = best["design"]
    metrics, report, sub = verify_design(design, lib=lib, sim=flow.sim, n_fft=cfg.n_fft,
                                         dump_path=cfg.waveform_path)
    converged = report.all_satisfied and report.total_violation == 0.0
    return FlowResult(converged, design, metrics, report, sub, flow.sub_logs, system_log, flow.runtime,
                      iters, flow.sim.total, spec, cfg, best["emp"])


def verify_design(
    design: AdcDesign,
    spec: SystemSpec | None = None,
    emp: EmpiricalVector | None = None,
    lib: RelationLibrary | None = None,
    sim: SimulatorInterface | None = None,
    n_fft: int = 4096,
    seed: int | None = None,
    dump_path: str | None = None,
) -> tuple[AdcMetrics, ConstraintReport, dict[str, SubcircuitResult]]:
    """Re-measure every subcircuit of ``design`` and check every relation.

    ``spec`` and ``emp`` default to the values recorded in the design. The
    unit capacitance recorded in the design is authoritative: if it differs
    from what the plate geometry gives, the plate is rescaled at constant
    aspect ratio (mismatch follows the area law).
    """
    lib = lib or load_default_library()
    sim = sim or BehavioralSimulator()
    spec = spec or SystemSpec(design.N, design.f_s, design.V_fs, design.V_DD, design.R_on_TG, design.T_abs)
    emp = emp or EmpiricalVector(**design.empirical)
    missing = [s for s in SUBCIRCUITS if s not in design.params]
    if missing:
        raise MissingBinding(missing[0])
    done: dict[str, SubcircuitResult] = {}
    for step in SUBCIRCUITS:
        ctx = evaluator_context(step, spec, design.n, done)
        res = sim.evaluate(step, design.params[step], ctx)
        if step == "unit_cap":
            res = rescale_unit_cap(res, design.C_u, spec.N)
        done[step] = res
    if isinstance(sim, CountingSimulator):
        sim.bump(SIM_CALL)
    seed = design.sim_seed if seed is None else seed
    probe = AdcDesign(spec.N, spec.f_s, spec.V_fs, spec.V_DD, design.n, emp.as_dict(), design.C_u,
                      design.params, spec.R_on_TG, spec.T_abs, seed)
    metrics = simulate_adc(probe, done, SimConfig(n_fft=n_fft, seed=seed, dump_path=dump_path), card_of(sim))
    measured = _measure_all(spec, design.n, done)
    measured["ENOB"] = metrics.ENOB
    _, report = full_check(spec, emp, design.n, measured, lib)
    return metrics, report, done


def rescale_unit_cap(res: SubcircuitResult, c_u: float, n_bits: int) -> SubcircuitResult:
    ratio = c_u / res["C_u"]
    if ratio == 1.0:
        return res
    return SubcircuitResult(res.subcircuit, {
        **res.metrics,
        "C_u": c_u,
        "sigma_u": res["sigma_u"] * math.sqrt(ratio),
        "C_L": 2.0 ** (n_bits / 2.0) * c_u,
    })
