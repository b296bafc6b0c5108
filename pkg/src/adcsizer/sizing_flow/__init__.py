"""System-level and subcircuit-level sizing loops."""

from .flow import (
    DEFAULT_SPLIT,
    BudgetExhausted,
    FlowConfig,
    FlowResult,
    SizingResult,
    evaluator_context,
    full_check,
    rescale_unit_cap,
    run_flow,
    size_subcircuit,
    verify_design,
)
from .targets import (
    OUTPUT_VARS,
    SUBCIRCUITS,
    EmpiricalVector,
    SystemSpec,
    TargetSet,
    base_binding,
    derive_subcircuit_specs,
    floors,
    local_relations,
    outputs_to_measured,
    sizing_order,
    subcircuit_graph,
)

__all__ = [
    "DEFAULT_SPLIT", "OUTPUT_VARS", "SUBCIRCUITS", "BudgetExhausted", "EmpiricalVector", "FlowConfig",
    "FlowResult", "SizingResult", "SystemSpec", "TargetSet", "base_binding", "derive_subcircuit_specs",
    "evaluator_context", "floors", "full_check", "local_relations", "outputs_to_measured",
    "rescale_unit_cap", "run_flow", "size_subcircuit", "sizing_order", "subcircuit_graph",
    "verify_design"
]
