"""Simulator seam: the sizing flow only talks to ``SimulatorInterface``.

An adapter for a netlist simulator implements the same ``evaluate`` call,
mapping ``params`` onto its netlist and returning the metric names listed in
``OUTPUTS`` for each subcircuit.
"""

from __future__ import annotations

import threading
from typing import Mapping, Protocol

from .modelcard import DEFAULT_CARD, ModelCard
from .subcircuits import (
    SubcircuitResult,
    eval_bootstrap,
    eval_comparator,
    eval_preamp,
    eval_unit_cap,
)

OUTPUTS = {
    "unit_cap": ("C_u", "sigma_u", "C_L"),
    "bootstrap": ("ENOB_sw", "R_on_BS", "P"),
    "comparator": ("T_pd", "V_os", "P"),
    "preamp": ("A_V", "f_3dB", "P"),
}


class SimulatorInterface(Protocol):
    def evaluate(self, subcircuit_id: str, params: Mapping[str, float], ctx: Mapping[str, float]) -> SubcircuitResult:
        ...


class BehavioralSimulator:
    """Behavioral models behind the simulator interface."""

    def __init__(self, card: ModelCard = DEFAULT_CARD):
        self.card = card
        self._models = {
            "unit_cap": eval_unit_cap,
            "bootstrap": eval_bootstrap,
            "comparator": eval_comparator,
            "preamp": eval_preamp,
        }

    def evaluate(self, subcircuit_id: str, params: Mapping[str, float], ctx: Mapping[str, float]) -> SubcircuitResult:
        try:
            model = self._models[subcircuit_id]
        except KeyError:
            raise KeyError(f"unknown subcircuit {subcircuit_id!r}") from None
        return model(params, ctx, self.card)


class CountingSimulator:
    """Wraps a simulator and counts calls per subcircuit (thread-safe)."""

    def __init__(self, inner: SimulatorInterface):
        self.inner = inner
        self._lock = threading.Lock()
        self.counts: dict[str, int] = {}

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self.counts.values())

    def bump(self, key: str) -> None:
        with self._lock:
            self.counts[key] = self.counts.get(key, 0) + 1

    def evaluate(self, subcircuit_id: str, params: Mapping[str, float], ctx: Mapping[str, float]) -> SubcircuitResult:
        self.bump(subcircuit_id)
        return self.inner.evaluate(subcircuit_id, params, ctx)
