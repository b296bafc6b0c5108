"""Behavioral model constants.

These are calibration knobs for the desk-scale device models, not process
data. Lengths inside the models are handled in micrometres; everything
crossing the module boundary is SI.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

BOLTZMANN = 1.380649e-23
Q_ELECTRON = 1.602176634e-19


@dataclass(frozen=True)
class ModelCard:
    k_n: float = 300e-6  # A/V^2, NMOS transconductance parameter
    k_p: float = 150e-6  # A/V^2
    v_th: float = 0.35  # V
    a_vt: float = 3.5e-3  # V*um, Pelgrom threshold mismatch
    c_gate: float = 1e-15  # F/um of gate width
    c_junction: float = 0.5e-15  # F/um of drain width
    c_ox_area: float = 10e-15  # F/um^2, MOS capacitor density
    eps: float = 0.05  # signal-dependent on-resistance residual
    lambda_um: float = 0.1  # um/V; channel-length modulation lambda = lambda_um / L
    n_sub: float = 1.5  # weak-inversion slope factor
    t_abs: float = 300.0  # K
    cap_density: float = 2e-15  # F/um^2, unit capacitor
    cap_fringe: float = 0.1e-15  # F/um of perimeter
    a_cap: float = 3e-3  # um, capacitor mismatch sigma(C)/C * sqrt(area)
    c_latch_fixed: float = 2e-15  # F, wiring/logic load on each latch output
    comp_noise_factor: float = 2.0
    sar_gates_per_bit: float = 30.0
    c_logic: float = 1e-15  # F per gate
    cdac_activity: float = 0.5

    @property
    def u_t(self) -> float:
        return BOLTZMANN * self.t_abs / Q_ELECTRON

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelCard":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown model-card keys: {sorted(unknown)}")
        return replace(cls(), **{k: float(v) for k, v in data.items()})

    @classmethod
    def load(cls, path: str | Path) -> "ModelCard":
        return cls.from_json(Path(path).read_text())


DEFAULT_CARD = ModelCard()
