"""Full SAR conversion model, ADC-level metrics and timing checks."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional

import numpy as np

from ..spec_model import ConstraintOutcome, log_margin
from .modelcard import BOLTZMANN, DEFAULT_CARD, ModelCard
from .spectrum import (
    check_coherent,
    coherent_bin,
    enob_from_sndr,
    fom_schreier,
    fom_walden,
    sine,
    sndr_db,
)
from .subcircuits import ModelDomainError, SubcircuitResult

SUBCIRCUITS = ("unit_cap", "bootstrap", "comparator", "preamp")


@dataclass(frozen=True)
class Timing:
    T_comp: float
    T_sample: float
    T_pd: float
    T_h: float
    T_setup: float

    @classmethod
    def plan(cls, N: int, f_s: float, n: int, T_pd: float, PSTR: float) -> "Timing":
        t_comp = 1.0 / (f_s * (N + n))
        # sampling takes one comparison period; the hold window is what is
        # left of a comparison once the latch has fired
        return cls(t_comp, t_comp, T_pd, t_comp - T_pd, PSTR * t_comp)


@dataclass
class AdcDesign:
    N: int
    f_s: float
    V_fs: float
    V_DD: float
    n: int
    empirical: dict[str, float]
    C_u: float
    params: dict[str, dict[str, float]] = field(default_factory=dict)
    R_on_TG: float = 150.0
    T_abs: float = 300.0
    # seed of the conversion simulation (noise and mismatch draws)
    sim_seed: int = 0

    @property
    def C_L(self) -> float:
        return 2.0 ** (self.N / 2.0) * self.C_u

    @property
    def C_L_max(self) -> float:
        return (2.0 ** (self.N / 2.0) - 1.0) * self.C_u

    @property
    def C_tot(self) -> float:
        return 2.0 ** (self.N / 2.0) * self.C_u

    @property
    def T_comp(self) -> float:
        return 1.0 / (self.f_s * (self.N + self.n))

    def timing(self, T_pd: float) -> Timing:
        return Timing.plan(self.N, self.f_s, self.n, T_pd, self.empirical.get("PSTR", 0.5))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "AdcDesign":
        return cls(
            N=int(d["N"]), f_s=float(d["f_s"]), V_fs=float(d["V_fs"]), V_DD=float(d["V_DD"]),
            n=int(d.get("n", 1)), empirical={k: float(v) for k, v in d["empirical"].items()},
            C_u=float(d["C_u"]),
            params={s: {k: float(v) for k, v in p.items()} for s, p in d.get("params", {}).items()},
            R_on_TG=float(d.get("R_on_TG", 150.0)), T_abs=float(d.get("T_abs", 300.0)),
            sim_seed=int(d.get("sim_seed", 0)),
        )


@dataclass(frozen=True)
class AdcMetrics:
    SNDR: float
    ENOB: float
    P: float
    FOM_S: float
    FOM_W: float
    power_breakdown: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SimConfig:
    n_fft: int = 4096
    seed: int = 0
    ideal: bool = False
    bin: Optional[int] = None
    dump_path: Optional[str] = None


def _cdac_weights(N: int, c_u: float, sigma_u: float, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    nominal = 2.0 ** np.arange(N)
    w = nominal + (sigma_u / c_u) * np.sqrt(nominal) * rng.standard_normal(N)
    dummy = 1.0 + (sigma_u / c_u) * rng.standard_normal()
    return w, float(w.sum() + dummy)


def simulate_adc(
    design: AdcDesign,
    sub: Mapping[str, SubcircuitResult],
    cfg: SimConfig = SimConfig(),
    card: ModelCard = DEFAULT_CARD,
) -> AdcMetrics:
    """Convert a coherently sampled full-scale sine and measure it.

    ``sub`` must hold results for every subcircuit. With ``cfg.ideal`` the
    chain degenerates to an ideal N-bit quantizer (power is still reported).
    """
    missing = [s for s in SUBCIRCUITS if s not in sub]
    if missing:
        raise ModelDomainError(f"missing subcircuit results: {missing}")
    bin_ = cfg.bin if cfg.bin is not None else coherent_bin(cfg.n_fft)
    check_coherent(cfg.n_fft, bin_)

    N, v_fs, v_dd = design.N, design.V_fs, design.V_DD
    rng = np.random.default_rng(cfg.seed)
    lsb = 2.0 * v_fs / 2**N
    x = sine(cfg.n_fft, bin_, v_fs, phase=0.1)
    boot, comp, pre, ucap = sub["bootstrap"], sub["comparator"], sub["preamp"], sub["unit_cap"]
    timing = design.timing(comp["T_pd"])
    c_l = ucap["C_L"]

    if cfg.ideal:
        held = x.copy()
        weights, total = 2.0 ** np.arange(N), 2.0**N
        gain, offset, noise_sigma = 1.0, 0.0, 0.0
    else:
        r_on = boot["R_on_BS"]
        t_track = boot.metrics.get("T_track", timing.T_sample)
        r = r_on * (1.0 + card.eps * x / v_dd)
        held = x * -np.expm1(-t_track / (r * c_l))
        held = held + math.sqrt(BOLTZMANN * card.t_abs / c_l) * rng.standard_normal(x.size)
        weights, total = _cdac_weights(N, ucap["C_u"], ucap["sigma_u"], rng)
        # the preamp restarts every cycle and only gets PSTR*T_comp to settle
        settle = -math.expm1(-2.0 * math.pi * pre["f_3dB"] * timing.T_setup)
        gain = 10.0 ** (pre["A_V"] / 20.0) * settle
        offset = comp["V_os"]
        noise_sigma = comp.metrics.get("V_n", 0.0)

    code = np.zeros(x.size, dtype=np.int64)
    acc = np.zeros(x.size)
    for bit in range(N - 1, -1, -1):
        trial = acc + weights[bit]
        v_dac = -v_fs + 2.0 * v_fs * trial / total
        decision = gain * (held - v_dac) + offset
        if noise_sigma:
            decision = decision + noise_sigma * rng.standard_normal(x.size)
        keep = decision > 0
        acc = np.where(keep, trial, acc)
        code |= keep.astype(np.int64) << bit
    out = -v_fs + (code + 0.5) * lsb

    sndr = sndr_db(out, bin_)
    enob = enob_from_sndr(sndr)
    power = adc_power(design, sub, card)
    total_p = sum(power.values())

    if cfg.dump_path:
        with open(cfg.dump_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["index", "held_v", "code"])
            for i, (h, c) in enumerate(zip(held, code)):
                wr.writerow([i, repr(float(h)), int(c)])

    return AdcMetrics(
        SNDR=sndr,
        ENOB=enob,
        P=total_p,
        FOM_S=fom_schreier(sndr, design.f_s, total_p),
        FOM_W=fom_walden(total_p, design.f_s, enob),
        power_breakdown=power,
    )


def adc_power(design: AdcDesign, sub: Mapping[str, SubcircuitResult], card: ModelCard = DEFAULT_CARD) -> dict[str, float]:
    v2 = design.V_DD**2
    cycles = design.N + design.n
    return {
        "bootstrap": sub["bootstrap"]["P"],
        "comparator": sub["comparator"]["P"],
        "preamp": sub["preamp"]["P"],
        "cdac": card.cdac_activity * sub["unit_cap"]["C_L"] * v2 * design.f_s,
        "sar_logic": card.sar_gates_per_bit * design.N * card.c_logic * v2 * design.f_s * cycles,
    }


def timing_check(
    design: AdcDesign, R_on_BS: float, R_on_TG: float, T_pd: float, T_h: float | None = None
) -> dict[str, ConstraintOutcome]:
    """DAC settling, hold settling and latch delay checks with log margins."""
    r_max = max(R_on_BS, R_on_TG)
    e = design.empirical["E"]
    settle_ln = math.log(2.0 ** (design.N + e))
    t_comp = design.T_comp
    t_h = design.timing(T_pd).T_h if T_h is None else T_h

    def outcome(value: float, bound: float, kind: str) -> ConstraintOutcome:
        m = log_margin(value, bound, kind)
        return ConstraintOutcome(m >= 0.0, m, value, bound)

    return {
        "dac_settling": outcome(t_comp, 1.2 * r_max * design.C_L_max * settle_ln, "lower_bound"),
        "hold_settling": outcome(t_h, 1.5 * r_max * design.C_tot * settle_ln, "lower_bound"),
        "comp_delay": outcome(T_pd, t_comp / 5.0, "upper_bound"),
    }
