"""Parametric behavioral models of the SAR ADC subcircuits.

Device parameters arrive in SI (metres, amperes); the square-law arithmetic
is done with widths and lengths in micrometres so the model-card constants
read naturally. Every evaluator is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import brentq

from ..optimizer import Dim, SearchSpace
from .modelcard import BOLTZMANN, DEFAULT_CARD, ModelCard
from .spectrum import coherent_bin, enob_from_sndr, sine

W_RANGE = (100e-9, 3e-6)
L_RANGE = (30e-9, 1e-6)
NF_RANGE = (1, 100)
IBIAS_RANGE = (1e-6, 100e-6)
ENOB_SW_CAP = 16.0
UM = 1e6


class ModelDomainError(ValueError):
    """Parameters put a model outside the region where it means anything."""


@dataclass(frozen=True)
class SubcircuitResult:
    subcircuit: str
    metrics: dict[str, float]

    def __getitem__(self, key: str) -> float:
        return self.metrics[key]


# -- search spaces ---------------------------------------------------------

BOOTSTRAP_DEVICES = ("sw", "cb", "m1", "m2", "m3", "m4", "m5", "m6", "m7", "m8", "m9")
COMPARATOR_DEVICES = ("in", "ln", "lp", "tail")
PREAMP_STAGE_KEYS = ("w_in", "l_in", "nf_in", "w_ld", "l_ld", "nf_ld", "w_tail", "l_tail", "nf_tail", "ibias")


def _wl_dims(prefix: str) -> list[Dim]:
    return [Dim(f"w_{prefix}", *W_RANGE, scale="log"), Dim(f"l_{prefix}", *L_RANGE, scale="log")]


def unit_cap_space() -> SearchSpace:
    # plate width and length of the unit capacitor
    return SearchSpace([Dim("w_cap", *W_RANGE, scale="log"), Dim("l_cap", *W_RANGE, scale="log")])


def bootstrap_space() -> SearchSpace:
    return SearchSpace([d for dev in BOOTSTRAP_DEVICES for d in _wl_dims(dev)])


def comparator_space() -> SearchSpace:
    return SearchSpace([d for dev in COMPARATOR_DEVICES for d in _wl_dims(dev)])


def preamp_space(stages: int = 3) -> SearchSpace:
    dims: list[Dim] = []
    for s in range(1, stages + 1):
        for key in PREAMP_STAGE_KEYS:
            name = f"s{s}_{key}"
            if key.startswith("w_"):
                dims.append(Dim(name, *W_RANGE, scale="log"))
            elif key.startswith("l_"):
                dims.append(Dim(name, *L_RANGE, scale="log"))
            elif key.startswith("nf_"):
                dims.append(Dim(name, *NF_RANGE, scale="log", dtype="integer"))
            else:
                dims.append(Dim(name, *IBIAS_RANGE, scale="log"))
    return SearchSpace(dims)


SPACES: dict[str, Callable[[], SearchSpace]] = {
    "unit_cap": unit_cap_space,
    "bootstrap": bootstrap_space,
    "comparator": comparator_space,
    "preamp": preamp_space,
}


def check_params(space: SearchSpace, params: Mapping[str, float]) -> None:
    missing = [n for n in space.names if n not in params]
    if missing:
        raise ModelDomainError(f"missing device parameters: {missing}")
    for d in space.dims:
        if not d.contains(params[d.name]):
            raise ModelDomainError(f"{d.name}={params[d.name]!r} outside [{d.lower}, {d.upper}]")


# -- device-level helpers --------------------------------------------------

def switch_on_resistance(w: float, l: float, v_ov: float, card: ModelCard = DEFAULT_CARD) -> float:
    """Triode on-resistance ``1 / (k_n (W/L) V_ov)``."""
    r = 1.0 / (card.k_n * (w / l) * v_ov) if v_ov > 0 else -1.0
    if r <= 0:
        raise ModelDomainError(f"non-positive on-resistance for V_ov={v_ov!r}")
    return r


def saturation_gm(k: float, w_over_l: float, i_d: float, card: ModelCard = DEFAULT_CARD) -> float:
    """Square-law g_m, limited by the weak-inversion value I_d / (n U_T)."""
    strong = math.sqrt(2.0 * k * w_over_l * i_d)
    weak = i_d / (card.n_sub * card.u_t)
    return min(strong, weak)


def overdrive(k: float, w_over_l: float, i_d: float) -> float:
    return math.sqrt(2.0 * i_d / (k * w_over_l))


# -- unit capacitor --------------------------------------------------------

def eval_unit_cap(p: Mapping[str, float], ctx: Mapping[str, float], card: ModelCard = DEFAULT_CARD) -> SubcircuitResult:
    """Plate capacitor with area + fringe capacitance and area-law mismatch."""
    check_params(unit_cap_space(), p)
    w, l = p["w_cap"] * UM, p["l_cap"] * UM
    c_u = card.cap_density * w * l + card.cap_fringe * 2.0 * (w + l)
    sigma_u = c_u * card.a_cap / math.sqrt(w * l)
    n_bits = ctx["N"]
    return SubcircuitResult("unit_cap", {
        "C_u": c_u,
        "sigma_u": sigma_u,
        "C_L": 2.0 ** (n_bits / 2.0) * c_u,
    })


# -- bootstrap switch ------------------------------------------------------

def sample_and_hold_enob(
    r_on: float | Callable[[np.ndarray], np.ndarray],
    c_load: float,
    t_track: float,
    n_bits: int,
    v_fs: float,
    n_samples: int = 4096,
    ref_extra_bits: int = 4,
) -> float:
    """ENOB of an RC-limited sampler measured with an ideal reference quantizer.

    A full-scale sine (peak ``v_fs``) is sampled onto ``c_load`` starting from
    the reset level over ``t_track``; ``r_on`` may be a function of the
    instantaneous input. The held values are quantized with an ideal
    ``n_bits + ref_extra_bits`` quantizer over ``[-v_fs, v_fs]`` and compared
    sample by sample with the ideal input.
    """
    bin_ = coherent_bin(n_samples)
    x = sine(n_samples, bin_, v_fs, phase=0.1)
    r = r_on(x) if callable(r_on) else np.full_like(x, r_on)
    held = x * -np.expm1(-t_track / (r * c_load))
    bits = n_bits + ref_extra_bits
    lsb = 2.0 * v_fs / 2**bits
    code = np.clip(np.floor((held + v_fs) / lsb), 0, 2**bits - 1)
    out = -v_fs + (code + 0.5) * lsb
    err = out - x
    sndr = 10.0 * math.log10(np.sum(x * x) / np.sum(err * err))
    return min(enob_from_sndr(sndr), ENOB_SW_CAP)


def eval_bootstrap(p: Mapping[str, float], ctx: Mapping[str, float], card: ModelCard = DEFAULT_CARD) -> SubcircuitResult:
    """Bootstrapped sampling switch.

    ctx: N, f_s, V_fs, V_DD, C_L, and either T_sample or n (extra cycles).
    The boost capacitor shares charge with the switch gate node, which sets the
    bootstrapped overdrive. Devices m1-m3 form the gate charging path whose
    time constant eats into the tracking window; m4-m9 only add parasitics.
    """
    check_params(bootstrap_space(), p)
    n_bits, f_s, v_fs, v_dd, c_l = (ctx[k] for k in ("N", "f_s", "V_fs", "V_DD", "C_L"))
    if c_l <= 0:
        raise ModelDomainError("C_L must be positive")
    t_sample = ctx.get("T_sample") or 1.0 / (f_s * (n_bits + ctx.get("n", 1)))
    w = {d: p[f"w_{d}"] * UM for d in BOOTSTRAP_DEVICES}
    l = {d: p[f"l_{d}"] * UM for d in BOOTSTRAP_DEVICES}

    c_boot = card.c_ox_area * w["cb"] * l["cb"]
    aux = [d for d in BOOTSTRAP_DEVICES if d not in ("sw",)]
    c_par = card.c_gate * w["sw"] + card.c_junction * sum(w[d] for d in aux)
    alpha = c_boot / (c_boot + c_par)
    v_ov = max(alpha * v_dd - card.v_th, 5e-3)
    r_on = switch_on_resistance(w["sw"], l["sw"], v_ov, card)

    r_drive = sum(1.0 / (card.k_n * (w[d] / l[d]) * (v_dd - card.v_th)) for d in ("m1", "m2", "m3"))
    tau_gate = r_drive * c_par
    t_track = max(t_sample - 3.0 * tau_gate, 0.05 * t_sample)

    def r_of_v(v: np.ndarray) -> np.ndarray:
        return r_on * (1.0 + card.eps * v / v_dd)

    enob = sample_and_hold_enob(r_of_v, c_l, t_track, int(n_bits), v_fs)
    c_total = card.c_gate * sum(w.values()) + c_boot
    power = f_s * c_total * v_dd**2
    return SubcircuitResult("bootstrap", {
        "ENOB_sw": enob,
        "R_on_BS": r_on,
        "P": power,
        "T_track": t_track,
    })


# -- capacitive DAC --------------------------------------------------------

def cdac_dnl(weights: np.ndarray) -> np.ndarray:
    """Endpoint-fit DNL (LSB) for each instance; weights shape (n, N), LSB first."""
    n_bits = weights.shape[1]
    codes = np.arange(2**n_bits)
    bits = ((codes[:, None] >> np.arange(n_bits)) & 1).astype(float)
    levels = weights @ bits.T  # (n, 2^N)
    lsb = (levels[:, -1] - levels[:, 0]) / (2**n_bits - 1)
    return np.diff(levels, axis=1) / lsb[:, None] - 1.0


def eval_cdac(c_u: float, sigma_u: float, n_bits: int, n_mc: int = 1000, seed: int = 0) -> SubcircuitResult:
    """Monte Carlo DNL yield of a binary-weighted array of ``2^N`` unit caps.

    Bit ``i`` groups ``2^i`` i.i.d. units, so its weight is drawn as
    ``normal(2^i C_u, sqrt(2^i) sigma_u)``. Yield counts instances whose
    worst |DNL| stays below 0.5 LSB.
    """
    if c_u <= 0 or sigma_u < 0:
        raise ModelDomainError("need C_u > 0 and sigma_u >= 0")
    if n_mc < 100:
        raise ValueError("n_mc must be >= 100")
    rng = np.random.default_rng(seed)
    nominal = 2.0 ** np.arange(n_bits)
    ratio = sigma_u / c_u
    passed = 0
    worst = np.empty(n_mc)
    msb = np.empty(n_mc)
    chunk = max(1, min(n_mc, 2**22 // 2**n_bits))
    for start in range(0, n_mc, chunk):
        m = min(chunk, n_mc - start)
        weights = nominal + ratio * np.sqrt(nominal) * rng.standard_normal((m, n_bits))
        dnl = cdac_dnl(weights)
        absmax = np.abs(dnl).max(axis=1)
        worst[start:start + m] = absmax
        msb[start:start + m] = dnl[:, 2 ** (n_bits - 1) - 1]
        passed += int(np.count_nonzero(absmax < 0.5))
    return SubcircuitResult("cdac", {
        "C_u": c_u,
        "sigma_u": sigma_u,
        "yield": passed / n_mc,
        "sigma_dnl_max": ratio * math.sqrt(2**n_bits - 1),
        "mc_sigma_dnl_msb": float(np.std(msb)),
        "mean_max_abs_dnl": float(np.mean(worst)),
    })


# -- preamplifier ----------------------------------------------------------

def cascade_bandwidth(f_stages: list[float]) -> float:
    """-3 dB frequency of cascaded single-pole stages."""
    fs = np.asarray(f_stages, dtype=float)
    if len(fs) == 1:
        return float(fs[0])

    def excess(f: float) -> float:
        return float(np.sum(np.log1p((f / fs) ** 2)) - math.log(2.0))

    hi = float(fs.min())
    return brentq(excess, hi * 1e-6, hi, xtol=hi * 1e-14, rtol=1e-14)


def preamp_cascade(stages: list[tuple[float, float, float]]) -> tuple[float, float]:
    """Gain (dB) and bandwidth (Hz) of stages given as (g_m, R_out, C_stage)."""
    gains, poles = [], []
    for gm, rout, cst in stages:
        a = gm * rout
        if a <= 0:
            raise ModelDomainError("stage gain must be positive")
        gains.append(20.0 * math.log10(a))
        poles.append(1.0 / (2.0 * math.pi * rout * cst))
    return sum(gains), cascade_bandwidth(poles)


def eval_preamp(p: Mapping[str, float], ctx: Mapping[str, float], card: ModelCard = DEFAULT_CARD) -> SubcircuitResult:
    """Three cascaded differential stages with current-source loads.

    ctx: C_load (comparator input capacitance), V_DD.
    """
    space = preamp_space()
    check_params(space, p)
    v_dd = ctx.get("V_DD", 0.9)
    n_stages = 3
    stages = []
    power = 0.0
    for s in range(1, n_stages + 1):
        g = {k: p[f"s{s}_{k}"] for k in PREAMP_STAGE_KEYS}
        i_d = g["ibias"] / 2.0
        wl_in = g["w_in"] * g["nf_in"] / g["l_in"]
        wl_ld = g["w_ld"] * g["nf_ld"] / g["l_ld"]
        wl_tail = g["w_tail"] * g["nf_tail"] / g["l_tail"]
        gm = saturation_gm(card.k_n, wl_in, i_d, card)
        r_in = (g["l_in"] * UM) / (card.lambda_um * i_d)
        r_ld = (g["l_ld"] * UM) / (card.lambda_um * i_d)
        rout = r_in * r_ld / (r_in + r_ld)
        headroom = v_dd - card.v_th - overdrive(card.k_n, wl_in, i_d) - overdrive(card.k_p, wl_ld, i_d) \
            - overdrive(card.k_n, wl_tail, g["ibias"])
        if headroom < 0:
            # devices pushed into triode: gain collapses smoothly
            rout *= math.exp(headroom / 0.05)
        c_drain = card.c_junction * UM * (g["w_in"] * g["nf_in"] + g["w_ld"] * g["nf_ld"])
        if s < n_stages:
            nxt = p[f"s{s + 1}_w_in"] * p[f"s{s + 1}_nf_in"]
            c_next = card.c_gate * UM * nxt
        else:
            c_next = ctx["C_load"]
        stages.append((gm, rout, c_drain + c_next))
        power += g["ibias"] * v_dd
    a_v, f3 = preamp_cascade(stages)
    c_in = card.c_gate * UM * p["s1_w_in"] * p["s1_nf_in"]
    return SubcircuitResult("preamp", {"A_V": a_v, "f_3dB": f3, "P": power, "C_in": c_in})


# -- StrongARM comparator --------------------------------------------------

def strongarm_delay(
    t_precharge: float, c_latch: float, gm_eff: float, v_dd: float, a_pre: float, dv_in: float
) -> float:
    """Integration time plus regeneration ``(C/g_m) ln(V_DD / (2 A_pre dV))``."""
    if dv_in <= 0:
        raise ModelDomainError("input differential must be positive")
    regen = (c_latch / gm_eff) * max(0.0, math.log(v_dd / (2.0 * a_pre * dv_in)))
    return t_precharge + regen


def pelgrom_offset(w: float, l: float, card: ModelCard = DEFAULT_CARD) -> float:
    """Input offset sigma ``A_VT / sqrt(W L)`` with W, L in metres."""
    return card.a_vt / math.sqrt((w * UM) * (l * UM))


def eval_comparator(p: Mapping[str, float], ctx: Mapping[str, float], card: ModelCard = DEFAULT_CARD) -> SubcircuitResult:
    """StrongARM latch.

    ctx: V_DD, f_clk, optional C_L_latch (external load per output, defaults
    to the model card value) and dV_in (smallest input to resolve; defaults to
    half an LSB, computed from N and V_fs).
    """
    check_params(comparator_space(), p)
    v_dd, f_clk = ctx["V_DD"], ctx["f_clk"]
    dv = ctx.get("dV_in")
    if dv is None:
        # half an LSB is the smallest residue the latch must resolve
        dv = ctx["V_fs"] / 2.0 ** ctx["N"]
    w = {d: p[f"w_{d}"] * UM for d in COMPARATOR_DEVICES}
    l = {d: p[f"l_{d}"] * UM for d in COMPARATOR_DEVICES}
    c_ext = ctx.get("C_L_latch", card.c_latch_fixed)

    # the tail switch sets the current unless the input pair, biased at the
    # mid-supply common mode, saturates first
    i_tail = 0.5 * card.k_n * (w["tail"] / l["tail"]) * (v_dd - card.v_th) ** 2
    i_pair = card.k_n * (w["in"] / l["in"]) * max(v_dd / 2.0 - card.v_th, 0.05) ** 2
    i_half = min(i_tail, i_pair) / 2.0
    c_out = c_ext + card.c_gate * (w["ln"] + w["lp"]) + card.c_junction * (w["in"] + w["ln"] + w["lp"])
    t_pre = c_out * card.v_th / i_half
    gm_in = saturation_gm(card.k_n, w["in"] / l["in"], i_half, card)
    a_pre = gm_in * t_pre / c_out
    gm_eff = saturation_gm(card.k_n, w["ln"] / l["ln"], i_half, card) + saturation_gm(card.k_p, w["lp"] / l["lp"], i_half, card)
    t_pd = strongarm_delay(t_pre, c_out, gm_eff, v_dd, a_pre, dv)

    v_os = pelgrom_offset(p["w_in"], p["l_in"], card)
    v_noise = card.comp_noise_factor * math.sqrt(BOLTZMANN * card.t_abs / c_out) / max(a_pre, 1.0)
    c_total = 2.0 * c_out + card.c_gate * (w["tail"] + 2.0 * w["in"])
    power = c_total * v_dd**2 * f_clk
    return SubcircuitResult("comparator", {
        "T_pd": t_pd,
        "V_os": v_os,
        "P": power,
        "V_n": v_noise,
        "C_in": card.c_gate * w["in"],
        "A_pre": a_pre,
    })
