"""Behavioral stand-in for transistor-level simulation of a SAR ADC."""

from .adc import AdcDesign, AdcMetrics, SimConfig, Timing, adc_power, simulate_adc, timing_check
from .interface import OUTPUTS, BehavioralSimulator, CountingSimulator, SimulatorInterface
from .modelcard import BOLTZMANN, DEFAULT_CARD, ModelCard
from .spectrum import (
    ConfigError,
    check_coherent,
    coherent_bin,
    enob_from_sndr,
    fom_schreier,
    fom_walden,
    reported_enob,
    sndr_db,
)
from .subcircuits import (
    SPACES,
    ModelDomainError,
    SubcircuitResult,
    cascade_bandwidth,
    eval_bootstrap,
    eval_cdac,
    eval_comparator,
    eval_preamp,
    eval_unit_cap,
    pelgrom_offset,
    preamp_cascade,
    sample_and_hold_enob,
    strongarm_delay,
    switch_on_resistance,
)

__all__ = [
    "AdcDesign", "AdcMetrics", "BOLTZMANN", "BehavioralSimulator", "ConfigError", "CountingSimulator",
    "DEFAULT_CARD", "ModelCard", "ModelDomainError", "OUTPUTS", "SPACES", "SimConfig",
    "SimulatorInterface", "SubcircuitResult", "Timing", "adc_power", "cascade_bandwidth",
    "check_coherent", "coherent_bin", "enob_from_sndr", "eval_bootstrap", "eval_cdac",
    "eval_comparator", "eval_preamp", "eval_unit_cap", "fom_schreier", "fom_walden",
    "pelgrom_offset", "preamp_cascade", "reported_enob", "sample_and_hold_enob", "simulate_adc",
    "sndr_db", "strongarm_delay", "switch_on_resistance", "timing_check",
]
