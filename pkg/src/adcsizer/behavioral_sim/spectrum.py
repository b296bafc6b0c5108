"""Coherent-sampling SNDR measurement and converter figures of merit."""

from __future__ import annotations

import math

import numpy as np

SNDR_OFFSET_DB = 1.76
DB_PER_BIT = 6.02


class ConfigError(ValueError):
    pass


def _is_prime(k: int) -> bool:
    if k < 2:
        return False
    return all(k % p for p in range(2, math.isqrt(k) + 1))


def coherent_bin(n_fft: int) -> int:
    """Largest prime below ``n_fft / 4``."""
    k = n_fft // 4 - 1 if n_fft % 4 == 0 else n_fft // 4
    while k > 1 and not _is_prime(k):
        k -= 1
    return k


def check_coherent(n_fft: int, bin_: int) -> None:
    if n_fft < 4096 or n_fft & (n_fft - 1):
        raise ConfigError(f"n_fft must be a power of two >= 4096, got {n_fft}")
    if not 0 < bin_ < n_fft // 2 or math.gcd(bin_, n_fft) != 1:
        raise ConfigError(f"bin {bin_} is not coherent with n_fft={n_fft}")


def sine(n: int, bin_: int, amplitude: float, phase: float = 0.0) -> np.ndarray:
    k = np.arange(n)
    return amplitude * np.sin(2 * np.pi * bin_ * k / n + phase)


def sndr_db(x: np.ndarray, bin_: int) -> float:
    """Signal bin power over everything else except DC (rectangular window)."""
    spec = np.abs(np.fft.rfft(x)) ** 2
    signal = spec[bin_]
    noise = spec[1:].sum() - signal
    if noise <= 0.0:
        return math.inf
    return 10.0 * math.log10(signal / noise)


def enob_from_sndr(sndr: float) -> float:
    return (sndr - SNDR_OFFSET_DB) / DB_PER_BIT


def fom_schreier(sndr: float, f_s: float, power: float) -> float:
    return sndr + 10.0 * math.log10(f_s / (2.0 * power))


def reported_enob(enob: float) -> float:
    """ENOB at the two-decimal precision it is tabulated with, rounded down."""
    return math.floor(enob * 100.0 + 1e-9) / 100.0


def fom_walden(power: float, f_s: float, enob: float) -> float:
    """Energy per conversion step, J; uses the tabulated (two-decimal) ENOB."""
    return power / (f_s * 2.0 ** reported_enob(enob))
