from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from adcsizer.spec_model import load_default_library  # noqa: E402
from adcsizer.sizing_flow import FlowConfig, SystemSpec, run_flow  # noqa: E402


@pytest.fixture(scope="session")
def lib():
    return load_default_library()


@pytest.fixture(scope="session")
def n10_spec():
    return SystemSpec(N=10, f_s=1e6, V_fs=0.9)


@pytest.fixture(scope="session")
def n10_flow(n10_spec):
    """Converged N=10, 1 MS/s fixture used by verification tests."""
    return run_flow(n10_spec, FlowConfig(parallelism=1, seed=0, record_wall_time=False))


def random_inputs(rng: np.random.Generator) -> dict[str, float]:
    """A valid random binding of every given and measured variable."""
    N = int(rng.integers(6, 17))
    v_dd = float(rng.uniform(0.6, 1.5))
    return {
        "k": 1.380649e-23, "pi": np.pi,
        "N": N, "f_s": float(10 ** rng.uniform(3, 9)), "V_fs": float(v_dd * rng.uniform(0.2, 1.0)),
        "V_DD": v_dd, "R_on_TG": float(rng.uniform(10, 1000)), "T_abs": float(rng.uniform(200, 400)),
        "D": float(rng.uniform(1, 3)), "E": float(rng.uniform(1, 3)),
        "PSA": float(rng.uniform(0.5, 0.9)), "PSTR": float(rng.uniform(0.5, 0.9)),
        "n": int(rng.integers(1, 5)),
        "C_L": float(10 ** rng.uniform(-15, -10)), "sigma_u": float(10 ** rng.uniform(-19, -15)),
        "ENOB_sw": float(rng.uniform(4, 16)), "R_on_BS": float(10 ** rng.uniform(0, 4)),
        "T_pd": float(10 ** rng.uniform(-12, -7)), # keep the gain floor above 0 dB: offset larger than half an LSB
        "V_os": float(2.0 ** -(N + 1) * 10 ** rng.uniform(0.05, 3)),
        "T_h": float(10 ** rng.uniform(-11, -6)), "A_V": float(rng.uniform(1, 80)),
        "f_3dB": float(10 ** rng.uniform(5, 10)), "ENOB": float(rng.uniform(4, 16)),
    }


def split_inputs(lib, vals: dict[str, float]) -> tuple[dict[str, float], dict[str, float]]:
    """(given values for the binding, measured values for the resolver)."""
    given = {k: v for k, v in vals.items() if lib.variables[k].kind != "measured"}
    measured = {k: v for k, v in vals.items() if lib.variables[k].kind == "measured"}
    return given, measured
