import numpy as np
import pytest

from src.fock.states import diagonal_state
from src.models.source import SourceParams, TraceParams
from src.models.state import DensityMatrix

# Diagonal of the measured heralded state, ρ00 = 1 - ρ11 - ρ22 - ρ33
MEASURED_DIAGONAL = [0.424, 0.488, 0.069, 0.019]


def random_state(cutoff: int, rng: np.random.Generator, rank: int = None) -> DensityMatrix:
    """Random full-rank (or rank-limited) density matrix."""
    d = cutoff + 1
    a = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = a @ a.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def measured_state():
    return diagonal_state(MEASURED_DIAGONAL)


@pytest.fixture
def small_params():
    """Bright source on a short trace window, fast enough for unit tests."""
    return SourceParams(
        lambda_sq=0.16, eta_signal=0.52, eta_idler=0.05, false_herald_prob=0.01,
        bg_thermal_n=0.1, cutoff=8,
        trace=TraceParams(n_samples=64, dt_ns=1.0, trigger_index=10, mode_shape='gaussian',
                          mode_center_ns=12.0, fwhm_ns=8.0),
    )
