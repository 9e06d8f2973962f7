import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from ..models.reconstruction import ReconstructionConfig, ReconstructionResult
from ..models.state import DensityMatrix
from .data import MeasurementData

logger = logging.getLogger(__name__)

WARM_START_MIX = 0.1

Runner = Callable[[MeasurementData, DensityMatrix], ReconstructionResult]


def warm_start(rho: DensityMatrix, mix: float = WARM_START_MIX) -> DensityMatrix:
    """Point estimate blended with the maximally mixed state, so no direction starts at zero weight."""
    return DensityMatrix((1.0 - mix) * rho.elements + mix * np.eye(rho.dim) / rho.dim)


def bootstrap_errors(result: ReconstructionResult, data: MeasurementData,
                     config: ReconstructionConfig, run: Runner) -> ReconstructionResult:
    """Attach bootstrap standard deviations to ``result``.

    Each resample draws events with replacement (multinomial bin counts for
    binned data) from its own seeded substream and reruns the iteration from a
    warm start at the point estimate.
    """
    start = warm_start(result.rho)

    def one(index: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([config.resample_seed, index]))
        return run(data.resample(rng), start).rho.elements

    indices = range(config.n_bootstrap)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            samples = list(pool.map(one, indices))
    else:
        samples = [one(i) for i in indices]

    stack = np.array(samples)
    ddof = 1 if len(samples) > 1 else 0
    result.element_errors = np.sqrt(np.var(stack.real, axis=0, ddof=ddof) + np.var(stack.imag, axis=0, ddof=ddof))
    result.bootstrap_diagonals = np.real(np.diagonal(stack, axis1=1, axis2=2)).copy()
    result.diag_errors = np.std(result.bootstrap_diagonals, axis=0, ddof=ddof)
    logger.info(f"Bootstrap over {len(samples)} resamples: rho11 error {result.diag_errors[1]:.4f}")
    return result
