"""Iterative maximum-likelihood state reconstruction (R ρ R iteration).

Every accepted step is required not to lower the log-likelihood. When the plain
R ρ R update would, the step is retried with the diluted operator
(I + εR)/(1 + ε), halving ε until the likelihood no longer drops.
"""
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import IllConditionedError
from ..models.quadratures import QuadratureDataset
from ..models.reconstruction import ReconstructionConfig, ReconstructionResult
from ..models.state import DensityMatrix
from .bootstrap import bootstrap_errors
from .data import BinnedData, MeasurementData, UnbinnedData, bin_dataset

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-300
MIN_SAMPLES = 1000
MAX_DILUTIONS = 60
STATIONARITY_TOL = 1e-8


def _elements(rho: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    return rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)


def _checked_probabilities(rho: np.ndarray, data: MeasurementData, fixed_order: bool = False) -> np.ndarray:
    p = data.probabilities(rho, fixed_order)
    low = int(np.argmin(p))
    if p[low] < PROB_FLOOR:
        raise IllConditionedError(
            f"event {low} has probability {p[low]:.3e} under the current state; "
            "the cutoff may be too small or the sample an outlier"
        )
    return p


def log_likelihood(rho: Union[DensityMatrix, np.ndarray], data: MeasurementData,
                   fixed_order: bool = False) -> float:
    """Σ_j f_j ln p_j with p_j floored at PROB_FLOOR; exactly rounded summation."""
    p = np.maximum(data.probabilities(_elements(rho), fixed_order), PROB_FLOOR)
    return math.fsum(data.frequencies * np.log(p))


def r_operator(rho: Union[DensityMatrix, np.ndarray], data: MeasurementData,
               fixed_order: bool = False) -> np.ndarray:
    p = _checked_probabilities(_elements(rho), data, fixed_order)
    return data.r_operator(data.frequencies / p)


def _normalized_product(r: np.ndarray, rho: np.ndarray) -> DensityMatrix:
    out = r @ rho @ r.conj().T
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out / np.real(np.trace(out)))


def iteration_step(rho: DensityMatrix, data: MeasurementData, fixed_order: bool = False) -> DensityMatrix:
    """ρ' = R ρ R / tr(R ρ R) with R = Σ_j (f_j / p_j) Π_j."""
    r = r_operator(rho, data, fixed_order)
    return _normalized_product(r, rho.elements)


def stationarity(rho: DensityMatrix, data: MeasurementData, fixed_order: bool = False) -> float:
    """tr((R - I) ρ (R - I)); zero exactly at a fixed point of the iteration."""
    d = r_operator(rho, data, fixed_order) - np.eye(rho.dim)
    return float(np.real(np.trace(d @ rho.elements @ d.conj().T)))


def maximally_mixed(cutoff: int) -> DensityMatrix:
    return DensityMatrix(np.eye(cutoff + 1) / (cutoff + 1))


class MaxLikReconstructor:
    """Runs the likelihood iteration on one measurement record."""

    def __init__(self, data: MeasurementData, config: ReconstructionConfig, fixed_order: bool = False):
        self.data = data
        self.config = config
        self.fixed_order = fixed_order

    def _monotone_step(self, rho: DensityMatrix, loglik: float) -> Tuple[DensityMatrix, float, bool]:
        """One likelihood step; the flag is True when every candidate lowered the likelihood."""
        r = r_operator(rho, self.data, self.fixed_order)
        candidate = _normalized_product(r, rho.elements)
        cand_ll = log_likelihood(candidate, self.data, self.fixed_order)
        if cand_ll >= loglik:
            return candidate, cand_ll, False

        eye = np.eye(rho.dim)
        eps = 1.0
        for _ in range(MAX_DILUTIONS):
            eps *= 0.5
            candidate = _normalized_product((eye + eps * r) / (1.0 + eps), rho.elements)
            cand_ll = log_likelihood(candidate, self.data, self.fixed_order)
            if cand_ll >= loglik:
                return candidate, cand_ll, False
        return rho, loglik, True

    def run(self, start: Optional[DensityMatrix] = None) -> ReconstructionResult:
        cfg = self.config
        rho = start if start is not None else maximally_mixed(cfg.cutoff)
        loglik = log_likelihood(rho, self.data, self.fixed_order)
        # the start state must give every event a usable probability
        _checked_probabilities(rho.elements, self.data, self.fixed_order)

        trajectory = [loglik]
        converged = False
        stalled = False
        iterations = 0
        gain = float('inf')
        for iterations in range(1, cfg.max_iters + 1):
            rho, new_ll, stalled = self._monotone_step(rho, loglik)
            trajectory.append(new_ll)
            if stalled:
                break
            gain = (new_ll - loglik) / max(abs(loglik), 1e-300)
            loglik = new_ll
            if gain < cfg.tol:
                converged = True
                break

        residual = stationarity(rho, self.data, self.fixed_order)
        result_warnings = []
        if stalled:
            # no admissible step left; only a fixed point counts as converged
            converged = residual < STATIONARITY_TOL
            if not converged:
                message = (f"likelihood step stalled after {iterations} iterations "
                           f"(stationarity {residual:.2e})")
                logger.warning(message)
                result_warnings.append(message)
        elif not converged:
            message = f"no convergence after {cfg.max_iters} iterations (last relative gain {gain:.2e})"
            logger.warning(message)
            result_warnings.append(message)
        return ReconstructionResult(
            rho=rho,
            loglik_trajectory=np.asarray(trajectory),
            iterations=iterations,
            converged=converged,
            stationarity=residual,
            config=cfg,
            warnings=result_warnings,
        )


def build_data(dataset: QuadratureDataset, config: ReconstructionConfig) -> MeasurementData:
    if config.binning is not None:
        return bin_dataset(dataset, config.binning, config.cutoff)
    return UnbinnedData.from_dataset(dataset, config.cutoff, threads=config.threads)


def reconstruct(dataset: QuadratureDataset, config: Optional[ReconstructionConfig] = None,
                fixed_order: bool = False) -> ReconstructionResult:
    """Maximum-likelihood density matrix from quadrature samples.

    Starts from the maximally mixed state and iterates until the relative
    log-likelihood gain drops below ``config.tol`` or ``config.max_iters`` is
    reached; the latter returns ``converged=False`` rather than raising. A run
    that stalls with no admissible step counts as converged only when its
    stationarity is below STATIONARITY_TOL.
    With ``config.n_bootstrap > 0`` the result carries bootstrap errors.
    """
    config = config or ReconstructionConfig()
    if len(dataset) < MIN_SAMPLES:
        logger.warning(f"Only {len(dataset)} samples; reconstruction below {MIN_SAMPLES} samples is unreliable")
    data = build_data(dataset, config)
    logger.info(f"Reconstructing from {len(dataset)} samples at cutoff {config.cutoff}"
                f" ({'binned' if isinstance(data, BinnedData) else 'unbinned'})")

    result = MaxLikReconstructor(data, config, fixed_order).run()
    logger.info(f"MaxLik finished after {result.iterations} iterations: converged={result.converged}, "
                f"logL={result.loglik:.6f}, stationarity={result.stationarity:.2e}")
    if config.n_bootstrap > 0:
        bootstrap_errors(result, data, config,
                         lambda sample, start: MaxLikReconstructor(sample, config, fixed_order).run(start))
    return result
