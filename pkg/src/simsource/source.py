"""Conditional signal state of a heralded two-mode squeezed source.

The idler click detector is an on/off POVM I - (1 - η_i)^n, so heralding on a
click weights |n,n⟩ by (1 - λ²) λ^{2n} (1 - (1 - η_i)^n).
"""
import logging

import numpy as np

from ..errors import DegenerateInputError
from ..fock.states import diagonal_state, loss_channel, thermal_state
from ..models.source import SourceParams
from ..models.state import DensityMatrix

logger = logging.getLogger(__name__)


def herald_probability(params: SourceParams) -> float:
    """Probability that one trial produces a true idler click (no cutoff)."""
    lam_sq = params.lambda_sq
    return float(1.0 - (1.0 - lam_sq) / (1.0 - lam_sq * (1.0 - params.eta_idler)))


def background_state(params: SourceParams) -> DensityMatrix:
    return thermal_state(params.bg_thermal_n, params.cutoff)


def conditional_distribution(params: SourceParams) -> np.ndarray:
    """Photon-number distribution of the signal right after a true click, before signal loss."""
    n = np.arange(params.cutoff + 1)
    weights = params.lambda_sq ** n * (1.0 - (1.0 - params.eta_idler) ** n)
    total = weights.sum()
    if total <= 0:
        return weights
    return weights / total


def heralded_state(params: SourceParams) -> DensityMatrix:
    """Signal state conditioned on an idler click, including false heralds."""
    bg = background_state(params)
    p_false = params.false_herald_prob
    if p_false == 1.0:
        return bg

    cond = conditional_distribution(params)
    if not np.any(cond > 0):
        if p_false == 0.0:
            raise DegenerateInputError(
                "heralding impossible: click probability vanishes "
                f"(lambda_sq={params.lambda_sq}, eta_idler={params.eta_idler}) and no false heralds"
            )
        logger.warning("No true heralds possible; heralded state equals the background state")
        return bg

    signal = loss_channel(diagonal_state(cond), params.eta_signal)
    # Both terms are diagonal, so the mixture is diagonal entry by entry
    mixed = (1.0 - p_false) * np.diag(np.diag(signal.elements)) + p_false * np.diag(np.diag(bg.elements))
    rho = DensityMatrix(mixed)
    logger.debug(f"Heralded state diagonal: {np.round(rho.diagonal()[:5], 5)}")
    return rho
