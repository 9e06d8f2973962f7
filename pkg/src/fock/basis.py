"""Hermite-Gauss wavefunctions and homodyne POVM elements.

Quadratures follow the convention x = (a + a†)/√2, so the vacuum marginal is
π^{-1/2} exp(-q²) with variance 1/2. The rotated projector is
Π(q, θ) = e^{iθn} |q⟩⟨q| e^{-iθn}, i.e. Π_mn = e^{i(m-n)θ} ψ_m(q) ψ_n(q).
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..errors import CapabilityError, InputError
from ..models.state import MeasurementOperator

logger = logging.getLogger(__name__)

HERMITE_MAX_ORDER = 256
GL_ORDER = 16
GL_PANELS = 1

_PI_QUARTER = math.pi ** -0.25


def hermite_table(n_max: int, q) -> np.ndarray:
    """Evaluate ψ_0..ψ_{n_max} at every point of ``q``.

    Uses the three-term recurrence on normalized functions,
        ψ_{k+1} = sqrt(2/(k+1)) q ψ_k - sqrt(k/(k+1)) ψ_{k-1},
    which stays finite far beyond the orders where factorial formulas overflow.

    Returns:
        Array of shape ``q.shape + (n_max + 1,)``.
    """
    if n_max < 0:
        raise InputError(f"order must be non-negative, got {n_max}")
    if n_max > HERMITE_MAX_ORDER:
        raise CapabilityError(f"Hermite order {n_max} exceeds the supported limit {HERMITE_MAX_ORDER}")
    q = np.asarray(q, dtype=np.float64)
    if not np.all(np.isfinite(q)):
        raise InputError("quadrature values must be finite")

    table = np.empty(q.shape + (n_max + 1,), dtype=np.float64)
    table[..., 0] = _PI_QUARTER * np.exp(-0.5 * q * q)
    if n_max >= 1:
        table[..., 1] = math.sqrt(2.0) * q * table[..., 0]
    for k in range(1, n_max):
        table[..., k + 1] = (math.sqrt(2.0 / (k + 1)) * q * table[..., k]
                             - math.sqrt(k / (k + 1)) * table[..., k - 1])
    return table


def hermite_fn(n: int, q: float) -> float:
    """Normalized oscillator eigenfunction ψ_n(q); |ψ_0(q)|² = π^{-1/2} e^{-q²}."""
    if int(n) != n or n < 0:
        raise InputError(f"order must be a non-negative integer, got {n}")
    if not math.isfinite(q):
        raise InputError(f"quadrature value must be finite, got {q}")
    return float(hermite_table(int(n), q)[..., -1])


def quadrature_vectors(q, theta, cutoff: int) -> np.ndarray:
    """Rows v_j with (v_j)_m = e^{imθ_j} ψ_m(q_j), so Π_j = v_j v_j†.

    Returns:
        Complex array of shape (len(q), cutoff + 1).
    """
    q = np.atleast_1d(np.asarray(q, dtype=np.float64))
    theta = np.broadcast_to(np.asarray(theta, dtype=np.float64), q.shape)
    psi = hermite_table(cutoff, q)
    n = np.arange(cutoff + 1)
    return psi * np.exp(1j * np.outer(theta, n))


def gauss_legendre_nodes(lo: float, hi: float, order: int = GL_ORDER,
                         panels: int = GL_PANELS) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [lo, hi]."""
    x, w = leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def binned_overlaps(q_lo: np.ndarray, q_hi: np.ndarray, cutoff: int,
                    order: int = GL_ORDER, panels: int = GL_PANELS) -> np.ndarray:
    """∫ ψ_m ψ_n dq over each interval [q_lo_j, q_hi_j].

    Returns:
        Real array of shape (n_bins, cutoff + 1, cutoff + 1).
    """
    q_lo = np.atleast_1d(np.asarray(q_lo, dtype=np.float64))
    q_hi = np.atleast_1d(np.asarray(q_hi, dtype=np.float64))
    x, w = gauss_legendre_nodes(-1.0, 1.0, order, panels)
    half = 0.5 * (q_hi - q_lo)
    mid = 0.5 * (q_hi + q_lo)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    psi = hermite_table(cutoff, nodes)  # (bins, nodes, d)
    return np.einsum('bk,bkm,bkn->bmn', weights, psi, psi)


def quadrature_projector(q: float, theta: float, cutoff: int,
                         bin_width: Optional[float] = None,
                         order: int = GL_ORDER, panels: int = GL_PANELS) -> MeasurementOperator:
    """POVM element for outcome q at LO phase θ, optionally integrated over a bin.

    Args:
        q: Quadrature value (bin center when binned).
        theta: LO phase in radians.
        cutoff: Fock truncation; the operator is (cutoff+1)×(cutoff+1).
        bin_width: If given, integrate over [q - w/2, q + w/2] with
            ``panels`` panels of ``order``-point Gauss-Legendre quadrature.
    """
    if int(cutoff) != cutoff or cutoff < 1:
        raise InputError(f"cutoff must be a positive integer, got {cutoff}")
    if bin_width is not None and not bin_width > 0:
        raise InputError(f"bin_width must be positive, got {bin_width}")
    cutoff = int(cutoff)
    n = np.arange(cutoff + 1)
    phase = np.exp(1j * theta * (n[:, None] - n[None, :]))

    if bin_width is None:
        psi = hermite_table(cutoff, float(q))
        elements = phase * np.outer(psi, psi)
    else:
        overlaps = binned_overlaps(q - 0.5 * bin_width, q + 0.5 * bin_width, cutoff, order, panels)[0]
        elements = phase * overlaps
    return MeasurementOperator(elements, q=float(q), theta=float(theta), bin_width=bin_width)
