"""State constructors, the loss channel, photon statistics and phase-space views."""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from ..errors import InputError, TruncationWarning
from ..models.state import DensityMatrix
from .basis import hermite_table, quadrature_vectors

logger = logging.getLogger(__name__)

TRUNCATION_TOL = 1e-6


def vacuum(cutoff: int) -> DensityMatrix:
    return fock_state(0, cutoff)


def fock_state(n: int, cutoff: int) -> DensityMatrix:
    if not 0 <= n <= cutoff:
        raise InputError(f"Fock state |{n}> does not fit cutoff {cutoff}")
    elements = np.zeros((cutoff + 1, cutoff + 1))
    elements[n, n] = 1.0
    return DensityMatrix(elements)


def diagonal_state(probs: Sequence[float]) -> DensityMatrix:
    """Diagonal state from photon-number probabilities (must already sum to 1)."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise InputError("photon-number distribution must be a non-empty vector")
    if np.any(p < 0):
        raise InputError("photon-number probabilities must be non-negative")
    return DensityMatrix(np.diag(p))


def thermal_distribution(n_bar: float, cutoff: int) -> np.ndarray:
    """Truncated and renormalized Bose-Einstein distribution.

    Emits a TruncationWarning when the mass beyond the cutoff exceeds
    TRUNCATION_TOL.
    """
    if not n_bar >= 0:
        raise InputError(f"thermal mean photon number must be non-negative, got {n_bar}")
    if n_bar == 0:
        p = np.zeros(cutoff + 1)
        p[0] = 1.0
        return p
    n = np.arange(cutoff + 1)
    ratio = n_bar / (1.0 + n_bar)
    p = ratio ** n / (1.0 + n_bar)
    lost = 1.0 - p.sum()
    if lost > TRUNCATION_TOL:
        message = f"thermal state n_bar={n_bar} loses {lost:.2e} of its mass above cutoff {cutoff}"
        logger.warning(message)
        warnings.warn(message, TruncationWarning, stacklevel=2)
    return p / p.sum()


def thermal_state(n_bar: float, cutoff: int) -> DensityMatrix:
    return diagonal_state(thermal_distribution(n_bar, cutoff))


def kraus_loss_operators(eta: float, cutoff: int) -> List[np.ndarray]:
    """Beam-splitter loss Kraus operators A_k|n> = sqrt(C(n,k) η^(n-k) (1-η)^k) |n-k>."""
    if not 0.0 <= eta <= 1.0:
        raise InputError(f"transmission must lie in [0, 1], got {eta}")
    n = np.arange(cutoff + 1)
    ops = []
    for k in range(cutoff + 1):
        op = np.zeros((cutoff + 1, cutoff + 1))
        m = n[k:]
        log_binom = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)
        # 0.0 ** 0 == 1 covers the η ∈ {0, 1} endpoints
        amp = np.sqrt(np.exp(log_binom) * eta ** (m - k) * (1.0 - eta) ** k)
        op[m - k, m] = amp
        ops.append(op)
    return ops


def loss_channel(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Transmit ``rho`` through a beam splitter of transmission ``eta``."""
    if eta == 1.0:
        return rho
    ops = kraus_loss_operators(eta, rho.cutoff)
    out = np.zeros_like(rho.elements)
    for op in ops:
        out += op @ rho.elements @ op.T
    return DensityMatrix(out)


@dataclass(frozen=True)
class PhotonStatistics:
    mean_n: float
    mean_n_sq: float
    mean_aadagger2: float

    def to_dict(self) -> Dict[str, float]:
        return {
            'mean_n': self.mean_n,
            'mean_n_sq': self.mean_n_sq,
            'mean_aadagger2': self.mean_aadagger2,
        }


def photon_statistics(rho: DensityMatrix) -> PhotonStatistics:
    p = rho.diagonal()
    n = np.arange(rho.dim, dtype=np.float64)
    return PhotonStatistics(
        mean_n=float(np.dot(n, p)),
        mean_n_sq=float(np.dot(n * n, p)),
        mean_aadagger2=float(np.dot(n * (n - 1), p)),
    )


def wigner_origin(rho: DensityMatrix) -> float:
    """W(0, 0) = (1/π) Σ (-1)^n ρ_nn, the displaced-parity expectation."""
    signs = (-1.0) ** np.arange(rho.dim)
    return float(np.dot(signs, rho.diagonal()) / math.pi)


def _wigner_laguerre(rho: DensityMatrix, x, p) -> np.ndarray:
    """General Fock-basis evaluation; ``x`` and ``p`` broadcast together."""
    x, p = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(p, dtype=np.float64))
    r2 = x * x + p * p
    alpha = x - 1j * p
    envelope = np.exp(-r2) / math.pi
    elements = rho.elements
    w = np.zeros(x.shape, dtype=np.float64)
    for n in range(rho.dim):
        for m in range(n, rho.dim):
            rho_mn = elements[m, n]
            if rho_mn == 0:
                continue
            k = m - n
            norm = math.exp(0.5 * (k * math.log(2.0) + gammaln(n + 1) - gammaln(m + 1)))
            term = ((-1) ** n) * norm * alpha ** k * eval_genlaguerre(n, k, 2.0 * r2)
            if k == 0:
                w += np.real(rho_mn) * np.real(term)
            else:
                # ρ_nm W_{nm} is the conjugate of ρ_mn W_{mn}
                w += 2.0 * np.real(rho_mn * term)
    return envelope * w


def wigner(rho: DensityMatrix, x: float, p: float) -> float:
    """Wigner function with vacuum (1/π) e^{-x²-p²}, normalized to 1 over phase space."""
    if x == 0 and p == 0:
        return wigner_origin(rho)
    return float(_wigner_laguerre(rho, x, p))


def wigner_grid(rho: DensityMatrix, xs: Sequence[float], ps: Sequence[float]) -> np.ndarray:
    """W evaluated on the tensor grid; result[i, j] = W(xs[i], ps[j])."""
    xx, pp = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ps, dtype=float), indexing='ij')
    return _wigner_laguerre(rho, xx, pp)


def marginal_pdf(rho: DensityMatrix, theta: float, q):
    """Homodyne density pr(q|θ) = tr(Π(q, θ) ρ).

    Accepts a scalar or an array of q and returns the same shape.
    """
    q_arr = np.asarray(q, dtype=np.float64)
    if rho.is_diagonal():
        psi = hermite_table(rho.cutoff, q_arr)
        pdf = psi ** 2 @ rho.diagonal()
    else:
        v = quadrature_vectors(q_arr.ravel(), theta, rho.cutoff)
        pdf = np.real(np.sum((v.conj() @ rho.elements) * v, axis=1)).reshape(q_arr.shape)
    pdf = np.maximum(pdf, 0.0)
    if pdf.ndim == 0:
        return float(pdf)
    return pdf
