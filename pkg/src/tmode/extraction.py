"""Temporal-mode estimation from trigger-aligned traces.

Second moments are accumulated over fixed-size chunks of traces and merged in
chunk order, so results are bit-identical for any number of worker threads.
"""
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import DegeneracyWarning, InputError, NoExcessModeError, UndersampledModeError
from ..models.traces import TemporalMode, Trace, TraceSet

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
DEGENERACY_RTOL = 1e-9
ZERO_PAD = 16
N_EIGENVALUES = 10


@dataclass
class Moments:
    """Count, mean and centered co-moment Σ (x - x̄)(x - x̄)ᵀ of a set of traces."""
    count: int
    mean: np.ndarray
    comoment: np.ndarray

    def merge(self, other: 'Moments') -> 'Moments':
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        total = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / total)
        comoment = self.comoment + other.comoment + np.outer(delta, delta) * (self.count * other.count / total)
        return Moments(total, mean, comoment)


def _as_traceset(traces: Union[TraceSet, Sequence[Trace]]) -> TraceSet:
    if isinstance(traces, TraceSet):
        return traces
    return TraceSet.from_traces(list(traces))


def _chunk_moments(block: np.ndarray) -> Moments:
    mean = block.mean(axis=0)
    centered = block - mean
    return Moments(block.shape[0], mean, centered.T @ centered)


def accumulate_moments(traces: Union[TraceSet, Sequence[Trace]], chunk_size: int = CHUNK_SIZE,
                       threads: int = 1) -> Moments:
    """Chunked second-moment reduction with a fixed merge order."""
    ts = _as_traceset(traces)
    data = ts.data
    n = ts.n_samples
    starts = range(0, ts.n_traces, chunk_size)
    blocks = [data[s:s + chunk_size] for s in starts]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_chunk_moments, blocks))
    else:
        parts = [_chunk_moments(b) for b in blocks]

    result = Moments(0, np.zeros(n), np.zeros((n, n)))
    for part in parts:
        result = result.merge(part)
    return result


def _require_two(ts: TraceSet) -> None:
    if ts.n_traces < 2:
        raise InputError(f"need at least 2 traces for second moments, got {ts.n_traces}")


def variance_profile(traces: Union[TraceSet, Sequence[Trace]], threads: int = 1) -> np.ndarray:
    """Unbiased per-sample variance across traces."""
    ts = _as_traceset(traces)
    _require_two(ts)
    moments = accumulate_moments(ts, threads=threads)
    return np.diag(moments.comoment) / (moments.count - 1)


def autocorrelation_matrix(traces: Union[TraceSet, Sequence[Trace]], threads: int = 1) -> np.ndarray:
    """A_ij = mean over traces of (q_i - q̄_i)(q_j - q̄_j), exactly symmetric."""
    ts = _as_traceset(traces)
    _require_two(ts)
    moments = accumulate_moments(ts, threads=threads)
    a = moments.comoment / moments.count
    return 0.5 * (a + a.T)


def mode_from_excess(delta_a: np.ndarray, dt_ns: float) -> TemporalMode:
    """Dominant eigenvector of an excess autocorrelation matrix.

    The sign is fixed so that the largest-magnitude sample is positive. Purity is
    λ₁ over the sum of the positive eigenvalues.
    """
    delta_a = np.asarray(delta_a, dtype=np.float64)
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (delta_a + delta_a.T))
    lam1 = float(eigenvalues[-1])
    if lam1 <= 0:
        raise NoExcessModeError(
            f"largest excess eigenvalue is {lam1:.3e}: heralded traces are indistinguishable from background"
        )

    found = []
    if eigenvalues.size > 1 and lam1 - eigenvalues[-2] < DEGENERACY_RTOL * lam1:
        message = f"leading eigenvalues are degenerate ({lam1:.6e} vs {eigenvalues[-2]:.6e})"
        logger.warning(message)
        warnings.warn(message, DegeneracyWarning, stacklevel=2)
        found.append(message)

    psi = eigenvectors[:, -1].copy()
    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
    psi /= np.linalg.norm(psi)

    positive = eigenvalues[eigenvalues > 0]
    purity = lam1 / float(np.sum(positive))
    leading = [float(v) for v in eigenvalues[::-1][:N_EIGENVALUES]]
    logger.info(f"Mode extracted: lambda1={lam1:.4e}, purity={purity:.4f}")
    return TemporalMode(psi, dt_ns, purity=purity, eigenvalues=leading, warnings=found)


def extract_mode(heralded: TraceSet, background: TraceSet, threads: int = 1) -> TemporalMode:
    """Temporal mode from the heralded-minus-background autocorrelation."""
    heralded = _as_traceset(heralded)
    background = _as_traceset(background)
    heralded.check_compatible(background)
    delta = autocorrelation_matrix(heralded, threads) - autocorrelation_matrix(background, threads)
    return mode_from_excess(delta, heralded.dt_ns)


def _half_max_crossing(power: np.ndarray, above: int, below: int, half: float) -> float:
    """Fractional bin where ``power`` falls through ``half`` between two neighbours."""
    lo, hi = min(above, below), max(above, below)
    if 0 < above < power.size - 1:
        x = np.array([above - 1, above, above + 1], dtype=float)
        coeffs = np.polyfit(x, power[above - 1:above + 2], 2)
        coeffs[-1] -= half
        roots = np.roots(coeffs)
        real = [r.real for r in roots if abs(r.imag) < 1e-12 and lo <= r.real <= hi]
        if real:
            return float(real[0])
    # linear fallback
    return above + (power[above] - half) / (power[above] - power[below]) * (below - above)


def _walk_to_half(power: np.ndarray, start: int, step: int, half: float) -> Optional[float]:
    k = start
    while 0 <= k + step < power.size:
        if power[k + step] < half:
            return _half_max_crossing(power, k, k + step, half)
        k += step
    return None


def mode_bandwidth(mode: TemporalMode) -> float:
    """FWHM of the mode's power spectrum in MHz.

    The mode is zero-padded to ZERO_PAD times its length; half-maximum
    crossings are located by a parabola through three neighbouring bins.
    """
    n_fft = ZERO_PAD * len(mode)
    power = np.abs(np.fft.rfft(mode.psi, n_fft)) ** 2
    peak = int(np.argmax(power))
    if peak == power.size - 1:
        raise UndersampledModeError("spectrum peaks at the Nyquist frequency; sample the mode more finely")
    half = 0.5 * power[peak]

    right = _walk_to_half(power, peak, +1, half)
    if right is None:
        raise UndersampledModeError("spectrum stays above half maximum up to the Nyquist frequency")
    left = _walk_to_half(power, peak, -1, half) if peak > 0 else None
    # |Ψ(f)| is even for real ψ, so a peak region reaching DC continues to -right
    width = right - left if left is not None else 2.0 * right

    return width / (n_fft * mode.dt_ns) * 1e3


def mode_overlap(a: TemporalMode, b: TemporalMode) -> float:
    if len(a) != len(b):
        raise InputError(f"cannot overlap modes of length {len(a)} and {len(b)}")
    return float(abs(np.dot(a.psi, b.psi)))
