"""Discrete temporal modes and the orthonormal trace basis built around them."""
import logging
import math
from typing import Optional

import numpy as np

from ..errors import CapabilityError, InputError
from ..models.source import TraceParams
from ..models.traces import TemporalMode

logger = logging.getLogger(__name__)

SUPPORT_TOL = 1e-4
RESEED_TOL = 1e-6
MAX_BASIS_SIZE = 8192


def _shape_values(params: TraceParams, t: np.ndarray) -> np.ndarray:
    dt = t - params.mode_center_ns
    if params.mode_shape == 'gaussian':
        # intensity FWHM, so the amplitude carries 2 ln 2 rather than 4 ln 2
        return np.exp(-2.0 * math.log(2.0) * dt ** 2 / params.fwhm_ns ** 2)
    if params.mode_shape == 'sidelobe':
        return np.sinc(dt / params.sidelobe_zero_ns) * np.exp(-0.5 * dt ** 2 / params.envelope_sigma_ns ** 2)
    raise InputError(f"no analytic form for mode shape '{params.mode_shape}'")


def time_axis(params: TraceParams) -> np.ndarray:
    """Sample times in ns relative to the trigger."""
    return (np.arange(params.n_samples) - params.trigger_index) * params.dt_ns


def band_limit_bins(params: TraceParams) -> Optional[int]:
    """Highest DFT bin inside the detection bandwidth, or None for the full band."""
    if params.hd_bandwidth_mhz is None:
        return None
    k_max = int(math.floor(params.hd_bandwidth_mhz * params.n_samples * params.dt_ns * 1e-3))
    if k_max < 1:
        raise InputError(
            f"detection bandwidth {params.hd_bandwidth_mhz} MHz is below one frequency bin "
            f"of a {params.n_samples * params.dt_ns} ns window"
        )
    if k_max >= params.n_samples // 2:
        return None
    return k_max


def band_limit(x: np.ndarray, k_max: Optional[int]) -> np.ndarray:
    """Orthogonal projection onto the DFT bins 0..k_max."""
    if k_max is None:
        return np.asarray(x, dtype=np.float64)
    spectrum = np.fft.rfft(x)
    spectrum[k_max + 1:] = 0.0
    return np.fft.irfft(spectrum, n=len(x))


def discretize_mode(params: TraceParams) -> TemporalMode:
    """Sample the configured shape on the window, band-limit it and normalize."""
    if params.shape_name == 'explicit':
        shape = np.asarray(params.mode_shape, dtype=np.float64)
    else:
        t = time_axis(params)
        shape = _shape_values(params, t)
        # energy on a window three times wider tells whether the shape fits
        n = params.n_samples
        wide = np.arange(-n, 2 * n) - params.trigger_index
        total = np.sum(_shape_values(params, wide * params.dt_ns) ** 2)
        inside = np.sum(shape ** 2)
        if total <= 0 or 1.0 - inside / total > SUPPORT_TOL:
            raise InputError(
                f"mode shape '{params.mode_shape}' does not fit the {n}-sample window "
                f"({1.0 - inside / max(total, 1e-300):.2e} of its energy falls outside)"
            )
    shape = band_limit(shape, band_limit_bins(params))
    return TemporalMode.from_shape(shape, params.dt_ns)


def seed_basis(n: int, k_max: Optional[int] = None) -> np.ndarray:
    """Real orthonormal DFT vectors (DC, cos/sin pairs, Nyquist) up to bin k_max.

    Returns:
        Array of shape (K, n) with K = 1 + 2 k_max, or n for the full band.
    """
    if n > MAX_BASIS_SIZE:
        raise CapabilityError(f"trace synthesis supports at most {MAX_BASIS_SIZE} samples, got {n}")
    idx = np.arange(n)
    full = k_max is None
    top = n // 2 if full else k_max
    rows = [np.full(n, 1.0 / math.sqrt(n))]
    for k in range(1, top + 1):
        arg = 2.0 * math.pi * k * idx / n
        if 2 * k == n:
            rows.append(np.cos(arg) / math.sqrt(n))
            continue
        rows.append(math.sqrt(2.0 / n) * np.cos(arg))
        rows.append(math.sqrt(2.0 / n) * np.sin(arg))
    return np.array(rows)


def mode_basis(psi: np.ndarray, k_max: Optional[int] = None) -> np.ndarray:
    """Orthonormal basis of the detection band whose first row is ``psi``.

    Modified Gram-Schmidt with one reorthogonalization pass over the canonical
    seed vectors. A seed left with a residual below RESEED_TOL is skipped and
    the next seed takes its place.
    """
    seeds = seed_basis(len(psi), k_max)
    size = seeds.shape[0]
    basis = np.zeros((size, len(psi)))
    basis[0] = psi / np.linalg.norm(psi)
    filled = 1
    skipped = 0
    for seed in seeds:
        if filled == size:
            break
        v = seed.copy()
        for _ in range(2):
            for row in basis[:filled]:
                v -= np.dot(row, v) * row
        norm = np.linalg.norm(v)
        if norm < RESEED_TOL:
            skipped += 1
            continue
        basis[filled] = v / norm
        filled += 1
    logger.debug(f"Mode basis: {filled} vectors, {skipped} seed(s) skipped")
    return basis[:filled]
