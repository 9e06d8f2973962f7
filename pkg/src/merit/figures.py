"""Figures of merit of a heralded single-photon state."""
import logging
from typing import Optional

import numpy as np

from ..errors import InputError, UndefinedStatisticError
from ..fock.states import photon_statistics, wigner_origin
from ..models.reconstruction import ReconstructionResult
from ..models.report import MeritReport
from ..models.state import DensityMatrix

logger = logging.getLogger(__name__)

VACUUM_VARIANCE = 0.5


def _mean_n(rho: DensityMatrix) -> float:
    stats = photon_statistics(rho)
    if not stats.mean_n > 0:
        raise UndefinedStatisticError("mean photon number is zero; the statistic is undefined")
    return stats.mean_n


def g2_zero(rho: DensityMatrix) -> float:
    """⟨a†a†aa⟩ / ⟨a†a⟩²."""
    m = _mean_n(rho)
    return photon_statistics(rho).mean_aadagger2 / (m * m)


def mandel_q(rho: DensityMatrix) -> float:
    """(⟨n²⟩ - ⟨n⟩² - ⟨n⟩) / ⟨n⟩."""
    m = _mean_n(rho)
    return (photon_statistics(rho).mean_n_sq - m * m - m) / m


def g2_si(var_trig: float, var_bck: float) -> float:
    """Signal-idler cross-correlation from triggered and background quadrature variances."""
    if not var_bck > VACUUM_VARIANCE:
        raise UndefinedStatisticError(
            f"background variance {var_bck:.6g} does not exceed the vacuum level {VACUUM_VARIANCE}; "
            "g2_si needs a thermal background"
        )
    return (var_trig - VACUUM_VARIANCE) / (var_bck - VACUUM_VARIANCE)


def spectral_brightness(rate_hz: float, bandwidth_mhz: float) -> float:
    """Photons per second per MHz of optical bandwidth."""
    if not rate_hz > 0 or not bandwidth_mhz > 0:
        raise InputError(f"rate and bandwidth must be positive, got {rate_hz} Hz and {bandwidth_mhz} MHz")
    return rate_hz / bandwidth_mhz


def _g2_spread(diagonals: np.ndarray) -> Optional[float]:
    n = np.arange(diagonals.shape[1])
    means = diagonals @ n
    ok = means > 0
    if np.count_nonzero(ok) < 2:
        return None
    values = (diagonals[ok] @ (n * (n - 1))) / means[ok] ** 2
    return float(np.std(values, ddof=1))


def merit_report(rho: DensityMatrix, var_trig: Optional[float] = None, var_bck: Optional[float] = None,
                 herald_rate_hz: Optional[float] = None, bandwidth_mhz: Optional[float] = None,
                 reconstruction: Optional[ReconstructionResult] = None) -> MeritReport:
    """Assemble every figure of merit the inputs allow.

    Optional statistics are filled only when their inputs are given; g2 and Q
    of a state without photons are reported as undefined instead of raising.
    """
    p = rho.diagonal()
    stats = photon_statistics(rho)
    report = MeritReport(
        rho11=float(np.clip(p[1], 0.0, 1.0)) if p.size > 1 else 0.0,
        wigner_origin=wigner_origin(rho),
        mean_n=stats.mean_n,
        odd_fraction=float(np.sum(p[1::2])),
        bandwidth_mhz=bandwidth_mhz,
        herald_rate_hz=herald_rate_hz,
    )

    for name, fn in (('g2_zero', g2_zero), ('mandel_q', mandel_q)):
        try:
            setattr(report, name, fn(rho))
        except UndefinedStatisticError as e:
            logger.warning(f"{name} undefined: {e}")
            report.undefined.append(name)
    if report.g2_zero is not None:
        report.g2_zero = max(report.g2_zero, 0.0)

    if var_trig is not None and var_bck is not None:
        report.var_trig, report.var_bck = var_trig, var_bck
        try:
            report.g2_si = g2_si(var_trig, var_bck)
        except UndefinedStatisticError as e:
            logger.warning(f"g2_si undefined: {e}")
            report.undefined.append('g2_si')

    if herald_rate_hz is not None and bandwidth_mhz is not None:
        report.spectral_brightness_per_mhz_s = spectral_brightness(herald_rate_hz, bandwidth_mhz)

    if reconstruction is not None and reconstruction.diag_errors is not None:
        report.error_method = reconstruction.error_method
        report.rho11_error = float(reconstruction.diag_errors[1])
        if report.g2_zero is not None:
            report.g2_zero_error = _g2_spread(reconstruction.bootstrap_diagonals)
    return report
