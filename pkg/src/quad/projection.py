"""Quadrature values from traces: mode projection and vacuum calibration.

A quadrature is the plain inner product of a trace with the unit-norm mode
samples, times the vacuum calibration scale. No dt factor enters.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import chi2

from ..errors import DeadDetectorError, ExtractionError, InputError
from ..models.quadratures import MIN_VACUUM_TRACES, CalibrationScale, QuadratureDataset
from ..models.state import TWO_PI, QuadratureSample, normalize_phase
from ..models.traces import TemporalMode, Trace, TraceSet

logger = logging.getLogger(__name__)

RANDOM_UNIFORM = 'random-uniform'
NOISE_FLAG_RATIO = 0.5


def _check_geometry(n_samples: int, dt_ns: float, mode: TemporalMode, trace_index: Optional[int] = None) -> None:
    if n_samples != len(mode):
        raise ExtractionError(f"trace has {n_samples} samples but the mode has {len(mode)}", trace_index)
    if not math.isclose(dt_ns, mode.dt_ns, rel_tol=1e-12):
        raise ExtractionError(f"trace dt {dt_ns} ns differs from mode dt {mode.dt_ns} ns", trace_index)


def project_trace(trace: Trace, mode: TemporalMode, cal: CalibrationScale, theta: float) -> QuadratureSample:
    _check_geometry(len(trace), trace.dt_ns, mode)
    return QuadratureSample(cal.scale * float(np.dot(trace.samples, mode.psi)), theta)


def project_raw(traces: TraceSet, mode: TemporalMode) -> np.ndarray:
    """Unscaled projections of every trace, in trace order."""
    _check_geometry(traces.n_samples, traces.dt_ns, mode)
    return traces.data @ mode.psi


def calibrate_vacuum(vacuum: TraceSet, mode: TemporalMode,
                     electronic_noise_var: Optional[float] = None) -> CalibrationScale:
    """Scale that brings the projected vacuum variance to 1/2.

    Args:
        vacuum: Traces recorded with the signal blocked.
        mode: Projection mode.
        electronic_noise_var: Per-sample electronic noise variance in raw units,
            if known; enables the shot-noise clearance diagnostic.
    """
    if vacuum.n_traces < MIN_VACUUM_TRACES:
        raise InputError(f"calibration needs at least {MIN_VACUUM_TRACES} vacuum traces, got {vacuum.n_traces}")
    raw = project_raw(vacuum, mode)
    var = float(np.var(raw, ddof=1))
    if not var > 0:
        raise DeadDetectorError("projected vacuum variance is zero; detector output carries no noise")

    clearance_db = None
    noise_flag = False
    if electronic_noise_var is not None:
        # unit-norm ψ passes white noise variance through unchanged
        shot = var - electronic_noise_var
        if electronic_noise_var > 0 and shot > 0:
            clearance_db = 10.0 * math.log10(shot / electronic_noise_var)
        noise_flag = shot <= 0 or electronic_noise_var / shot > NOISE_FLAG_RATIO
        if noise_flag:
            logger.warning(f"Electronic noise {electronic_noise_var:.4g} is large against shot noise {shot:.4g}")

    cal = CalibrationScale(
        scale=math.sqrt(0.5 / var),
        vacuum_var_raw=var,
        n_vacuum_traces=vacuum.n_traces,
        electronic_noise_var_raw=electronic_noise_var,
        clearance_db=clearance_db,
        noise_flag=noise_flag,
    )
    logger.info(f"Vacuum calibration: raw variance {var:.6g} from {vacuum.n_traces} traces, scale {cal.scale:.6g}")
    return cal


def _resolve_phases(n: int, phases: Union[str, Sequence[float], np.ndarray], seed: int) -> np.ndarray:
    if isinstance(phases, str):
        if phases != RANDOM_UNIFORM:
            raise InputError(f"unknown phase mode '{phases}' (expected '{RANDOM_UNIFORM}' or per-trace values)")
        return np.random.default_rng(seed).uniform(0.0, TWO_PI, n)
    arr = np.asarray(phases, dtype=np.float64).ravel()
    if arr.size != n:
        raise InputError(f"{arr.size} phases supplied for {n} traces")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise ExtractionError("phase is not finite", int(bad[0]))
    return normalize_phase(arr)


def extract_dataset(heralded: Union[TraceSet, Sequence[Trace]], mode: TemporalMode, cal: CalibrationScale,
                    phases: Union[str, Sequence[float], np.ndarray] = RANDOM_UNIFORM,
                    seed: int = 0) -> QuadratureDataset:
    """One calibrated sample per trace, in trace order.

    Args:
        heralded: Traces to project; a plain list is checked trace by trace.
        mode: Projection mode.
        cal: Vacuum calibration.
        phases: Per-trace LO phases, or 'random-uniform' for phase-randomized data.
        seed: Seed for the random-uniform phase tags.
    """
    if isinstance(heralded, TraceSet):
        if heralded.n_traces:
            _check_geometry(heralded.n_samples, heralded.dt_ns, mode)
        data = heralded.data
    else:
        for i, trace in enumerate(heralded):
            _check_geometry(len(trace), trace.dt_ns, mode, trace_index=i)
        data = np.array([t.samples for t in heralded]).reshape(len(heralded), len(mode))

    values = cal.scale * (data @ mode.psi)
    theta = _resolve_phases(values.size, phases, seed)
    dataset = QuadratureDataset(values, theta, calibration=cal)
    if len(dataset) > 1:
        logger.info(f"Extracted {len(dataset)} quadratures: mean {dataset.mean:.4f}, variance {dataset.variance:.4f}")
    return dataset


@dataclass(frozen=True)
class PhaseDependence:
    chi2: float
    dof: int
    p_value: float
    bin_variances: Tuple[float, ...]

    def consistent(self, alpha: float = 0.01) -> bool:
        return self.p_value >= alpha


def phase_dependence_test(dataset: QuadratureDataset, n_bins: int = 8) -> PhaseDependence:
    """χ² test that the quadrature variance is the same in every phase bin.

    Each bin variance is weighted by its fourth-moment standard error, so the
    test does not assume Gaussian statistics.
    """
    if n_bins < 2:
        raise InputError(f"need at least 2 phase bins, got {n_bins}")
    edges = np.linspace(0.0, TWO_PI, n_bins + 1)
    which = np.clip(np.digitize(dataset.phases, edges) - 1, 0, n_bins - 1)
    variances, errors = [], []
    for b in range(n_bins):
        sub = dataset.subset(which == b)
        if len(sub) < 4:
            raise InputError(f"phase bin {b} holds only {len(sub)} samples")
        variances.append(sub.variance)
        errors.append(sub.variance_stderr)
    v = np.asarray(variances)
    w = 1.0 / np.asarray(errors) ** 2
    pooled = float(np.sum(w * v) / np.sum(w))
    stat = float(np.sum(w * (v - pooled) ** 2))
    dof = n_bins - 1
    return PhaseDependence(stat, dof, float(chi2.sf(stat, dof)), tuple(float(x) for x in v))


def histogram(dataset: QuadratureDataset, bins: int = 100,
              q_range: Tuple[float, float] = (-5.0, 5.0)) -> Tuple[np.ndarray, np.ndarray]:
    """Bin centers and probability density of the quadrature values."""
    counts, edges = np.histogram(dataset.values, bins=bins, range=q_range)
    width = edges[1] - edges[0]
    density = counts / (max(len(dataset), 1) * width)
    return 0.5 * (edges[:-1] + edges[1:]), density
