import math
from dataclasses import replace

import numpy as np
import pytest

from src.errors import DeadDetectorError, ExtractionError, InputError
from src.fock.states import photon_statistics
from src.models.quadratures import CalibrationScale, QuadratureDataset
from src.models.traces import TemporalMode, Trace, TraceSet
from src.quad.projection import (
    calibrate_vacuum, extract_dataset, histogram, phase_dependence_test, project_raw, project_trace,
)
from src.simsource.synth import synthesize_traces


@pytest.fixture
def mode():
    return TemporalMode.from_shape(np.exp(-0.5 * ((np.arange(32) - 12) / 3.0) ** 2), dt_ns=1.0)


def _exact_vacuum(mode, variance, n=400):
    """Traces c_j ψ whose projections have sample variance exactly ``variance``."""
    z = np.random.default_rng(0).normal(size=n)
    z = (z - z.mean()) / z.std(ddof=1) * math.sqrt(variance)
    return TraceSet(np.outer(z, mode.psi), dt_ns=mode.dt_ns)


def test_project_trace_examples(mode):
    cal = CalibrationScale.unit()
    sample = project_trace(Trace(2.5 * mode.psi, 1.0), mode, cal, theta=7.0)
    assert sample.value == pytest.approx(2.5, abs=1e-14)
    assert sample.phase == pytest.approx(7.0 - 2 * math.pi, abs=1e-14)

    other = np.zeros(32)
    other[12], other[13] = mode.psi[13], -mode.psi[12]
    assert project_trace(Trace(other, 1.0), mode, cal, 0.0).value == pytest.approx(0.0, abs=1e-15)


def test_projection_is_linear_and_dt_free(rng, mode):
    a, b = rng.normal(size=(2, 32))
    combined = TraceSet(np.array([3.0 * a - 0.5 * b]), dt_ns=1.0)
    raw = project_raw(combined, mode)[0]
    assert raw == pytest.approx(3.0 * np.dot(a, mode.psi) - 0.5 * np.dot(b, mode.psi), abs=1e-12)

    slow = TemporalMode(mode.psi, dt_ns=4.0)
    cal = CalibrationScale.unit()
    assert project_trace(Trace(a, 4.0), slow, cal, 0.0).value == project_trace(Trace(a, 1.0), mode, cal, 0.0).value


def test_geometry_mismatch(mode):
    cal = CalibrationScale.unit()
    with pytest.raises(ExtractionError):
        project_trace(Trace(np.ones(40), 1.0), mode, cal, 0.0)
    with pytest.raises(ExtractionError):
        project_trace(Trace(np.ones(32), 2.0), mode, cal, 0.0)

    traces = [Trace(np.ones(32), 1.0), Trace(np.ones(32), 1.0), Trace(np.ones(33), 1.0)]
    with pytest.raises(ExtractionError) as info:
        extract_dataset(traces, mode, cal)
    assert info.value.trace_index == 2
    assert "trace 2" in str(info.value)


def test_calibration_scale(mode):
    cal = calibrate_vacuum(_exact_vacuum(mode, 2.0), mode)
    assert cal.scale == pytest.approx(0.5, rel=1e-12)
    assert cal.vacuum_var_raw == pytest.approx(2.0, rel=1e-12)
    doubled = calibrate_vacuum(_exact_vacuum(mode, 2.0).scaled(2.0), mode)
    assert doubled.scale == pytest.approx(0.25, rel=1e-12)


def test_calibration_idempotent(mode):
    vacuum = _exact_vacuum(mode, 3.0)
    cal = calibrate_vacuum(vacuum, mode)
    again = calibrate_vacuum(vacuum.scaled(cal.scale), mode)
    assert again.scale == pytest.approx(1.0, rel=0.02)


def test_calibration_errors(mode):
    with pytest.raises(InputError):
        calibrate_vacuum(_exact_vacuum(mode, 1.0, n=99), mode)
    with pytest.raises(DeadDetectorError):
        calibrate_vacuum(TraceSet(np.zeros((200, 32)), dt_ns=1.0), mode)


@pytest.mark.parametrize("noise, flagged", [(0.1, False), (0.3, True)])
def test_electronic_noise_budget(small_params, noise, flagged):
    params = replace(small_params, trace=replace(small_params.trace, electronic_noise_var=noise))
    result = synthesize_traces(params, 0, 0, seed=3, n_vacuum=5000)
    cal = calibrate_vacuum(result.vacuum, result.truth.mode, electronic_noise_var=noise)
    assert cal.vacuum_var_raw == pytest.approx(0.5 + noise, rel=0.06)
    assert cal.noise_flag is flagged
    assert cal.clearance_db == pytest.approx(10 * math.log10(0.5 / noise), abs=0.6)


def test_calibration_closure_on_fresh_vacuum(small_params):
    result = synthesize_traces(small_params, 0, 0, seed=4, n_vacuum=20000)
    first = TraceSet(result.vacuum.data[:10000], 1.0)
    second = TraceSet(result.vacuum.data[10000:], 1.0)
    # any unit-norm mode will do
    mode = TemporalMode.from_shape(np.cos(np.arange(64) / 5.0), 1.0)
    cal = calibrate_vacuum(first, mode)
    dataset = extract_dataset(second, mode, cal)
    # both halves contribute to the spread
    tol = 3 * math.sqrt(dataset.variance_stderr ** 2 + 0.5 ** 2 * 2 / first.n_traces)
    assert abs(dataset.variance - 0.5) < tol


def test_heralded_variance_identity(small_params):
    result = synthesize_traces(small_params, 20000, 20000, seed=5)
    truth = result.truth
    heralded = extract_dataset(result.heralded, truth.mode, CalibrationScale.unit())
    m = photon_statistics(truth.heralded_state).mean_n
    assert abs(heralded.variance - (0.5 + m)) < 4 * heralded.variance_stderr

    background = extract_dataset(result.background, truth.mode, CalibrationScale.unit())
    assert background.variance > 0.5
    assert abs(background.variance - 0.6) < 4 * background.variance_stderr


def test_heralded_quadratures_show_no_phase_dependence(small_params):
    result = synthesize_traces(small_params, 20000, 0, seed=8, n_vacuum=5000)
    mode = result.truth.mode
    cal = calibrate_vacuum(result.vacuum, mode)
    dataset = extract_dataset(result.heralded, mode, cal, seed=9)
    outcome = phase_dependence_test(dataset)
    assert outcome.consistent(alpha=0.01)
    assert np.all(np.asarray(outcome.bin_variances) > 0.5)


def test_extract_empty_set(mode):
    dataset = extract_dataset(TraceSet(np.zeros((0, 32)), 1.0), mode, CalibrationScale.unit())
    assert len(dataset) == 0
    assert math.isnan(dataset.variance)


def test_phase_tags(rng, mode):
    traces = TraceSet(rng.normal(size=(50, 32)), 1.0)
    cal = CalibrationScale.unit()
    a = extract_dataset(traces, mode, cal, seed=3)
    b = extract_dataset(traces, mode, cal, seed=3)
    assert np.array_equal(a.phases, b.phases)
    assert np.all((a.phases >= 0) & (a.phases < 2 * math.pi))

    recorded = extract_dataset(traces, mode, cal, phases=np.full(50, -1.0))
    assert np.allclose(recorded.phases, 2 * math.pi - 1.0)
    with pytest.raises(InputError):
        extract_dataset(traces, mode, cal, phases=np.zeros(49))
    with pytest.raises(InputError):
        extract_dataset(traces, mode, cal, phases='sorted')
    bad = np.zeros(50)
    bad[7] = np.nan
    with pytest.raises(ExtractionError) as info:
        extract_dataset(traces, mode, cal, phases=bad)
    assert info.value.trace_index == 7


def test_order_preserved(rng, mode):
    traces = TraceSet(rng.normal(size=(30, 32)), 1.0)
    dataset = extract_dataset(traces, mode, CalibrationScale.unit())
    assert np.allclose(dataset.values, traces.data @ mode.psi)
    assert [s.value for s in dataset] == list(dataset.values)


def test_phase_dependence_test(rng):
    n = 40000
    phases = rng.uniform(0, 2 * math.pi, n)
    flat = QuadratureDataset(rng.normal(scale=math.sqrt(0.7), size=n), phases)
    assert phase_dependence_test(flat).consistent(alpha=0.01)

    squeezed = QuadratureDataset(rng.normal(size=n) * (1.0 + 0.3 * np.cos(2 * phases)), phases)
    result = phase_dependence_test(squeezed)
    assert not result.consistent(alpha=0.01)
    assert result.dof == 7
    assert len(result.bin_variances) == 8


def test_histogram_density(rng):
    dataset = QuadratureDataset(rng.normal(scale=0.7, size=5000), np.zeros(5000))
    centers, density = histogram(dataset, bins=50, q_range=(-5.0, 5.0))
    assert centers.shape == density.shape == (50,)
    assert np.sum(density) * (centers[1] - centers[0]) == pytest.approx(1.0, abs=1e-12)
