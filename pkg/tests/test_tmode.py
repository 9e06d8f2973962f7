import math
from dataclasses import replace

import numpy as np
import pytest

from src.errors import DegeneracyWarning, FormatError, InputError, NoExcessModeError, UndersampledModeError
from src.config import load_config
from src.models.traces import TemporalMode, Trace, TraceSet
from src.simsource.modes import discretize_mode
from src.simsource.synth import synthesize_traces
from src.tmode.extraction import (
    accumulate_moments, autocorrelation_matrix, extract_mode, mode_bandwidth, mode_from_excess,
    mode_overlap, variance_profile,
)


@pytest.fixture
def random_traces(rng):
    return TraceSet(rng.normal(size=(1000, 32)) * np.linspace(0.5, 2.0, 32), dt_ns=1.0)


def test_second_moments_match_numpy(random_traces):
    data = random_traces.data
    assert np.allclose(variance_profile(random_traces), np.var(data, axis=0, ddof=1), rtol=1e-12)
    expected = np.cov(data, rowvar=False, bias=True)
    assert np.allclose(autocorrelation_matrix(random_traces), expected, rtol=1e-12, atol=1e-14)


def test_autocorrelation_exactly_symmetric(random_traces):
    a = autocorrelation_matrix(random_traces)
    assert np.array_equal(a, a.T)


def test_chunked_moments_agree(random_traces):
    whole = accumulate_moments(random_traces, chunk_size=5000)
    chunked = accumulate_moments(random_traces, chunk_size=7)
    assert chunked.count == whole.count
    assert np.allclose(chunked.mean, whole.mean, atol=1e-13)
    assert np.allclose(chunked.comoment, whole.comoment, rtol=1e-11, atol=1e-10)


def test_moments_bit_identical_across_threads(random_traces):
    one = accumulate_moments(random_traces, chunk_size=64, threads=1)
    many = accumulate_moments(random_traces, chunk_size=64, threads=4)
    assert np.array_equal(one.mean, many.mean)
    assert np.array_equal(one.comoment, many.comoment)


def test_trace_list_input(random_traces):
    traces = [Trace(row, 1.0) for row in random_traces.data[:50]]
    assert np.allclose(variance_profile(traces), np.var(random_traces.data[:50], axis=0, ddof=1))


def test_second_moments_need_two_traces():
    with pytest.raises(InputError):
        variance_profile(TraceSet(np.zeros((1, 16)), dt_ns=1.0))


def test_rank_one_excess_recovered():
    psi = np.exp(-0.5 * ((np.arange(40) - 15) / 4.0) ** 2)
    psi /= np.linalg.norm(psi)
    mode = mode_from_excess(2.5 * np.outer(psi, psi), dt_ns=2.0)
    assert np.allclose(mode.psi, psi, atol=1e-12)
    assert mode.purity == pytest.approx(1.0, abs=1e-12)
    assert mode.dt_ns == 2.0
    assert mode.eigenvalues[0] == pytest.approx(2.5, rel=1e-12)


def test_sign_canonical():
    psi = np.zeros(20)
    psi[5], psi[6] = -0.8, 0.6
    mode = mode_from_excess(np.outer(psi, psi), dt_ns=1.0)
    assert mode.psi[5] == pytest.approx(0.8)


def test_purity_of_two_mode_excess():
    a = np.zeros(16)
    b = np.zeros(16)
    a[3], b[9] = 1.0, 1.0
    mode = mode_from_excess(3.0 * np.outer(a, a) + np.outer(b, b), dt_ns=1.0)
    assert mode.purity == pytest.approx(0.75, abs=1e-12)
    assert mode.schmidt_number == pytest.approx(4 / 3, abs=1e-12)


def test_schmidt_number_counts_the_whole_spectrum():
    # twenty positive eigenvalues, more than the mode record keeps
    mode = mode_from_excess(np.diag([2.0] + [1.0] * 19), dt_ns=1.0)
    assert len(mode.eigenvalues) < 20
    assert mode.purity == pytest.approx(2 / 21, abs=1e-12)
    assert mode.schmidt_number == pytest.approx(10.5, abs=1e-9)


def test_no_excess_mode():
    with pytest.raises(NoExcessModeError):
        mode_from_excess(-np.eye(16), dt_ns=1.0)


def test_background_against_itself(small_params):
    background = synthesize_traces(small_params, 0, 500, seed=1).background
    with pytest.raises(NoExcessModeError):
        extract_mode(background, background)


def test_degenerate_leading_eigenvalues():
    delta = np.diag([1.0, 1.0] + [0.0] * 14)
    with pytest.warns(DegeneracyWarning):
        mode = mode_from_excess(delta, dt_ns=1.0)
    assert mode.warnings


def test_extract_mode_mismatched_geometry(rng):
    a = TraceSet(rng.normal(size=(10, 32)), dt_ns=1.0)
    b = TraceSet(rng.normal(size=(10, 40)), dt_ns=1.0)
    with pytest.raises(InputError):
        extract_mode(a, b)


def test_extract_mode_recovers_synthetic_mode(small_params):
    result = synthesize_traces(small_params, 40000, 40000, seed=11)
    mode = extract_mode(result.heralded, result.background, threads=2)
    assert mode_overlap(mode, result.truth.mode) >= 0.99
    assert np.sum(mode.psi ** 2) == pytest.approx(1.0, abs=1e-12)
    assert 0.0 < mode.purity <= 1.0


def test_gaussian_bandwidth():
    trace = load_config('paper-scale').source.trace
    full = discretize_mode(replace(trace, hd_bandwidth_mhz=None))
    # transform-limited Gaussian: 0.441 / FWHM
    assert mode_bandwidth(full) == pytest.approx(0.4413 / 11.3e-3, rel=0.02)
    assert mode_bandwidth(discretize_mode(trace)) == pytest.approx(39.0, rel=0.15)


def test_bandwidth_scales_with_sampling():
    psi = np.exp(-0.5 * ((np.arange(128) - 64) / 6.0) ** 2)
    fine = TemporalMode.from_shape(psi, dt_ns=0.5)
    coarse = TemporalMode.from_shape(psi, dt_ns=1.0)
    assert mode_bandwidth(fine) == pytest.approx(2 * mode_bandwidth(coarse), rel=1e-12)


def test_bandwidth_undersampled():
    psi = np.array([1.0, -1.0] * 16) / math.sqrt(32)
    with pytest.raises(UndersampledModeError):
        mode_bandwidth(TemporalMode(psi, dt_ns=1.0))


def test_mode_overlap_length_mismatch():
    with pytest.raises(InputError):
        mode_overlap(TemporalMode.from_shape(np.ones(16), 1.0), TemporalMode.from_shape(np.ones(20), 1.0))


def test_temporal_mode_serialization():
    mode = TemporalMode.from_shape(np.arange(1.0, 17.0), 1.0, purity=0.9, eigenvalues=[2.0, 0.1],
                                   warnings=['close call'])
    back = TemporalMode.from_dict(mode.to_dict())
    assert np.array_equal(back.psi, mode.psi)
    assert (back.purity, back.eigenvalues, back.warnings) == (0.9, [2.0, 0.1], ['close call'])
    with pytest.raises(FormatError):
        TemporalMode.from_dict({'psi': [1.0]})
    with pytest.raises(InputError):
        TemporalMode(np.ones(16), 1.0)


def test_mode_norm_tolerance():
    psi = np.zeros(16)
    psi[0] = math.sqrt(1.0 + 1e-11)
    with pytest.raises(InputError, match="unit norm"):
        TemporalMode(psi, 1.0)
    psi[0] = 1.0
    assert TemporalMode(psi, 1.0).schmidt_number == 1.0
