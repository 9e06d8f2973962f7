from dataclasses import replace

import numpy as np
import pytest
import yaml

from check_run import check_run
from clear_run import clear_run
from main import cmd_mode, cmd_pipeline, cmd_simulate, main
from src.config import apply_overrides, load_config
from src.errors import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK
from src.fock.states import wigner_origin
from src.storage import artifacts
from src.storage.artifacts import RunStore, read_columns
from src.tmode.extraction import mode_overlap

SMALL_CONFIG = {
    'source': {
        'lambda_sq': 0.16, 'eta_signal': 0.52, 'eta_idler': 0.05, 'false_herald_prob': 0.01,
        'bg_thermal_n': 0.1, 'cutoff': 6, 'herald_rate_hz': 300000.0,
        'trace': {'n_samples': 64, 'dt_ns': 1.0, 'trigger_index': 10, 'mode_shape': 'gaussian',
                  'mode_center_ns': 12.0, 'fwhm_ns': 8.0},
    },
    'acquisition': {'n_heralds': 3000, 'n_background': 3000, 'n_vacuum': 3000, 'seed': 5},
    'mode_extraction': {'phase_seed': 1},
    'reconstruction': {'cutoff': 4, 'max_iters': 200, 'tol': 1.0e-8},
    'report': {'wigner_points': 21, 'histogram_bins': 40},
}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / 'small.yaml'
    path.write_text(yaml.safe_dump(SMALL_CONFIG))
    return str(path)


def _file_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


def test_presets_command():
    assert main(['presets']) == EXIT_OK


def test_pipeline_writes_every_artifact(tmp_path, small_config):
    out = str(tmp_path / 'run')
    assert main(['pipeline', '--config', small_config, '--out', out]) == EXIT_OK

    store = RunStore(out)
    for name in artifacts.ARTIFACTS:
        assert store.exists(name), name

    report = store.read_report()
    result = store.read_reconstruction()
    assert report.rho11 == pytest.approx(result.rho.diagonal()[1])
    assert report.wigner_origin == pytest.approx(wigner_origin(result.rho))
    assert report.herald_rate_hz == 300000.0
    assert report.bandwidth_mhz > 0
    assert report.spectral_brightness_per_mhz_s == pytest.approx(300000.0 / report.bandwidth_mhz)
    assert np.all(np.diff(result.loglik_trajectory) >= -1e-9)

    grid = read_columns(store.path(artifacts.WIGNER_GRID), 'x,p,w')
    assert grid.shape == (21 * 21, 3)
    hist = read_columns(store.path(artifacts.MARGINAL_HISTOGRAM), 'q,heralded,vacuum,reconstructed')
    assert hist.shape == (40, 4)


def test_bit_exact_runs_are_identical(tmp_path, small_config):
    first, second = str(tmp_path / 'a'), str(tmp_path / 'b')
    for out in (first, second):
        assert main(['pipeline', '--config', small_config, '--out', out, '--bit-exact']) == EXIT_OK
    for name in (artifacts.REPORT, artifacts.RHO, artifacts.QUADRATURES, artifacts.HERALDED):
        assert _file_bytes(f"{first}/{name}") == _file_bytes(f"{second}/{name}"), name


def test_seed_override_changes_traces(tmp_path, small_config):
    first, second = str(tmp_path / 'a'), str(tmp_path / 'b')
    assert main(['simulate', '--config', small_config, '--out', first]) == EXIT_OK
    assert main(['simulate', '--config', small_config, '--out', second, '--seed', '6']) == EXIT_OK
    assert _file_bytes(f"{first}/{artifacts.HERALDED}") != _file_bytes(f"{second}/{artifacts.HERALDED}")


def test_stage_by_stage_matches_inputs(tmp_path, small_config):
    out = str(tmp_path / 'run')
    common = ['--config', small_config, '--out', out]
    assert main(['simulate'] + common) == EXIT_OK
    assert main(['mode', f"{out}/{artifacts.HERALDED}", f"{out}/{artifacts.BACKGROUND}"] + common) == EXIT_OK
    assert main(['extract', f"{out}/{artifacts.HERALDED}", f"{out}/{artifacts.MODE}",
                 f"{out}/{artifacts.VACUUM}", '--background', f"{out}/{artifacts.BACKGROUND}"] + common) == EXIT_OK
    assert main(['reconstruct', f"{out}/{artifacts.QUADRATURES}", '--cutoff', '3'] + common) == EXIT_OK
    assert main(['analyze', f"{out}/{artifacts.RHO}", '--mode', f"{out}/{artifacts.MODE}",
                 '--quadratures', f"{out}/{artifacts.QUADRATURES}",
                 '--background-quadratures', f"{out}/{artifacts.BACKGROUND_QUADRATURES}",
                 '--rate-hz', '100000'] + common) == EXIT_OK

    store = RunStore(out)
    assert store.read_reconstruction().rho.cutoff == 3
    report = store.read_report()
    assert report.herald_rate_hz == 100000.0
    assert report.g2_si is not None and report.g2_si > 1


def test_background_against_itself_has_no_mode(tmp_path, small_config):
    out = str(tmp_path / 'run')
    assert main(['simulate', '--config', small_config, '--out', out]) == EXIT_OK
    background = f"{out}/{artifacts.BACKGROUND}"
    assert main(['mode', background, background, '--out', out]) == EXIT_NUMERICAL


def test_mismatched_traces_are_an_input_error(tmp_path, small_config, rng):
    out = str(tmp_path / 'run')
    assert main(['pipeline', '--config', small_config, '--out', out]) == EXIT_OK
    short = str(tmp_path / 'short.csv')
    np.savetxt(short, rng.normal(size=(120, 32)), delimiter=',')
    code = main(['extract', short, f"{out}/{artifacts.MODE}", short, '--out', str(tmp_path / 'x')])
    assert code == EXIT_INPUT


def test_missing_input_file(tmp_path):
    assert main(['reconstruct', str(tmp_path / 'absent.csv'), '--out', str(tmp_path)]) == EXIT_INPUT


def test_unknown_config_key(tmp_path):
    path = tmp_path / 'bad.yaml'
    path.write_text(yaml.safe_dump({'source': {'lamda_sq': 0.1}}))
    assert main(['simulate', '--config', str(path), '--out', str(tmp_path)]) == EXIT_INPUT


def test_check_and_clear_run(tmp_path, small_config, capsys):
    out = str(tmp_path / 'run')
    assert main(['pipeline', '--config', small_config, '--out', out]) == EXIT_OK
    assert check_run(out)
    printed = capsys.readouterr().out
    assert 'Artifacts' in printed and 'Reconstruction' in printed

    clear_run(out)
    assert RunStore(out).list_artifacts() == []
    assert not check_run(str(tmp_path / 'absent'))


def _preset(name, tmp_path, **reconstruction):
    config = apply_overrides(load_config(name), out_dir=str(tmp_path))
    if reconstruction:
        config.reconstruction = replace(config.reconstruction, **reconstruction)
    return config


@pytest.mark.slow
def test_paper_scale_closed_loop(tmp_path):
    config = _preset('paper-scale', tmp_path, n_bootstrap=0)
    report = cmd_pipeline(config, str(tmp_path))
    store = RunStore(str(tmp_path))
    truth = store.read_truth()
    result = store.read_reconstruction()

    assert report.rho11 == pytest.approx(truth.heralded_state.diagonal()[1], abs=0.015)
    assert report.wigner_origin < 0
    assert report.g2_si > 1
    peak_ratio = store.read_quadratures().variance / store.read_quadratures(artifacts.VACUUM_QUADRATURES).variance
    assert peak_ratio == pytest.approx(2.247, abs=0.25)
    assert mode_overlap(store.read_mode(), truth.mode) >= 0.99
    assert report.bandwidth_mhz == pytest.approx(39.0, rel=0.15)
    assert 6000 <= report.spectral_brightness_per_mhz_s <= 9500
    assert result.rho.min_eigenvalue() >= -1e-10


@pytest.mark.slow
def test_low_gain_regime(tmp_path):
    config = _preset('low-gain', tmp_path)
    report = cmd_pipeline(config, str(tmp_path))
    truth = RunStore(str(tmp_path)).read_truth()

    p_true = truth.heralded_state.diagonal()
    assert report.rho11 == pytest.approx(0.21, abs=0.03)
    assert report.rho11 == pytest.approx(p_true[1], abs=0.03)
    # two-photon weight is a few parts in 1e3, so g2 is resolved only to its bootstrap spread
    n = np.arange(p_true.size)
    true_g2 = (n * (n - 1)) @ p_true / (n @ p_true) ** 2
    assert true_g2 <= 0.13
    assert report.g2_zero <= 0.13 + 3 * report.g2_zero_error


@pytest.mark.slow
def test_sidelobe_mode_recovered(tmp_path):
    config = _preset('sidelobe', tmp_path)
    cmd_simulate(config, str(tmp_path))
    store = RunStore(str(tmp_path))
    mode = cmd_mode(store.read_traces(artifacts.HERALDED), store.read_traces(artifacts.BACKGROUND),
                    str(tmp_path))
    truth = store.read_truth()
    assert mode_overlap(mode, truth.mode) >= 0.99
    # the sidelobes survive extraction
    assert np.min(mode.psi) < -0.05 * np.max(np.abs(mode.psi))
