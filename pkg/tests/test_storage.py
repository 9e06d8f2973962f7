import json
import os

import numpy as np
import pytest

from src.errors import FormatError
from src.models.quadratures import CalibrationScale, QuadratureDataset
from src.models.report import MeritReport
from src.models.traces import TemporalMode, TraceSet
from src.storage.artifacts import (
    QUADRATURES, REPORT, RunStore, calibration_path, read_columns, read_quadratures, write_columns,
    write_quadratures,
)
from src.storage.tracefile import (
    HEADER_DTYPE, read_meta, read_traces_csv, read_traceset, sidecar_path, write_traceset,
)


@pytest.fixture
def traces(rng):
    data = rng.normal(size=(5, 32)).astype(np.float32).astype(np.float64)
    return TraceSet(data, 2.5, 7, {'label': 'heralded', 'seed': 3})


def test_header_layout():
    assert HEADER_DTYPE.itemsize == 26


def test_traceset_round_trip(tmp_path, traces):
    path = str(tmp_path / 'h.htrc')
    write_traceset(path, traces)
    assert os.path.getsize(path) == 26 + 5 * 32 * 4

    back = read_traceset(path)
    assert np.array_equal(back.data, traces.data)
    assert back.dt_ns == 2.5
    assert back.trigger_index == 7
    assert back.meta == {'label': 'heralded', 'seed': 3}


def test_traceset_bytes_are_deterministic(tmp_path, traces):
    a, b = str(tmp_path / 'a.htrc'), str(tmp_path / 'b.htrc')
    write_traceset(a, traces)
    write_traceset(b, TraceSet(traces.data.copy(), 2.5, 7, dict(traces.meta)))
    with open(a, 'rb') as fa, open(b, 'rb') as fb:
        assert fa.read() == fb.read()
    with open(sidecar_path(a)) as fa, open(sidecar_path(b)) as fb:
        assert fa.read() == fb.read()


def test_empty_traceset_keeps_geometry(tmp_path):
    path = str(tmp_path / 'empty.htrc')
    write_traceset(path, TraceSet(np.zeros((0, 40)), 1.0, 3, n_samples=40))
    back = read_traceset(path)
    assert back.n_traces == 0
    assert back.n_samples == 40


def _corrupt(path, offset, payload):
    with open(path, 'r+b') as f:
        f.seek(offset)
        f.write(payload)


def test_bad_magic(tmp_path, traces):
    path = str(tmp_path / 'x.htrc')
    write_traceset(path, traces)
    _corrupt(path, 0, b'NOPE')
    with pytest.raises(FormatError, match="not an HTRC file"):
        read_traceset(path)


def test_bad_version(tmp_path, traces):
    path = str(tmp_path / 'x.htrc')
    write_traceset(path, traces)
    _corrupt(path, 4, np.array([9], dtype='<u2').tobytes())
    with pytest.raises(FormatError, match="version"):
        read_traceset(path)


def test_truncated_file(tmp_path, traces):
    path = str(tmp_path / 'x.htrc')
    write_traceset(path, traces)
    with open(path, 'rb') as f:
        raw = f.read()
    with open(path, 'wb') as f:
        f.write(raw[:-4])
    with pytest.raises(FormatError, match="expected"):
        read_traceset(path)
    with open(path, 'wb') as f:
        f.write(raw[:10])
    with pytest.raises(FormatError, match="too short"):
        read_traceset(path)


def test_sidecar_is_optional_and_checked(tmp_path, traces):
    path = str(tmp_path / 'x.htrc')
    write_traceset(path, traces)
    os.remove(sidecar_path(path))
    assert read_traceset(path).meta == {}
    with open(sidecar_path(path), 'w') as f:
        f.write('{broken')
    with pytest.raises(FormatError):
        read_meta(path)


def test_csv_import(tmp_path, rng):
    data = rng.normal(size=(3, 20))
    path = str(tmp_path / 'raw.csv')
    np.savetxt(path, data, delimiter=',')
    traces = read_traces_csv(path, dt_ns=1.0, trigger_index=4)
    assert np.allclose(traces.data, data)
    assert traces.meta == {'label': 'raw.csv'}

    with open(path, 'a') as f:
        f.write('1.0,2.0\n')
    with pytest.raises(FormatError):
        read_traces_csv(path, dt_ns=1.0)


def test_csv_import_rejects_short_traces(tmp_path):
    path = str(tmp_path / 'short.csv')
    np.savetxt(path, np.ones((2, 8)), delimiter=',')
    with pytest.raises(FormatError):
        read_traces_csv(path, dt_ns=1.0)


def test_quadrature_csv(tmp_path):
    cal = CalibrationScale(scale=0.7, vacuum_var_raw=1.02, n_vacuum_traces=500)
    dataset = QuadratureDataset([0.1, -2.0, 1.0 / 3.0], [0.0, 1.5, 6.0], calibration=cal)
    path = str(tmp_path / 'q.csv')
    write_quadratures(path, dataset)
    with open(path) as f:
        assert f.readline().strip() == 'theta_rad,value'
    assert os.path.exists(calibration_path(path))

    back = read_quadratures(path)
    assert np.array_equal(back.values, dataset.values)
    assert np.array_equal(back.phases, dataset.phases)
    assert back.calibration.scale == 0.7


def test_columns_reject_wrong_header(tmp_path):
    path = str(tmp_path / 'c.csv')
    write_columns(path, 'a,b', [np.arange(3), np.arange(3)])
    assert read_columns(path, 'a,b').shape == (3, 2)
    with pytest.raises(FormatError, match="header"):
        read_columns(path, 'theta_rad,value')


def test_run_store(tmp_path, traces):
    store = RunStore(str(tmp_path / 'run'))
    store.write_traces('heralded.htrc', traces)
    store.write_mode(TemporalMode.from_shape(np.hanning(32), 2.5, purity=0.9, eigenvalues=[1.0, 0.1]))
    store.write_quadratures(QuadratureDataset([0.5, 0.25], [0.0, 1.0]))
    report = MeritReport(rho11=0.5, wigner_origin=-0.01, mean_n=0.6, odd_fraction=0.52)
    store.write_report(report)

    assert store.read_traces('heralded.htrc').n_traces == 5
    assert store.read_mode().purity == pytest.approx(0.9)
    assert len(store.read_quadratures(QUADRATURES)) == 2
    assert store.read_report() == report

    names = [name for name, _ in store.list_artifacts()]
    assert 'heralded.htrc' in names and 'heralded.htrc.json' in names
    assert REPORT in names

    with open(store.path('notes.txt'), 'w') as f:
        f.write('keep me')
    assert store.clear() == len(names)
    assert store.list_artifacts() == []
    assert os.path.exists(store.path('notes.txt'))


def test_json_records_are_sorted(tmp_path):
    store = RunStore(str(tmp_path))
    store.write_report(MeritReport(rho11=0.5, wigner_origin=-0.01, mean_n=0.6, odd_fraction=0.52))
    with open(store.path(REPORT)) as f:
        text = f.read()
    keys = list(json.loads(text))
    assert keys == sorted(keys)
    assert text.endswith('\n')


def test_malformed_json_is_a_format_error(tmp_path):
    store = RunStore(str(tmp_path))
    with open(store.path(REPORT), 'w') as f:
        f.write('{"rho11": ')
    with pytest.raises(FormatError):
        store.read_report()
