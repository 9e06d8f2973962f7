"""HTRC trace files.

Layout (little endian): magic "HTRC", version u16, n_traces u32,
samples_per_trace u32, dt_ns f64, trigger_index u32, then the samples as f32
in row-major order. Free-form metadata lives in a JSON sidecar ``<file>.json``.
"""
import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np

from ..errors import FormatError, InputError
from ..models.traces import TraceSet

logger = logging.getLogger(__name__)

MAGIC = b'HTRC'
VERSION = 1
HEADER_DTYPE = np.dtype([
    ('magic', 'S4'),
    ('version', '<u2'),
    ('n_traces', '<u4'),
    ('samples_per_trace', '<u4'),
    ('dt_ns', '<f8'),
    ('trigger_index', '<u4'),
])
SAMPLE_DTYPE = np.dtype('<f4')


def sidecar_path(path: str) -> str:
    return f"{path}.json"


def write_traceset(path: str, traces: TraceSet) -> None:
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header['magic'] = MAGIC
    header['version'] = VERSION
    header['n_traces'] = traces.n_traces
    header['samples_per_trace'] = traces.n_samples
    header['dt_ns'] = traces.dt_ns
    header['trigger_index'] = traces.trigger_index
    with open(path, 'wb') as f:
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(traces.data, dtype=SAMPLE_DTYPE).tobytes())
    with open(sidecar_path(path), 'w') as f:
        json.dump(traces.meta, f, sort_keys=True, indent=2)
        f.write('\n')
    logger.debug(f"Wrote {traces.n_traces} traces to {path}")


def read_meta(path: str) -> Dict[str, Any]:
    meta_file = sidecar_path(path)
    if not os.path.exists(meta_file):
        return {}
    try:
        with open(meta_file, 'r') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{meta_file}: invalid JSON: {e}") from e


def read_traceset(path: str) -> TraceSet:
    with open(path, 'rb') as f:
        raw = f.read()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise FormatError(f"{path}: file too short for an HTRC header")
    header = np.frombuffer(raw[:HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    if bytes(header['magic']) != MAGIC:
        raise FormatError(f"{path}: not an HTRC file (magic {bytes(header['magic'])!r})")
    if int(header['version']) != VERSION:
        raise FormatError(f"{path}: unsupported HTRC version {int(header['version'])}")

    n_traces = int(header['n_traces'])
    n_samples = int(header['samples_per_trace'])
    expected = HEADER_DTYPE.itemsize + n_traces * n_samples * SAMPLE_DTYPE.itemsize
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {n_traces}x{n_samples} traces, found {len(raw)}")

    data = np.frombuffer(raw[HEADER_DTYPE.itemsize:], dtype=SAMPLE_DTYPE).reshape(n_traces, n_samples)
    try:
        return TraceSet(data.astype(np.float64), float(header['dt_ns']), int(header['trigger_index']),
                        read_meta(path), n_samples=n_samples)
    except InputError as e:
        raise FormatError(f"{path}: {e}") from e


def read_traces_csv(path: str, dt_ns: float, trigger_index: int = 0,
                    meta: Optional[Dict[str, Any]] = None) -> TraceSet:
    """Import one trace per row from a comma-separated file."""
    try:
        data = np.loadtxt(path, delimiter=',', ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise FormatError(f"{path}: rows are not a homogeneous numeric table: {e}") from e
    try:
        return TraceSet(data, dt_ns, trigger_index, dict(meta or {'label': os.path.basename(path)}))
    except InputError as e:
        raise FormatError(f"{path}: {e}") from e
