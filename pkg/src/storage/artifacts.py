"""Run directory: every pipeline artifact lives under one output folder."""
import json
import logging
import os
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from ..errors import FormatError
from ..models.quadratures import CalibrationScale, QuadratureDataset
from ..models.reconstruction import ReconstructionResult
from ..models.report import MeritReport
from ..models.source import GroundTruth
from ..models.traces import TemporalMode, TraceSet
from .tracefile import read_traceset, sidecar_path, write_traceset

logger = logging.getLogger(__name__)

HERALDED = 'heralded.htrc'
BACKGROUND = 'background.htrc'
VACUUM = 'vacuum.htrc'
HERALDED_PHASES = 'heralded_phases.csv'
TRUTH = 'truth.json'
MODE = 'mode.json'
VARIANCE_PROFILE = 'variance_profile.csv'
AUTOCORRELATION = 'autocorrelation.csv'
QUADRATURES = 'quadratures.csv'
BACKGROUND_QUADRATURES = 'background_quadratures.csv'
VACUUM_QUADRATURES = 'vacuum_quadratures.csv'
RHO = 'rho.json'
TRAJECTORY = 'trajectory.csv'
REPORT = 'report.json'
WIGNER_GRID = 'wigner_grid.csv'
MARGINAL_HISTOGRAM = 'marginal_histogram.csv'

ARTIFACTS = (
    HERALDED, BACKGROUND, VACUUM, HERALDED_PHASES, TRUTH, MODE, VARIANCE_PROFILE, AUTOCORRELATION,
    QUADRATURES, BACKGROUND_QUADRATURES, VACUUM_QUADRATURES, RHO, TRAJECTORY, REPORT, WIGNER_GRID, MARGINAL_HISTOGRAM,
)
QUADRATURE_HEADER = 'theta_rad,value'
FLOAT_FMT = '%.17g'


def _known_files() -> List[str]:
    names = list(ARTIFACTS)
    names += [sidecar_path(n) for n in (HERALDED, BACKGROUND, VACUUM)]
    names += [calibration_path(n) for n in (QUADRATURES, BACKGROUND_QUADRATURES, VACUUM_QUADRATURES)]
    return names


def calibration_path(path: str) -> str:
    stem, _ = os.path.splitext(path)
    return f"{stem}.calibration.json"


def write_json(path: str, data: Any) -> None:
    with open(path, 'w') as f:
        json.dump(data, f, sort_keys=True, indent=2)
        f.write('\n')


def read_json(path: str) -> Any:
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON: {e}") from e


def write_columns(path: str, header: str, columns: Sequence[np.ndarray]) -> None:
    table = np.column_stack([np.asarray(c, dtype=np.float64).ravel() for c in columns])
    np.savetxt(path, table, delimiter=',', header=header, comments='', fmt=FLOAT_FMT)


def read_columns(path: str, header: str) -> np.ndarray:
    with open(path, 'r') as f:
        first = f.readline().strip()
    if first != header:
        raise FormatError(f"{path}: expected header '{header}', found '{first}'")
    try:
        table = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from e
    n_cols = header.count(',') + 1
    if table.size == 0:
        return np.zeros((0, n_cols))
    if table.shape[1] != n_cols:
        raise FormatError(f"{path}: expected {n_cols} columns, found {table.shape[1]}")
    return table


def write_quadratures(path: str, dataset: QuadratureDataset) -> None:
    write_columns(path, QUADRATURE_HEADER, [dataset.phases, dataset.values])
    if dataset.calibration is not None:
        write_json(calibration_path(path), dataset.calibration.to_dict())


def read_quadratures(path: str) -> QuadratureDataset:
    table = read_columns(path, QUADRATURE_HEADER)
    cal_file = calibration_path(path)
    cal = CalibrationScale.from_dict(read_json(cal_file)) if os.path.exists(cal_file) else None
    return QuadratureDataset(table[:, 1], table[:, 0], calibration=cal)


class RunStore:
    """File-backed store for one pipeline run."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def exists(self, name: str) -> bool:
        return os.path.exists(self.path(name))

    # traces
    def write_traces(self, name: str, traces: TraceSet) -> str:
        write_traceset(self.path(name), traces)
        return self.path(name)

    def read_traces(self, name: str) -> TraceSet:
        return read_traceset(self.path(name))

    def write_phases(self, phases: np.ndarray) -> None:
        write_columns(self.path(HERALDED_PHASES), 'index,theta_rad', [np.arange(len(phases)), phases])

    def read_phases(self) -> np.ndarray:
        return read_columns(self.path(HERALDED_PHASES), 'index,theta_rad')[:, 1]

    # records
    def write_truth(self, truth: GroundTruth) -> None:
        write_json(self.path(TRUTH), truth.to_dict())

    def read_truth(self) -> GroundTruth:
        return GroundTruth.from_dict(read_json(self.path(TRUTH)))

    def write_mode(self, mode: TemporalMode) -> None:
        write_json(self.path(MODE), mode.to_dict())

    def read_mode(self) -> TemporalMode:
        return TemporalMode.from_dict(read_json(self.path(MODE)))

    def write_profile(self, profile: np.ndarray) -> None:
        write_columns(self.path(VARIANCE_PROFILE), 'index,value', [np.arange(len(profile)), profile])

    def write_autocorrelation(self, matrix: np.ndarray) -> None:
        np.savetxt(self.path(AUTOCORRELATION), matrix, delimiter=',', fmt=FLOAT_FMT)

    def write_quadratures(self, dataset: QuadratureDataset, name: str = QUADRATURES) -> None:
        write_quadratures(self.path(name), dataset)

    def read_quadratures(self, name: str = QUADRATURES) -> QuadratureDataset:
        return read_quadratures(self.path(name))

    def write_reconstruction(self, result: ReconstructionResult) -> None:
        write_json(self.path(RHO), result.to_dict())
        traj = result.loglik_trajectory
        write_columns(self.path(TRAJECTORY), 'iteration,loglik', [np.arange(len(traj)), traj])

    def read_reconstruction(self) -> ReconstructionResult:
        return ReconstructionResult.from_dict(read_json(self.path(RHO)))

    def write_report(self, report: MeritReport) -> None:
        write_json(self.path(REPORT), report.to_dict())

    def read_report(self) -> MeritReport:
        return MeritReport.from_dict(read_json(self.path(REPORT)))

    def write_wigner_grid(self, xs: np.ndarray, ps: np.ndarray, grid: np.ndarray) -> None:
        xx, pp = np.meshgrid(xs, ps, indexing='ij')
        write_columns(self.path(WIGNER_GRID), 'x,p,w', [xx.ravel(), pp.ravel(), grid.ravel()])

    def write_histogram(self, centers: np.ndarray, columns: Dict[str, np.ndarray]) -> None:
        names = ['q'] + list(columns)
        write_columns(self.path(MARGINAL_HISTOGRAM), ','.join(names), [centers] + list(columns.values()))

    # housekeeping
    def list_artifacts(self) -> List[Tuple[str, int]]:
        """Known artifacts present in the run directory with their sizes in bytes."""
        found = []
        for name in _known_files():
            full = self.path(name)
            if os.path.exists(full):
                found.append((name, os.path.getsize(full)))
        return found

    def clear(self) -> int:
        """Delete every known artifact; returns the number of files removed."""
        removed = 0
        for name, _ in self.list_artifacts():
            os.remove(self.path(name))
            removed += 1
        logger.info(f"Removed {removed} artifacts from {self.out_dir}")
        return removed
