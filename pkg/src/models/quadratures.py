import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Optional

import numpy as np

from ..errors import FormatError, InputError
from .state import QuadratureSample, normalize_phase

MIN_VACUUM_TRACES = 100


@dataclass(frozen=True)
class CalibrationScale:
    """Raw-to-quadrature scale fixed by the vacuum variance.

    ``clearance_db`` compares the projected shot noise with the electronic
    noise of the same projection when the latter is known.
    """
    scale: float
    vacuum_var_raw: float
    n_vacuum_traces: int
    electronic_noise_var_raw: Optional[float] = None
    clearance_db: Optional[float] = None
    noise_flag: bool = False

    def __post_init__(self):
        if not self.scale > 0:
            raise InputError(f"calibration scale must be positive, got {self.scale}")
        if self.n_vacuum_traces < MIN_VACUUM_TRACES:
            raise InputError(f"calibration needs at least {MIN_VACUUM_TRACES} vacuum traces, got {self.n_vacuum_traces}")

    @classmethod
    def unit(cls) -> 'CalibrationScale':
        return cls(scale=1.0, vacuum_var_raw=0.5, n_vacuum_traces=MIN_VACUUM_TRACES)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'scale': self.scale,
            'vacuum_var_raw': self.vacuum_var_raw,
            'n_vacuum_traces': self.n_vacuum_traces,
            'electronic_noise_var_raw': self.electronic_noise_var_raw,
            'clearance_db': self.clearance_db,
            'noise_flag': self.noise_flag,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CalibrationScale':
        try:
            return cls(
                scale=float(data['scale']),
                vacuum_var_raw=float(data['vacuum_var_raw']),
                n_vacuum_traces=int(data['n_vacuum_traces']),
                electronic_noise_var_raw=data.get('electronic_noise_var_raw'),
                clearance_db=data.get('clearance_db'),
                noise_flag=bool(data.get('noise_flag', False)),
            )
        except KeyError as e:
            raise FormatError(f"calibration record is missing {e}") from e


@dataclass(eq=False)
class QuadratureDataset:
    """Ordered homodyne samples kept as parallel arrays."""
    values: np.ndarray
    phases: np.ndarray
    calibration: Optional[CalibrationScale] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        phases = np.asarray(self.phases, dtype=np.float64).ravel()
        if values.shape != phases.shape:
            raise InputError(f"{values.size} values but {phases.size} phases")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(phases))):
            raise InputError("quadrature dataset contains non-finite entries")
        self.values = values
        self.phases = np.atleast_1d(normalize_phase(phases)).astype(np.float64)

    def __len__(self) -> int:
        return self.values.size

    def __iter__(self) -> Iterator[QuadratureSample]:
        for value, phase in zip(self.values, self.phases):
            yield QuadratureSample(float(value), float(phase))

    def __getitem__(self, index: int) -> QuadratureSample:
        return QuadratureSample(float(self.values[index]), float(self.phases[index]))

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if len(self) else math.nan

    @property
    def variance(self) -> float:
        return float(np.var(self.values, ddof=1)) if len(self) > 1 else math.nan

    @property
    def variance_stderr(self) -> float:
        """Standard error of the sample variance from the fourth central moment."""
        n = len(self)
        if n < 2:
            return math.nan
        centered = self.values - self.values.mean()
        m4 = float(np.mean(centered ** 4))
        m2 = float(np.mean(centered ** 2))
        return math.sqrt(max(m4 - m2 * m2 * (n - 3) / (n - 1), 0.0) / n)

    def subset(self, indices) -> 'QuadratureDataset':
        return QuadratureDataset(self.values[indices], self.phases[indices], self.calibration, dict(self.meta))

    def summary(self) -> Dict[str, Any]:
        return {'n_samples': len(self), 'mean': self.mean, 'variance': self.variance}
