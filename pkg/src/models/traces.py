from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence

import numpy as np

from ..errors import FormatError, InputError

MIN_TRACE_LENGTH = 16
MAX_TRACE_LENGTH = 2 ** 20


@dataclass(frozen=True, eq=False)
class Trace:
    """One trigger-aligned homodyne photocurrent segment in raw units."""
    samples: np.ndarray
    dt_ns: float
    trigger_index: int = 0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise InputError(f"trace must be one-dimensional, got shape {arr.shape}")
        if not MIN_TRACE_LENGTH <= arr.size <= MAX_TRACE_LENGTH:
            raise InputError(f"trace length {arr.size} outside [{MIN_TRACE_LENGTH}, {MAX_TRACE_LENGTH}]")
        if not np.all(np.isfinite(arr)):
            raise InputError("trace contains non-finite samples")
        if not self.dt_ns > 0:
            raise InputError(f"dt_ns must be positive, got {self.dt_ns}")
        object.__setattr__(self, 'samples', arr)

    def __len__(self) -> int:
        return self.samples.size


@dataclass(eq=False)
class TraceSet:
    """Homogeneous collection of traces stored as an (n_traces, n_samples) array."""
    data: np.ndarray
    dt_ns: float
    trigger_index: int = 0
    meta: Dict[str, Any] = field(default_factory=dict)
    n_samples: Optional[int] = None

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 1 and arr.size == 0:
            if self.n_samples is None:
                raise InputError("an empty TraceSet needs an explicit n_samples")
            arr = np.zeros((0, self.n_samples))
        if arr.ndim != 2:
            raise InputError(f"trace data must be two-dimensional, got shape {arr.shape}")
        if not MIN_TRACE_LENGTH <= arr.shape[1] <= MAX_TRACE_LENGTH:
            raise InputError(f"trace length {arr.shape[1]} outside [{MIN_TRACE_LENGTH}, {MAX_TRACE_LENGTH}]")
        if not np.all(np.isfinite(arr)):
            bad = int(np.argmax(~np.all(np.isfinite(arr), axis=1)))
            raise InputError(f"trace {bad} contains non-finite samples")
        if not self.dt_ns > 0:
            raise InputError(f"dt_ns must be positive, got {self.dt_ns}")
        if not 0 <= self.trigger_index < arr.shape[1]:
            raise InputError(f"trigger_index {self.trigger_index} outside the trace window")
        self.data = arr
        self.n_samples = arr.shape[1]

    @classmethod
    def from_traces(cls, traces: Sequence[Trace], meta: Optional[Dict[str, Any]] = None) -> 'TraceSet':
        """Stack individual traces, enforcing a common length, dt and trigger."""
        if not traces:
            raise InputError("cannot infer trace geometry from an empty list")
        first = traces[0]
        for i, trace in enumerate(traces):
            if len(trace) != len(first) or trace.dt_ns != first.dt_ns or trace.trigger_index != first.trigger_index:
                raise FormatError(f"trace {i} does not match the geometry of trace 0")
        return cls(np.stack([t.samples for t in traces]), first.dt_ns, first.trigger_index, dict(meta or {}))

    @property
    def n_traces(self) -> int:
        return self.data.shape[0]

    def __len__(self) -> int:
        return self.n_traces

    def __getitem__(self, index: int) -> Trace:
        return Trace(self.data[index], self.dt_ns, self.trigger_index)

    def __iter__(self) -> Iterator[Trace]:
        for i in range(self.n_traces):
            yield self[i]

    def scaled(self, factor: float) -> 'TraceSet':
        return TraceSet(self.data * factor, self.dt_ns, self.trigger_index, dict(self.meta))

    def check_compatible(self, other: 'TraceSet') -> None:
        if self.n_samples != other.n_samples or self.dt_ns != other.dt_ns:
            raise FormatError(
                f"trace sets differ in geometry: {self.n_samples} samples @ {self.dt_ns} ns "
                f"vs {other.n_samples} samples @ {other.dt_ns} ns"
            )


@dataclass(eq=False)
class TemporalMode:
    """Unit-norm discrete mode function with its purity diagnostic."""
    psi: np.ndarray
    dt_ns: float
    purity: float = 1.0
    eigenvalues: List[float] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=np.float64)
        if psi.ndim != 1 or psi.size == 0:
            raise InputError("mode function must be a non-empty vector")
        norm_sq = float(np.dot(psi, psi))
        if abs(norm_sq - 1.0) > 1e-12:
            raise InputError(f"mode function is not unit norm (sum psi^2 = {norm_sq:.15g})")
        if not 0.0 < self.purity <= 1.0 + 1e-12:
            raise InputError(f"purity {self.purity} outside (0, 1]")
        if not self.dt_ns > 0:
            raise InputError(f"dt_ns must be positive, got {self.dt_ns}")
        self.psi = psi
        self.purity = min(float(self.purity), 1.0)

    @classmethod
    def from_shape(cls, shape: np.ndarray, dt_ns: float, **kwargs) -> 'TemporalMode':
        shape = np.asarray(shape, dtype=np.float64)
        norm = np.linalg.norm(shape)
        if norm == 0:
            raise InputError("mode shape is identically zero")
        return cls(shape / norm, dt_ns, **kwargs)

    def __len__(self) -> int:
        return self.psi.size

    @property
    def schmidt_number(self) -> float:
        """Effective number of excess modes, 1 / purity over the full positive spectrum."""
        return 1.0 / self.purity

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'dt_ns': float(self.dt_ns),
            'psi': [float(v) for v in self.psi],
            'purity': float(self.purity),
        }
        if self.eigenvalues:
            data['eigenvalues'] = [float(v) for v in self.eigenvalues]
        if self.warnings:
            data['warnings'] = list(self.warnings)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TemporalMode':
        try:
            return cls(
                psi=np.asarray(data['psi'], dtype=float),
                dt_ns=float(data['dt_ns']),
                purity=float(data['purity']),
                eigenvalues=list(data.get('eigenvalues', [])),
                warnings=list(data.get('warnings', [])),
            )
        except KeyError as e:
            raise FormatError(f"mode JSON is missing {e}") from e
