from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..errors import ConfigError, InputError
from .state import DensityMatrix
from .traces import MAX_TRACE_LENGTH, MIN_TRACE_LENGTH, TemporalMode

MODE_SHAPES = ('gaussian', 'sidelobe', 'explicit')


def _reject_unknown(cls, data: Dict[str, Any], section: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {', '.join(unknown)}")


@dataclass
class TraceParams:
    """Acquisition window and the shape of the heralded temporal mode.

    ``mode_center_ns`` is measured from the trigger sample. ``hd_bandwidth_mhz``
    is the effective detection bandwidth; ``None`` keeps the full Nyquist band.
    """
    n_samples: int = 180
    dt_ns: float = 1.0
    trigger_index: int = 40
    mode_shape: Union[str, List[float]] = 'gaussian'
    mode_center_ns: float = 10.0
    fwhm_ns: float = 11.3
    sidelobe_zero_ns: float = 14.0
    envelope_sigma_ns: float = 20.0
    hd_bandwidth_mhz: Optional[float] = None
    gain: float = 1.0
    electronic_noise_var: float = 0.0

    def __post_init__(self):
        if not MIN_TRACE_LENGTH <= self.n_samples <= MAX_TRACE_LENGTH:
            raise InputError(f"n_samples {self.n_samples} outside [{MIN_TRACE_LENGTH}, {MAX_TRACE_LENGTH}]")
        if not self.dt_ns > 0:
            raise InputError(f"dt_ns must be positive, got {self.dt_ns}")
        if not 0 <= self.trigger_index < self.n_samples:
            raise InputError(f"trigger_index {self.trigger_index} outside the window")
        if isinstance(self.mode_shape, str):
            if self.mode_shape not in MODE_SHAPES[:2]:
                raise InputError(f"unknown mode shape '{self.mode_shape}' (expected one of {MODE_SHAPES})")
        elif len(self.mode_shape) != self.n_samples:
            raise InputError(f"explicit mode shape has {len(self.mode_shape)} samples, window has {self.n_samples}")
        if not self.fwhm_ns > 0 or not self.sidelobe_zero_ns > 0 or not self.envelope_sigma_ns > 0:
            raise InputError("mode widths must be positive")
        if self.hd_bandwidth_mhz is not None and not self.hd_bandwidth_mhz > 0:
            raise InputError(f"hd_bandwidth_mhz must be positive, got {self.hd_bandwidth_mhz}")
        if not self.gain > 0:
            raise InputError(f"gain must be positive, got {self.gain}")
        if not self.electronic_noise_var >= 0:
            raise InputError(f"electronic_noise_var must be non-negative, got {self.electronic_noise_var}")

    @property
    def shape_name(self) -> str:
        return self.mode_shape if isinstance(self.mode_shape, str) else 'explicit'

    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        if not isinstance(self.mode_shape, str):
            data['mode_shape'] = [float(v) for v in self.mode_shape]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TraceParams':
        _reject_unknown(cls, data, 'source.trace')
        return cls(**data)


@dataclass
class SourceParams:
    """Effective parameters of the heralded two-mode squeezed source.

    ``lambda_sq`` is λ², the ratio of successive TMSV photon-number weights.
    """
    lambda_sq: float = 0.16
    eta_signal: float = 0.52
    eta_idler: float = 0.05
    false_herald_prob: float = 0.01
    bg_thermal_n: float = 0.1
    cutoff: int = 10
    herald_rate_hz: Optional[float] = None
    trace: TraceParams = field(default_factory=TraceParams)

    def __post_init__(self):
        if not 0.0 <= self.lambda_sq < 1.0:
            raise InputError(f"lambda_sq must lie in [0, 1), got {self.lambda_sq}")
        for name in ('eta_signal', 'eta_idler', 'false_herald_prob'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InputError(f"{name} must lie in [0, 1], got {value}")
        if not self.bg_thermal_n >= 0:
            raise InputError(f"bg_thermal_n must be non-negative, got {self.bg_thermal_n}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise InputError(f"cutoff must be a positive integer, got {self.cutoff}")
        if self.herald_rate_hz is not None and not self.herald_rate_hz > 0:
            raise InputError(f"herald_rate_hz must be positive, got {self.herald_rate_hz}")
        if isinstance(self.trace, dict):
            self.trace = TraceParams.from_dict(self.trace)

    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: getattr(self, f.name) for f in fields(self) if f.name != 'trace'}
        data['trace'] = self.trace.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SourceParams':
        _reject_unknown(cls, data, 'source')
        data = dict(data)
        if 'trace' in data:
            data['trace'] = TraceParams.from_dict(data['trace'])
        return cls(**data)


@dataclass(eq=False)
class GroundTruth:
    heralded_state: DensityMatrix
    background_state: DensityMatrix
    mode: TemporalMode
    herald_rate_hint: Optional[float] = None
    herald_probability: float = 0.0
    basis_size: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'heralded_state': self.heralded_state.to_dict(),
            'background_state': self.background_state.to_dict(),
            'mode': self.mode.to_dict(),
            'herald_rate_hint': self.herald_rate_hint,
            'herald_probability': self.herald_probability,
            'basis_size': self.basis_size,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GroundTruth':
        return cls(
            heralded_state=DensityMatrix.from_dict(data['heralded_state']),
            background_state=DensityMatrix.from_dict(data['background_state']),
            mode=TemporalMode.from_dict(data['mode']),
            herald_rate_hint=data.get('herald_rate_hint'),
            herald_probability=float(data.get('herald_probability', 0.0)),
            basis_size=int(data.get('basis_size', 0)),
        )
