from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..errors import ConfigError, FormatError
from .state import DensityMatrix

DEFAULT_CUTOFF = 10


@dataclass(frozen=True)
class Binning:
    q_min: float = -6.0
    q_max: float = 6.0
    n_bins: int = 120
    n_phase_bins: int = 1

    def __post_init__(self):
        if not self.q_min < self.q_max:
            raise ConfigError(f"binning needs q_min < q_max, got [{self.q_min}, {self.q_max}]")
        if self.n_bins < 8:
            raise ConfigError(f"binning needs at least 8 quadrature bins, got {self.n_bins}")
        if self.n_phase_bins < 1:
            raise ConfigError(f"n_phase_bins must be at least 1, got {self.n_phase_bins}")

    @property
    def width(self) -> float:
        return (self.q_max - self.q_min) / self.n_bins

    def to_dict(self) -> Dict[str, Any]:
        return {'q_min': self.q_min, 'q_max': self.q_max, 'n_bins': self.n_bins,
                'n_phase_bins': self.n_phase_bins}


@dataclass(frozen=True)
class ReconstructionConfig:
    cutoff: int = DEFAULT_CUTOFF
    max_iters: int = 2000
    tol: float = 1e-9
    binning: Optional[Binning] = None
    rseed: Optional[int] = None
    n_bootstrap: int = 0
    bootstrap_seed: Optional[int] = None
    threads: int = 1

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ConfigError(f"cutoff must be a positive integer, got {self.cutoff}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.n_bootstrap < 0:
            raise ConfigError(f"n_bootstrap must be non-negative, got {self.n_bootstrap}")
        if isinstance(self.binning, dict):
            object.__setattr__(self, 'binning', Binning(**self.binning))

    @property
    def resample_seed(self) -> int:
        """Root seed for bootstrap resamples; falls back to rseed, then 0."""
        if self.bootstrap_seed is not None:
            return self.bootstrap_seed
        return self.rseed if self.rseed is not None else 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'cutoff': self.cutoff,
            'max_iters': self.max_iters,
            'tol': self.tol,
            'binning': self.binning.to_dict() if self.binning else None,
            'rseed': self.rseed,
            'n_bootstrap': self.n_bootstrap,
            'bootstrap_seed': self.bootstrap_seed,
        }


@dataclass(eq=False)
class ReconstructionResult:
    rho: DensityMatrix
    loglik_trajectory: np.ndarray
    iterations: int
    converged: bool
    stationarity: float = float('nan')
    diag_errors: Optional[np.ndarray] = None
    element_errors: Optional[np.ndarray] = None
    bootstrap_diagonals: Optional[np.ndarray] = None
    config: Optional[ReconstructionConfig] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def loglik(self) -> float:
        return float(self.loglik_trajectory[-1])

    @property
    def error_method(self) -> Optional[str]:
        return 'bootstrap' if self.diag_errors is not None else None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'rho': self.rho.to_dict(),
            'loglik_trajectory': [float(v) for v in self.loglik_trajectory],
            'iterations': self.iterations,
            'converged': self.converged,
            'stationarity': float(self.stationarity),
            'config': self.config.to_dict() if self.config else None,
            'error_method': self.error_method,
            'warnings': list(self.warnings),
        }
        if self.diag_errors is not None:
            data['diag_errors'] = [float(v) for v in self.diag_errors]
            data['element_errors'] = [float(v) for v in np.ravel(self.element_errors)]
            data['bootstrap_diagonals'] = [[float(v) for v in row] for row in self.bootstrap_diagonals]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ReconstructionResult':
        try:
            rho = DensityMatrix.from_dict(data['rho'])
            diag_errors = data.get('diag_errors')
            element_errors = data.get('element_errors')
            boot = data.get('bootstrap_diagonals')
            config = data.get('config')
            return cls(
                rho=rho,
                loglik_trajectory=np.asarray(data['loglik_trajectory'], dtype=float),
                iterations=int(data['iterations']),
                converged=bool(data['converged']),
                stationarity=float(data.get('stationarity', float('nan'))),
                diag_errors=np.asarray(diag_errors) if diag_errors is not None else None,
                element_errors=(np.asarray(element_errors).reshape(rho.dim, rho.dim)
                                if element_errors is not None else None),
                bootstrap_diagonals=np.asarray(boot) if boot is not None else None,
                config=ReconstructionConfig(**config) if config else None,
                warnings=list(data.get('warnings', [])),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"malformed reconstruction record: {e}") from e
