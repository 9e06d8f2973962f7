import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from ..errors import FormatError, InputError

TWO_PI = 2.0 * math.pi


def _hermitize(elements: np.ndarray) -> np.ndarray:
    # (a + conj(b)) / 2 and conj((b + conj(a)) / 2) round identically, so the
    # result is Hermitian bit for bit.
    arr = np.asarray(elements, dtype=np.complex128)
    out = 0.5 * (arr + arr.conj().T)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Fock-basis density matrix truncated at ``cutoff`` photons.

    The stored elements are always exactly Hermitian; trace and positivity are
    checked by :meth:`validate` rather than on every construction, since
    intermediate iterates are allowed to be unnormalized.
    """
    elements: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.elements)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise InputError(f"density matrix must be square, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("density matrix has non-finite elements")
        object.__setattr__(self, 'elements', _hermitize(arr))

    @property
    def cutoff(self) -> int:
        return self.elements.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def trace(self) -> float:
        return float(np.real(np.trace(self.elements)))

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.elements)).copy()

    def is_diagonal(self) -> bool:
        off = self.elements - np.diag(np.diag(self.elements))
        return not np.any(off)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.elements)[0])

    def purity(self) -> float:
        return float(np.real(np.trace(self.elements @ self.elements)))

    def normalized(self) -> 'DensityMatrix':
        tr = self.trace()
        if tr <= 0:
            raise InputError(f"cannot normalize a matrix with trace {tr}")
        return DensityMatrix(self.elements / tr)

    def validate(self, trace_tol: float = 1e-10, psd_tol: float = 1e-10) -> None:
        """Raise InputError unless the matrix is a valid state."""
        if abs(self.trace() - 1.0) > trace_tol:
            raise InputError(f"trace {self.trace():.15g} differs from 1")
        lam = self.min_eigenvalue()
        if lam < -psd_tol:
            raise InputError(f"matrix not positive semidefinite (min eigenvalue {lam:.3e})")

    def with_cutoff(self, cutoff: int) -> 'DensityMatrix':
        """Zero-pad or truncate to a new cutoff (no renormalization)."""
        out = np.zeros((cutoff + 1, cutoff + 1), dtype=np.complex128)
        n = min(cutoff, self.cutoff) + 1
        out[:n, :n] = self.elements[:n, :n]
        return DensityMatrix(out)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'cutoff': self.cutoff,
            're': [float(v) for v in np.real(self.elements).ravel()],
            'im': [float(v) for v in np.imag(self.elements).ravel()],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], hermitian_tol: float = 1e-12) -> 'DensityMatrix':
        try:
            cutoff = int(data['cutoff'])
            re = np.asarray(data['re'], dtype=float)
            im = np.asarray(data['im'], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"malformed density matrix object: {e}") from e
        size = (cutoff + 1) ** 2
        if re.size != size or im.size != size:
            raise FormatError(f"expected {size} elements for cutoff {cutoff}, got re={re.size}, im={im.size}")
        arr = (re + 1j * im).reshape(cutoff + 1, cutoff + 1)
        # Readers must verify Hermiticity before symmetrizing
        if np.max(np.abs(arr - arr.conj().T)) > hermitian_tol:
            raise FormatError("density matrix in file is not Hermitian")
        return cls(arr)


@dataclass(frozen=True)
class QuadratureSample:
    """One homodyne outcome in vacuum-variance-1/2 units."""
    value: float
    phase: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and math.isfinite(self.phase)):
            raise InputError(f"non-finite quadrature sample ({self.value}, {self.phase})")
        object.__setattr__(self, 'value', float(self.value))
        object.__setattr__(self, 'phase', normalize_phase(self.phase))

    def to_dict(self) -> Dict[str, float]:
        return {'value': self.value, 'phase': self.phase}


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """POVM element of a (possibly binned) quadrature measurement."""
    elements: np.ndarray
    q: float = 0.0
    theta: float = 0.0
    bin_width: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'elements', _hermitize(self.elements))

    @property
    def cutoff(self) -> int:
        return self.elements.shape[0] - 1

    def expectation(self, rho: DensityMatrix) -> float:
        return float(np.real(np.trace(self.elements @ rho.elements)))


def normalize_phase(theta):
    """Map phases into [0, 2π); works on scalars and arrays."""
    wrapped = np.mod(theta, TWO_PI)
    # np.mod can return exactly 2π for tiny negative inputs
    wrapped = np.where(wrapped >= TWO_PI, 0.0, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped
