import logging
from typing import Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..errors import SamplerConfigurationError
from ..fock.states import marginal_pdf
from ..models.state import DensityMatrix

logger = logging.getLogger(__name__)

GRID_HALF_WIDTH = 8.0
GRID_POINTS = 2 ** 14
MASS_TOL = 1e-9


class QuadratureSampler:
    """Inverse-CDF sampler for the homodyne marginal of one state at one phase.

    For diagonal states the marginal does not depend on θ, so a single sampler
    serves every phase.
    """

    def __init__(self, rho: DensityMatrix, theta: float = 0.0,
                 half_width: float = GRID_HALF_WIDTH, n_points: int = GRID_POINTS):
        self.rho = rho
        self.theta = float(theta)
        grid = np.linspace(-half_width, half_width, n_points)
        pdf = marginal_pdf(rho, self.theta, grid)

        cdf = cumulative_trapezoid(pdf, grid, initial=0.0)
        mass = cdf[-1]
        outside = abs(rho.trace() - mass)
        if outside > MASS_TOL:
            raise SamplerConfigurationError(
                f"{outside:.3e} of the marginal lies outside [-{half_width}, {half_width}]; "
                "widen the grid or lower the cutoff"
            )
        cdf = cdf / mass

        # np.interp needs strictly increasing abscissae; flat stretches carry no mass
        keep = np.concatenate(([True], np.diff(cdf) > 0))
        self._cdf = cdf[keep]
        self._grid = grid[keep]

    def draw(self, rng: np.random.Generator, size: Optional[Union[int, Tuple[int, ...]]] = None):
        u = rng.random(size)
        return np.interp(u, self._cdf, self._grid)


def sample_quadrature(rho: DensityMatrix, theta: float, rng: np.random.Generator) -> float:
    """Draw a single quadrature value from pr(q|θ)."""
    return float(QuadratureSampler(rho, theta).draw(rng))
