"""Measurement records in the form the likelihood iteration consumes.

Unbinned data keeps one rank-1 projector v_j v_j† per sample. Binned data keeps
one bin-averaged projector per (phase bin, quadrature bin), so probabilities
are densities in both cases and log-likelihoods are directly comparable.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List

import numpy as np

from ..errors import InputError
from ..fock.basis import binned_overlaps, quadrature_vectors
from ..models.quadratures import QuadratureDataset
from ..models.reconstruction import Binning
from ..models.state import TWO_PI

logger = logging.getLogger(__name__)

CHUNK_SIZE = 65536
TAIL_MARGIN = 8.0
TAIL_PANEL_WIDTH = 0.5


class MeasurementData:
    """Interface shared by unbinned and binned records."""
    frequencies: np.ndarray

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def probabilities(self, rho: np.ndarray, fixed_order: bool = False) -> np.ndarray:
        raise NotImplementedError

    def r_operator(self, scaled: np.ndarray) -> np.ndarray:
        """Σ_j s_j Π_j for per-event scalars s_j."""
        raise NotImplementedError

    def resample(self, rng: np.random.Generator) -> 'MeasurementData':
        raise NotImplementedError

    def __len__(self) -> int:
        return self.frequencies.size


@dataclass(eq=False)
class UnbinnedData(MeasurementData):
    vectors: np.ndarray
    frequencies: np.ndarray
    threads: int = 1

    @classmethod
    def from_dataset(cls, dataset: QuadratureDataset, cutoff: int, threads: int = 1) -> 'UnbinnedData':
        if len(dataset) == 0:
            raise InputError("cannot reconstruct from an empty dataset")
        vectors = quadrature_vectors(dataset.values, dataset.phases, cutoff)
        return cls(vectors, np.full(len(dataset), 1.0 / len(dataset)), threads)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def probabilities(self, rho: np.ndarray, fixed_order: bool = False) -> np.ndarray:
        v = self.vectors
        if not fixed_order:
            return np.real(np.sum((v.conj() @ rho) * v, axis=1))
        # elementwise only, so each p_j is independent of its row position
        acc = np.zeros(v.shape[0], dtype=np.complex128)
        for m in range(self.dim):
            acc += v[:, m].conj() * np.sum(rho[m][None, :] * v, axis=1)
        return np.real(acc)

    def _partial_r(self, start: int, scaled: np.ndarray) -> np.ndarray:
        block = self.vectors[start:start + CHUNK_SIZE]
        return (block.T * scaled[start:start + CHUNK_SIZE]) @ block.conj()

    def r_operator(self, scaled: np.ndarray) -> np.ndarray:
        starts = list(range(0, self.vectors.shape[0], CHUNK_SIZE))
        if self.threads > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                parts = list(pool.map(lambda s: self._partial_r(s, scaled), starts))
        else:
            parts = [self._partial_r(s, scaled) for s in starts]
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for part in parts:
            out += part
        return out

    def resample(self, rng: np.random.Generator) -> 'UnbinnedData':
        idx = rng.integers(0, len(self), size=len(self))
        return UnbinnedData(self.vectors[idx], self.frequencies[idx] / self.frequencies[idx].sum(), self.threads)

    def permuted(self, order: np.ndarray) -> 'UnbinnedData':
        return UnbinnedData(self.vectors[order], self.frequencies[order], self.threads)


@dataclass(eq=False)
class BinnedData(MeasurementData):
    projectors: np.ndarray
    frequencies: np.ndarray
    n_samples: int = 0

    def __post_init__(self):
        self.projectors = np.asarray(self.projectors, dtype=np.complex128)
        self.frequencies = np.asarray(self.frequencies, dtype=np.float64)
        if self.projectors.shape[0] != self.frequencies.size:
            raise InputError(f"{self.projectors.shape[0]} projectors but {self.frequencies.size} frequencies")

    @property
    def dim(self) -> int:
        return self.projectors.shape[1]

    def probabilities(self, rho: np.ndarray, fixed_order: bool = False) -> np.ndarray:
        return np.real(np.einsum('bmn,nm->b', self.projectors, rho))

    def r_operator(self, scaled: np.ndarray) -> np.ndarray:
        return np.einsum('b,bmn->mn', scaled, self.projectors)

    def resample(self, rng: np.random.Generator) -> 'BinnedData':
        n = self.n_samples or 1
        counts = rng.multinomial(n, self.frequencies / self.frequencies.sum())
        return BinnedData(self.projectors, counts / n, self.n_samples)


def bin_overlaps(binning: Binning, cutoff: int) -> np.ndarray:
    """Bin-averaged overlaps ∫ ψ_m ψ_n dq / width, with the edge bins running out to the tails.

    The outer bins absorb everything beyond [q_min, q_max], so width · Σ_b Π_b is
    the identity on the truncated space.
    """
    edges = np.linspace(binning.q_min, binning.q_max, binning.n_bins + 1)
    overlaps = binned_overlaps(edges[:-1], edges[1:], cutoff)
    reach = math.sqrt(2 * cutoff + 1) + TAIL_MARGIN
    tails = ((0, min(-reach, binning.q_min), binning.q_min),
             (binning.n_bins - 1, binning.q_max, max(reach, binning.q_max)))
    for b, lo, hi in tails:
        if hi > lo:
            panels = int(math.ceil((hi - lo) / TAIL_PANEL_WIDTH))
            overlaps[b] += binned_overlaps(lo, hi, cutoff, panels=panels)[0]
    return overlaps / binning.width


def bin_dataset(dataset: QuadratureDataset, binning: Binning, cutoff: int) -> BinnedData:
    """Histogram samples on a (phase, quadrature) grid and build bin projectors.

    Each projector is divided by its bin width so that tr(Π_b ρ) is the mean
    density over the bin. Samples outside [q_min, q_max] go to the edge bins,
    whose projectors cover the tails.
    """
    if len(dataset) == 0:
        raise InputError("cannot bin an empty dataset")
    edges = np.linspace(binning.q_min, binning.q_max, binning.n_bins + 1)
    outside = int(np.sum((dataset.values < binning.q_min) | (dataset.values > binning.q_max)))
    if outside:
        logger.warning(f"{outside} samples fall outside [{binning.q_min}, {binning.q_max}] and join the edge bins")
    q_idx = np.clip(np.digitize(dataset.values, edges) - 1, 0, binning.n_bins - 1)
    phase_edges = np.linspace(0.0, TWO_PI, binning.n_phase_bins + 1)
    t_idx = np.clip(np.digitize(dataset.phases, phase_edges) - 1, 0, binning.n_phase_bins - 1)

    counts = np.zeros((binning.n_phase_bins, binning.n_bins))
    np.add.at(counts, (t_idx, q_idx), 1.0)

    overlaps = bin_overlaps(binning, cutoff)
    theta_centers = 0.5 * (phase_edges[:-1] + phase_edges[1:])
    n = np.arange(cutoff + 1)

    projectors: List[np.ndarray] = []
    freqs: List[float] = []
    for t, theta in enumerate(theta_centers):
        phase = np.exp(1j * theta * (n[:, None] - n[None, :]))
        for b in np.flatnonzero(counts[t]):
            projectors.append(phase * overlaps[b])
            freqs.append(counts[t, b] / len(dataset))
    logger.debug(f"Binned {len(dataset)} samples into {len(freqs)} non-empty bins")
    return BinnedData(np.array(projectors), np.array(freqs), len(dataset))
