"""Trace-level synthesis of heralded, background and vacuum acquisitions."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from ..errors import InputError
from ..fock.states import photon_statistics, vacuum
from ..models.source import GroundTruth, SourceParams
from ..models.state import TWO_PI
from ..models.traces import TraceSet
from .modes import band_limit_bins, discretize_mode, mode_basis
from .sampler import QuadratureSampler
from .source import background_state, herald_probability, heralded_state

logger = logging.getLogger(__name__)

# substreams are keyed by chunk index, so changing this changes every synthesized trace
CHUNK_SIZE = 4096
STREAM_HERALDED = 0
STREAM_BACKGROUND = 1
STREAM_VACUUM = 2


@dataclass(eq=False)
class SynthesisResult:
    heralded: TraceSet
    background: TraceSet
    vacuum: TraceSet
    truth: GroundTruth
    heralded_phases: np.ndarray


def ground_truth(params: SourceParams) -> GroundTruth:
    mode = discretize_mode(params.trace)
    k_max = band_limit_bins(params.trace)
    return GroundTruth(
        heralded_state=heralded_state(params),
        background_state=background_state(params),
        mode=mode,
        herald_rate_hint=params.herald_rate_hz,
        herald_probability=herald_probability(params),
        basis_size=params.trace.n_samples if k_max is None else 1 + 2 * k_max,
    )


class _StreamSynthesizer:
    """Draws one acquisition stream chunk by chunk from independent substreams."""

    def __init__(self, stream_id: int, seed: int, signal: QuadratureSampler,
                 others: QuadratureSampler, basis: np.ndarray, gain: float, noise_sd: float):
        self.stream_id = stream_id
        self.seed = seed
        self.signal = signal
        self.others = others
        self.basis = basis
        self.gain = gain
        self.noise_sd = noise_sd

    def chunk(self, index: int, n_events: int):
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, self.stream_id, index]))
        phases = rng.uniform(0.0, TWO_PI, n_events)
        q = np.empty((n_events, self.basis.shape[0]))
        q[:, 0] = self.signal.draw(rng, n_events)
        q[:, 1:] = self.others.draw(rng, (n_events, self.basis.shape[0] - 1))
        data = self.gain * (q @ self.basis)
        if self.noise_sd > 0:
            data += self.noise_sd * rng.standard_normal(data.shape)
        return data, phases

    def run(self, n_events: int, threads: int = 1):
        sizes = [min(CHUNK_SIZE, n_events - start) for start in range(0, n_events, CHUNK_SIZE)]
        n_samples = self.basis.shape[1]
        if not sizes:
            return np.zeros((0, n_samples)), np.zeros(0)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(self.chunk, range(len(sizes)), sizes))
        else:
            parts = [self.chunk(i, size) for i, size in enumerate(sizes)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def synthesize_traces(params: SourceParams, n_heralds: int, n_background: int, seed: int,
                      n_vacuum: Optional[int] = None, threads: int = 1) -> SynthesisResult:
    """Synthesize trigger-aligned homodyne traces for all three acquisitions.

    Every trace is ``gain * Σ_k Q_k φ_k`` plus white electronic noise, with φ_0
    the heralded mode. Heralded traces draw Q_0 from the heralded state and the
    other band modes from the background state; background traces draw every
    mode from the background state and vacuum traces from vacuum.

    Args:
        params: Source and acquisition parameters.
        n_heralds: Number of heralded traces.
        n_background: Number of untriggered background traces.
        seed: Root seed; each stream and chunk of CHUNK_SIZE events gets its
            own substream, so the output does not depend on ``threads``.
        n_vacuum: Number of vacuum traces (defaults to ``n_background``).
        threads: Worker threads for chunk generation.
    """
    if n_heralds < 0 or n_background < 0 or (n_vacuum is not None and n_vacuum < 0):
        raise InputError("trace counts must be non-negative")
    if n_vacuum is None:
        n_vacuum = n_background
    trace = params.trace

    truth = ground_truth(params)
    basis = mode_basis(truth.mode.psi, band_limit_bins(trace))
    logger.info(f"Synthesizing {n_heralds} heralded, {n_background} background and {n_vacuum} vacuum "
                f"traces over a {basis.shape[0]}-mode basis")

    bg_sampler = QuadratureSampler(truth.background_state)
    vac_sampler = QuadratureSampler(vacuum(params.cutoff))
    noise_sd = math.sqrt(trace.electronic_noise_var)
    streams = {
        STREAM_HERALDED: _StreamSynthesizer(STREAM_HERALDED, seed, QuadratureSampler(truth.heralded_state),
                                            bg_sampler, basis, trace.gain, noise_sd),
        STREAM_BACKGROUND: _StreamSynthesizer(STREAM_BACKGROUND, seed, bg_sampler, bg_sampler,
                                              basis, trace.gain, noise_sd),
        STREAM_VACUUM: _StreamSynthesizer(STREAM_VACUUM, seed, vac_sampler, vac_sampler,
                                          basis, trace.gain, noise_sd),
    }
    counts = {STREAM_HERALDED: n_heralds, STREAM_BACKGROUND: n_background, STREAM_VACUUM: n_vacuum}
    labels = {STREAM_HERALDED: 'heralded', STREAM_BACKGROUND: 'background', STREAM_VACUUM: 'vacuum'}

    sets: Dict[int, TraceSet] = {}
    phases: Dict[int, np.ndarray] = {}
    for stream_id, synthesizer in streams.items():
        data, stream_phases = synthesizer.run(counts[stream_id], threads)
        meta = {'label': labels[stream_id], 'seed': int(seed), 'stream': stream_id,
                'notes': f"synthetic, {basis.shape[0]} band modes"}
        sets[stream_id] = TraceSet(data, trace.dt_ns, trace.trigger_index, meta, n_samples=trace.n_samples)
        phases[stream_id] = stream_phases

    return SynthesisResult(
        heralded=sets[STREAM_HERALDED],
        background=sets[STREAM_BACKGROUND],
        vacuum=sets[STREAM_VACUUM],
        truth=truth,
        heralded_phases=phases[STREAM_HERALDED],
    )


def expected_variance_profile(truth: GroundTruth, params: SourceParams) -> np.ndarray:
    """Per-sample variance of heralded traces implied by the mode decomposition.

    c (½ + n̄_bg) + (m - n̄_bg) ψ_i², with c = K/N the band fill factor, scaled
    by gain² and offset by the electronic noise.
    """
    trace = params.trace
    c = truth.basis_size / trace.n_samples
    m = photon_statistics(truth.heralded_state).mean_n
    n_bg = photon_statistics(truth.background_state).mean_n
    psi_sq = truth.mode.psi ** 2
    return trace.gain ** 2 * (c * (0.5 + n_bg) + (m - n_bg) * psi_sq) + trace.electronic_noise_var


def expected_vacuum_variance(truth: GroundTruth, params: SourceParams) -> float:
    trace = params.trace
    return trace.gain ** 2 * 0.5 * truth.basis_size / trace.n_samples + trace.electronic_noise_var
