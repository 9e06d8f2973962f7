import argparse
import logging
import os
import time
from typing import List, Optional

import numpy as np

from src.config import PipelineConfig, apply_overrides, list_presets, load_config
from src.errors import EXIT_OK, PhotonTomoError, InputError, exit_code_for
from src.fock.states import wigner_grid, marginal_pdf
from src.logsetup import env_threads, setup_logging
from src.merit.figures import merit_report
from src.mlrecon.maxlik import reconstruct
from src.models.quadratures import QuadratureDataset
from src.models.reconstruction import ReconstructionResult
from src.models.report import MeritReport
from src.models.state import DensityMatrix
from src.models.traces import TemporalMode, TraceSet
from src.quad.projection import calibrate_vacuum, extract_dataset, histogram, phase_dependence_test
from src.simsource.synth import SynthesisResult, synthesize_traces
from src.storage import artifacts
from src.storage.artifacts import RunStore, read_json, read_quadratures
from src.storage.tracefile import read_traces_csv, read_traceset
from src.tmode.extraction import autocorrelation_matrix, extract_mode, mode_bandwidth, variance_profile

logger = logging.getLogger(__name__)


def load_traces(path: str, dt_ns: float = 1.0, trigger_index: int = 0) -> TraceSet:
    """Read an HTRC file, or a CSV table with one trace per row."""
    if path.endswith('.csv'):
        return read_traces_csv(path, dt_ns, trigger_index)
    return read_traceset(path)


def cmd_simulate(config: PipelineConfig, out_dir: str, threads: int = 1) -> SynthesisResult:
    """Synthesize the three trace sets and write them with the ground truth."""
    acq = config.acquisition
    logger.info(f"🧪 Simulating source '{config.name}' with seed {acq.seed}...")
    result = synthesize_traces(config.source, acq.n_heralds, acq.n_background, acq.seed,
                               n_vacuum=acq.n_vacuum, threads=threads)

    store = RunStore(out_dir)
    store.write_traces(artifacts.HERALDED, result.heralded)
    store.write_traces(artifacts.BACKGROUND, result.background)
    store.write_traces(artifacts.VACUUM, result.vacuum)
    store.write_phases(result.heralded_phases)
    store.write_truth(result.truth)

    rho = result.truth.heralded_state.diagonal()
    logger.info("📊 Simulation summary:")
    logger.info(f"  - Heralded traces: {result.heralded.n_traces}")
    logger.info(f"  - Background traces: {result.background.n_traces}")
    logger.info(f"  - Vacuum traces: {result.vacuum.n_traces}")
    logger.info(f"  - True rho11: {rho[1]:.4f}, rho22: {rho[2]:.4f}")
    logger.info(f"  - Band modes per trace: {result.truth.basis_size}")
    return result


def cmd_mode(heralded: TraceSet, background: TraceSet, out_dir: str, threads: int = 1) -> TemporalMode:
    """Estimate the temporal mode and write it with the variance profile and autocorrelation."""
    logger.info(f"🔍 Extracting temporal mode from {heralded.n_traces} heralded "
                f"and {background.n_traces} background traces...")
    mode = extract_mode(heralded, background, threads=threads)

    store = RunStore(out_dir)
    store.write_mode(mode)
    store.write_profile(variance_profile(heralded, threads=threads))
    store.write_autocorrelation(autocorrelation_matrix(heralded, threads=threads))

    peak = int(np.argmax(np.abs(mode.psi)))
    logger.info(f"✅ Mode extracted: purity {mode.purity:.4f}, Schmidt number {mode.schmidt_number:.3f}, "
                f"peak at sample {peak}")
    for warning in mode.warnings:
        logger.warning(f"⚠️ {warning}")
    return mode


def _recorded_phases(traces_path: str) -> np.ndarray:
    path = os.path.join(os.path.dirname(os.path.abspath(traces_path)), artifacts.HERALDED_PHASES)
    if not os.path.exists(path):
        raise InputError(f"recorded phases requested but {path} does not exist")
    return RunStore(os.path.dirname(path)).read_phases()


def cmd_extract(heralded: TraceSet, mode: TemporalMode, vacuum: TraceSet, config: PipelineConfig,
                out_dir: str, background: Optional[TraceSet] = None,
                recorded_phases: Optional[np.ndarray] = None) -> QuadratureDataset:
    """Calibrate on vacuum, project the heralded (and background) traces and write the quadratures."""
    settings = config.mode_extraction
    cal = calibrate_vacuum(vacuum, mode, electronic_noise_var=settings.electronic_noise_var)
    phases = recorded_phases if settings.phases == 'recorded' else settings.phases
    if settings.phases == 'recorded' and phases is None:
        raise InputError("recorded phases requested but none were supplied")

    store = RunStore(out_dir)
    dataset = extract_dataset(heralded, mode, cal, phases=phases, seed=settings.phase_seed)
    store.write_quadratures(dataset)

    vac = extract_dataset(vacuum, mode, cal, seed=settings.phase_seed + 2)
    store.write_quadratures(vac, artifacts.VACUUM_QUADRATURES)
    logger.info(f"  - Vacuum variance: {vac.variance:.4f} ± {vac.variance_stderr:.4f}")

    if background is not None:
        bck = extract_dataset(background, mode, cal, seed=settings.phase_seed + 1)
        store.write_quadratures(bck, artifacts.BACKGROUND_QUADRATURES)
        logger.info(f"  - Background variance: {bck.variance:.4f} ± {bck.variance_stderr:.4f}")

    if len(dataset) > 1:
        logger.info(f"  - Heralded variance: {dataset.variance:.4f} ± {dataset.variance_stderr:.4f}")
    if len(dataset) >= 16 and settings.phases != 'recorded':
        test = phase_dependence_test(dataset)
        if not test.consistent():
            logger.warning(f"⚠️ Quadrature variance depends on phase (p = {test.p_value:.3g}); "
                           f"data may not be phase-randomized")
    if cal.clearance_db is not None:
        logger.info(f"  - Shot-noise clearance: {cal.clearance_db:.1f} dB")
    logger.info(f"✅ Wrote {len(dataset)} quadratures to {store.path(artifacts.QUADRATURES)}")
    return dataset


def cmd_reconstruct(dataset: QuadratureDataset, config: PipelineConfig, out_dir: str,
                    fixed_order: bool = False) -> ReconstructionResult:
    """Maximum-likelihood reconstruction; non-convergence is reported, not fatal."""
    logger.info(f"🔄 Reconstructing density matrix from {len(dataset)} quadratures...")
    result = reconstruct(dataset, config.reconstruction, fixed_order=fixed_order)
    RunStore(out_dir).write_reconstruction(result)

    p = result.rho.diagonal()
    if result.converged:
        logger.info(f"✅ Converged after {result.iterations} iterations")
    else:
        logger.warning(f"⚠️ Not converged after {result.iterations} iterations")
    logger.info(f"  - Diagonal: {', '.join(f'{x:.4f}' for x in p[:4])}")
    if result.diag_errors is not None:
        logger.info(f"  - Bootstrap errors: {', '.join(f'{x:.4f}' for x in result.diag_errors[:4])}")
    return result


def cmd_analyze(rho: DensityMatrix, config: PipelineConfig, out_dir: str,
                reconstruction: Optional[ReconstructionResult] = None,
                rate_hz: Optional[float] = None, var_trig: Optional[float] = None,
                var_bck: Optional[float] = None, mode: Optional[TemporalMode] = None,
                quadratures: Optional[QuadratureDataset] = None,
                vacuum_quadratures: Optional[QuadratureDataset] = None) -> MeritReport:
    """Figures of merit, Wigner grid and marginal histogram of a reconstructed state."""
    settings = config.report
    rate_hz = rate_hz if rate_hz is not None else settings.herald_rate_hz
    if rate_hz is None:
        rate_hz = config.source.herald_rate_hz
    bandwidth = mode_bandwidth(mode) if mode is not None else None

    report = merit_report(rho, var_trig=var_trig, var_bck=var_bck, herald_rate_hz=rate_hz,
                          bandwidth_mhz=bandwidth, reconstruction=reconstruction)
    store = RunStore(out_dir)
    store.write_report(report)

    axis = np.linspace(-settings.wigner_extent, settings.wigner_extent, settings.wigner_points)
    store.write_wigner_grid(axis, axis, wigner_grid(rho, axis, axis))

    if quadratures is not None:
        q_range = (-settings.histogram_extent, settings.histogram_extent)
        centers, heralded = histogram(quadratures, settings.histogram_bins, q_range)
        columns = {'heralded': heralded}
        if vacuum_quadratures is not None:
            columns['vacuum'] = histogram(vacuum_quadratures, settings.histogram_bins, q_range)[1]
        # phase-averaged state for phase-randomized data
        averaged = DensityMatrix(np.diag(np.clip(rho.diagonal(), 0.0, None)))
        columns['reconstructed'] = marginal_pdf(averaged, 0.0, centers)
        store.write_histogram(centers, columns)

    logger.info("📊 Figures of merit:")
    logger.info(f"  - rho11: {report.rho11:.4f}" +
                (f" ± {report.rho11_error:.4f}" if report.rho11_error is not None else ""))
    logger.info(f"  - W(0,0): {report.wigner_origin:.5f}")
    logger.info(f"  - Mean photon number: {report.mean_n:.4f}")
    if report.g2_zero is not None:
        logger.info(f"  - g2(0): {report.g2_zero:.4f}, Mandel Q: {report.mandel_q:.4f}")
    if report.g2_si is not None:
        logger.info(f"  - g2_si: {report.g2_si:.2f}")
    if report.bandwidth_mhz is not None:
        logger.info(f"  - Mode bandwidth: {report.bandwidth_mhz:.1f} MHz")
    if report.spectral_brightness_per_mhz_s is not None:
        logger.info(f"  - Spectral brightness: {report.spectral_brightness_per_mhz_s:.0f} photons/(MHz s)")
    for name in report.undefined:
        logger.warning(f"⚠️ {name} is undefined for this state")
    return report


def cmd_pipeline(config: PipelineConfig, out_dir: str, threads: int = 1,
                 fixed_order: bool = False) -> MeritReport:
    """Run every stage in sequence, each through its files in ``out_dir``."""
    logger.info(f"🚀 Starting pipeline '{config.name}' into {out_dir}...")
    started = time.perf_counter()
    store = RunStore(out_dir)

    cmd_simulate(config, out_dir, threads)
    heralded = store.read_traces(artifacts.HERALDED)
    background = store.read_traces(artifacts.BACKGROUND)
    vacuum = store.read_traces(artifacts.VACUUM)

    cmd_mode(heralded, background, out_dir, threads)
    mode = store.read_mode()

    phases = store.read_phases() if config.mode_extraction.phases == 'recorded' else None
    cmd_extract(heralded, mode, vacuum, config, out_dir, background=background, recorded_phases=phases)
    dataset = store.read_quadratures()
    bck = store.read_quadratures(artifacts.BACKGROUND_QUADRATURES)
    vac = store.read_quadratures(artifacts.VACUUM_QUADRATURES)

    cmd_reconstruct(dataset, config, out_dir, fixed_order=fixed_order)
    result = store.read_reconstruction()

    report = cmd_analyze(result.rho, config, out_dir, reconstruction=result,
                         var_trig=dataset.variance, var_bck=bck.variance if len(bck) > 1 else None,
                         mode=mode, quadratures=dataset, vacuum_quadratures=vac)
    logger.info(f"⏱️ Pipeline completed in {time.perf_counter() - started:.1f} s")
    return report


def _resolve_config(args) -> PipelineConfig:
    config = load_config(args.config)
    return apply_overrides(config, seed=args.seed, cutoff=args.cutoff, threads=_threads(args), out_dir=args.out)


def _threads(args) -> int:
    if args.bit_exact:
        return 1
    return args.threads if args.threads is not None else env_threads()


def _run_simulate(args) -> None:
    config = _resolve_config(args)
    cmd_simulate(config, config.report.out_dir, _threads(args))


def _run_mode(args) -> None:
    config = _resolve_config(args)
    heralded = load_traces(args.heralded, args.dt_ns, args.trigger_index)
    background = load_traces(args.background, args.dt_ns, args.trigger_index)
    cmd_mode(heralded, background, config.report.out_dir, _threads(args))


def _run_extract(args) -> None:
    config = _resolve_config(args)
    heralded = load_traces(args.traces, args.dt_ns, args.trigger_index)
    vacuum = load_traces(args.vacuum, args.dt_ns, args.trigger_index)
    background = load_traces(args.background, args.dt_ns, args.trigger_index) if args.background else None
    mode = TemporalMode.from_dict(read_json(args.mode))
    phases = _recorded_phases(args.traces) if config.mode_extraction.phases == 'recorded' else None
    cmd_extract(heralded, mode, vacuum, config, config.report.out_dir, background=background,
                recorded_phases=phases)


def _run_reconstruct(args) -> None:
    config = _resolve_config(args)
    cmd_reconstruct(read_quadratures(args.quadratures), config, config.report.out_dir,
                    fixed_order=args.bit_exact)


def _run_analyze(args) -> None:
    config = _resolve_config(args)
    result = ReconstructionResult.from_dict(read_json(args.rho))
    quadratures = read_quadratures(args.quadratures) if args.quadratures else None
    vacuum = read_quadratures(args.vacuum_quadratures) if args.vacuum_quadratures else None
    mode = TemporalMode.from_dict(read_json(args.mode)) if args.mode else None
    var_trig = args.var_trig
    if var_trig is None and quadratures is not None and len(quadratures) > 1:
        var_trig = quadratures.variance
    var_bck = args.var_bck
    if var_bck is None and args.background_quadratures:
        var_bck = read_quadratures(args.background_quadratures).variance
    cmd_analyze(result.rho, config, config.report.out_dir, reconstruction=result, rate_hz=args.rate_hz,
                var_trig=var_trig, var_bck=var_bck, mode=mode, quadratures=quadratures,
                vacuum_quadratures=vacuum)


def _run_pipeline(args) -> None:
    config = _resolve_config(args)
    cmd_pipeline(config, config.report.out_dir, _threads(args), fixed_order=args.bit_exact)


def _run_presets(args) -> None:
    presets = list_presets()
    if not presets:
        logger.info("No presets found in the config directory")
    for name in presets:
        logger.info(f"  - {name}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="configuration file (YAML or JSON) or preset name")
    common.add_argument('--seed', type=int, help="override the acquisition seed")
    common.add_argument('--out', help="output directory (overrides report.out_dir)")
    common.add_argument('--threads', type=int, help="worker threads (default: PHOTONTOMO_THREADS or 1)")
    common.add_argument('--bit-exact', action='store_true',
                        help="single thread and fixed-order reductions for byte-identical outputs")
    common.add_argument('--cutoff', type=int, help="override the reconstruction Fock cutoff")
    common.add_argument('--log-level', help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument('--log-file', help="also write the log to this file")

    traces = argparse.ArgumentParser(add_help=False)
    traces.add_argument('--dt-ns', type=float, default=1.0, help="sample spacing for CSV trace input")
    traces.add_argument('--trigger-index', type=int, default=0, help="trigger sample for CSV trace input")

    parser = argparse.ArgumentParser(
        description="Heralded single-photon source simulator and homodyne tomography pipeline")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', parents=[common], help="synthesize heralded, background and vacuum traces")
    p.set_defaults(func=_run_simulate)

    p = sub.add_parser('mode', parents=[common, traces], help="extract the temporal mode")
    p.add_argument('heralded')
    p.add_argument('background')
    p.set_defaults(func=_run_mode)

    p = sub.add_parser('extract', parents=[common, traces], help="project traces onto the mode")
    p.add_argument('traces')
    p.add_argument('mode')
    p.add_argument('vacuum')
    p.add_argument('--background', help="background traces, projected for g2_si")
    p.set_defaults(func=_run_extract)

    p = sub.add_parser('reconstruct', parents=[common], help="maximum-likelihood density matrix")
    p.add_argument('quadratures')
    p.set_defaults(func=_run_reconstruct)

    p = sub.add_parser('analyze', parents=[common], help="figures of merit, Wigner grid and histogram")
    p.add_argument('rho')
    p.add_argument('--rate-hz', type=float, help="herald count rate for the spectral brightness")
    p.add_argument('--var-trig', type=float, help="heralded quadrature variance")
    p.add_argument('--var-bck', type=float, help="background quadrature variance")
    p.add_argument('--mode', help="mode JSON, for the bandwidth")
    p.add_argument('--quadratures', help="heralded quadratures, for the marginal histogram")
    p.add_argument('--vacuum-quadratures', help="vacuum quadratures, for the marginal histogram")
    p.add_argument('--background-quadratures', help="background quadratures, for var_bck")
    p.set_defaults(func=_run_analyze)

    p = sub.add_parser('pipeline', parents=[common], help="run every stage in sequence")
    p.set_defaults(func=_run_pipeline)

    p = sub.add_parser('presets', parents=[common], help="list the named presets")
    p.set_defaults(func=_run_presets)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_file)
    try:
        args.func(args)
    except (PhotonTomoError, OSError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        raise
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
