"""Pipeline configuration documents (YAML or JSON) and named presets."""
import glob
import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional

import yaml

from .errors import ConfigError
from .models.reconstruction import Binning, ReconstructionConfig
from .models.source import SourceParams

logger = logging.getLogger(__name__)

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config')
SECTIONS = ('source', 'acquisition', 'mode_extraction', 'reconstruction', 'report')


def _check_keys(cls, data: Dict[str, Any], section: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"section '{section}' must be a mapping")
    unknown = sorted(set(data) - {f.name for f in fields(cls)})
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {', '.join(unknown)}")


@dataclass
class AcquisitionConfig:
    n_heralds: int = 100000
    n_background: int = 50000
    n_vacuum: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        for name in ('n_heralds', 'n_background'):
            if getattr(self, name) < 0:
                raise ConfigError(f"acquisition.{name} must be non-negative")
        if self.n_vacuum is not None and self.n_vacuum < 0:
            raise ConfigError("acquisition.n_vacuum must be non-negative")
        if self.seed < 0:
            raise ConfigError("acquisition.seed must be non-negative")


@dataclass
class ModeExtractionConfig:
    """Mode estimation and quadrature extraction settings.

    ``phases`` is 'random-uniform' for phase-randomized tags or 'recorded' to
    use the per-trace phases logged at acquisition.
    """
    phases: str = 'random-uniform'
    phase_seed: int = 0
    electronic_noise_var: Optional[float] = None

    def __post_init__(self):
        if self.phases not in ('random-uniform', 'recorded'):
            raise ConfigError(f"mode_extraction.phases must be 'random-uniform' or 'recorded', got '{self.phases}'")


@dataclass
class ReportConfig:
    out_dir: str = 'runs/latest'
    herald_rate_hz: Optional[float] = None
    wigner_extent: float = 4.0
    wigner_points: int = 81
    histogram_bins: int = 100
    histogram_extent: float = 5.0

    def __post_init__(self):
        if not self.wigner_extent > 0 or self.wigner_points < 2:
            raise ConfigError("report.wigner_extent must be positive and wigner_points at least 2")
        if self.histogram_bins < 1 or not self.histogram_extent > 0:
            raise ConfigError("report.histogram_bins and histogram_extent must be positive")


@dataclass
class PipelineConfig:
    source: SourceParams = field(default_factory=SourceParams)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    mode_extraction: ModeExtractionConfig = field(default_factory=ModeExtractionConfig)
    reconstruction: ReconstructionConfig = field(default_factory=ReconstructionConfig)
    report: ReportConfig = field(default_factory=ReportConfig)
    name: str = 'custom'

    def to_dict(self) -> Dict[str, Any]:
        return {
            'source': self.source.to_dict(),
            'acquisition': vars(self.acquisition).copy(),
            'mode_extraction': vars(self.mode_extraction).copy(),
            'reconstruction': self.reconstruction.to_dict(),
            'report': vars(self.report).copy(),
        }


def parse_config(data: Dict[str, Any], name: str = 'custom') -> PipelineConfig:
    """Validate a configuration mapping; unknown keys at any level are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("configuration document must be a mapping")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown configuration sections: {', '.join(unknown)}")
    try:
        source = SourceParams.from_dict(data.get('source') or {})

        acquisition = data.get('acquisition') or {}
        _check_keys(AcquisitionConfig, acquisition, 'acquisition')
        mode_extraction = data.get('mode_extraction') or {}
        _check_keys(ModeExtractionConfig, mode_extraction, 'mode_extraction')
        report = data.get('report') or {}
        _check_keys(ReportConfig, report, 'report')

        recon = dict(data.get('reconstruction') or {})
        _check_keys(ReconstructionConfig, recon, 'reconstruction')
        if recon.get('binning') is not None:
            _check_keys(Binning, recon['binning'], 'reconstruction.binning')
            recon['binning'] = Binning(**recon['binning'])

        return PipelineConfig(
            source=source,
            acquisition=AcquisitionConfig(**acquisition),
            mode_extraction=ModeExtractionConfig(**mode_extraction),
            reconstruction=ReconstructionConfig(**recon),
            report=ReportConfig(**report),
            name=name,
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def preset_path(name: str) -> str:
    return os.path.join(CONFIG_DIR, f"{name.replace('-', '_')}.yaml")


def list_presets() -> List[str]:
    """Preset names found in the config directory (the default_ template excluded)."""
    files = sorted(glob.glob(os.path.join(CONFIG_DIR, '*.yaml')))
    files = [f for f in files if not os.path.basename(f).startswith('default_')]
    return [os.path.splitext(os.path.basename(f))[0].replace('_', '-') for f in files]


def load_config(name_or_path: Optional[str] = None) -> PipelineConfig:
    """Load a preset by name or a configuration file by path.

    ``.json`` files are parsed as JSON, anything else as YAML. ``None`` gives
    the built-in defaults.
    """
    if name_or_path is None:
        return PipelineConfig()
    path = name_or_path
    name = os.path.splitext(os.path.basename(path))[0]
    if not os.path.exists(path) and name_or_path in list_presets():
        path = preset_path(name_or_path)
        name = name_or_path
    if not os.path.exists(path):
        raise ConfigError(f"no configuration file or preset named '{name_or_path}' "
                          f"(presets: {', '.join(list_presets())})")

    logger.info(f"Loading configuration from {path}")
    with open(path, 'r') as f:
        try:
            data = json.load(f) if path.endswith('.json') else yaml.safe_load(f)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"{path}: cannot parse configuration: {e}") from e
    return parse_config(data or {}, name=name)


def apply_overrides(config: PipelineConfig, seed: Optional[int] = None, cutoff: Optional[int] = None,
                    threads: Optional[int] = None, out_dir: Optional[str] = None) -> PipelineConfig:
    """Command-line overrides; ``cutoff`` applies to the reconstruction."""
    if seed is not None:
        config.acquisition = replace(config.acquisition, seed=seed)
    if cutoff is not None:
        config.reconstruction = replace(config.reconstruction, cutoff=cutoff)
    if threads is not None:
        config.reconstruction = replace(config.reconstruction, threads=threads)
    if out_dir is not None:
        config.report = replace(config.report, out_dir=out_dir)
    return config
