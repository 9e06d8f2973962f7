from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional


@dataclass
class MeritReport:
    """Figures of merit of one reconstructed state.

    Statistics that are undefined for the state (g2 of vacuum, say) are left as
    ``None`` and named in ``undefined``.
    """
    rho11: float
    wigner_origin: float
    mean_n: float
    odd_fraction: float
    g2_zero: Optional[float] = None
    mandel_q: Optional[float] = None
    g2_si: Optional[float] = None
    var_trig: Optional[float] = None
    var_bck: Optional[float] = None
    bandwidth_mhz: Optional[float] = None
    herald_rate_hz: Optional[float] = None
    spectral_brightness_per_mhz_s: Optional[float] = None
    rho11_error: Optional[float] = None
    g2_zero_error: Optional[float] = None
    error_method: Optional[str] = None
    undefined: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MeritReport':
        return cls(**data)
