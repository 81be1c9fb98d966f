"""Critical-field analysis of thin superconducting films, bare and inside Casimir cavities."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Alignment,
    DomainError,
    FilmParams,
    SignalModel,
    ValidityError,
    cavity_field,
    critical_field_parallel,
    log_derivative,
    misalignment_shift,
    perp_parallel_ratio,
    single_film_law,
    validity_check,
)
from .synth import ApparatusParams, TransitionRecord, extract_transition, field_from_current, transition_curve  # noqa: E402
from .fit import CriticalPoint, FitResult, confidence_band, fit_critical_field, residual_sensitivity  # noqa: E402
from .budget import Budget, alignment_requirement, detectability, temp_requirement  # noqa: E402
from .bridge import BridgeArm, BridgeSpec, bridge_output, peak_trace  # noqa: E402

__all__ = [
    "Alignment",
    "ApparatusParams",
    "BridgeArm",
    "BridgeSpec",
    "Budget",
    "CriticalPoint",
    "DomainError",
    "FilmParams",
    "FitResult",
    "SignalModel",
    "TransitionRecord",
    "ValidityError",
    "alignment_requirement",
    "bridge_output",
    "cavity_field",
    "confidence_band",
    "critical_field_parallel",
    "detectability",
    "extract_transition",
    "field_from_current",
    "fit_critical_field",
    "log_derivative",
    "misalignment_shift",
    "peak_trace",
    "perp_parallel_ratio",
    "residual_sensitivity",
    "single_film_law",
    "temp_requirement",
    "transition_curve",
    "validity_check",
]
