"""Modulation-format-aware nonlinear interference model for WDM fiber links."""

from .constellation import (
    Constellation4D,
    KerrCoeffs,
    Mode,
    MomentSet,
    gaussian_moments,
    kerr_coefficients,
    load_constellation,
    moments,
    normalize_power,
    parse_constellation,
    validate_assumptions,
)
from .formats import available_formats, builtin_format, resolve_format

__version__ = "0.1.0"

__all__ = [
    "Constellation4D",
    "KerrCoeffs",
    "Mode",
    "MomentSet",
    "available_formats",
    "builtin_format",
    "gaussian_moments",
    "kerr_coefficients",
    "load_constellation",
    "moments",
    "normalize_power",
    "parse_constellation",
    "resolve_format",
    "validate_assumptions",
]
