"""Robust two-level control pulses synthesized from k-space curves."""
from .errors import (CurvatureError, DegenerateCurveError, DomainError, FormatError,
                     NumericalError, PulseError, UsageError)

__version__ = "0.1.0"
