# app/errors.py
from typing import Any, Dict, Optional


class SpectralError(Exception):
    """Base class for every failure raised by the toolkit."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details: Dict[str, Any] = dict(details or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.details:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.details.items())
        return f"{base} ({extra})"


class GeometryError(SpectralError):
    """Curve data violates unit speed, smoothness or metric positivity."""


class ParameterError(SpectralError):
    """Inputs outside the admissible parameter range."""


class RegimeError(ParameterError):
    """Inputs outside the regime where the transverse estimates apply."""


class NumericalError(SpectralError):
    """An integrator or root finder did not reach its tolerance."""


class SolverError(NumericalError):
    """An eigensolver did not converge within its iteration budget."""
