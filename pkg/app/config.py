# app/config.py
"""
Centralized, version-controlled numerical defaults.

Every constant below can be overridden from the environment (or a local
.env file). Malformed values fall back to the documented default.

This file defines:
- Curve geometry tolerances and windows
- Transverse root-finding tolerances
- 1D and 2D discretization defaults
- Study grids and output location
"""

import os
from typing import Tuple

from dotenv import load_dotenv

load_dotenv()


def _env_float(name: str, default: float) -> float:
    try:
        return float(os.getenv(name, str(default)))
    except ValueError:
        return default


def _env_int(name: str, default: int) -> int:
    try:
        return int(os.getenv(name, str(default)))
    except ValueError:
        return default


def _env_floats(name: str, default: Tuple[float, ...]) -> Tuple[float, ...]:
    try:
        values = tuple(float(t) for t in os.getenv(name, "").split(",") if t.strip())
    except ValueError:
        return default
    return values or default


# ---------------------------------------------------------------------------
# Curve geometry
# ---------------------------------------------------------------------------

UNIT_SPEED_TOL = _env_float("UNIT_SPEED_TOL", 1e-10)
CURVE_WINDOW = _env_float("CURVE_WINDOW", 12.0)
HALFWIDTH_CAP = _env_float("HALFWIDTH_CAP", 1e3)
HALFWIDTH_RESOLUTION = _env_float("HALFWIDTH_RESOLUTION", 1e-2)
DECAY_EPS = _env_float("DECAY_EPS", 1e-12)
ODE_RTOL = _env_float("ODE_RTOL", 1e-12)
ODE_ATOL = _env_float("ODE_ATOL", 1e-13)


# ---------------------------------------------------------------------------
# Transverse problem
# ---------------------------------------------------------------------------

BISECTION_RTOL = _env_float("BISECTION_RTOL", 1e-13)


# ---------------------------------------------------------------------------
# Longitudinal (1D) operators
# ---------------------------------------------------------------------------

FD1D_STEP = _env_float("FD1D_STEP", 0.02)
TRUNCATION_RTOL = _env_float("TRUNCATION_RTOL", 1e-8)
TRUNCATION_MAX_DOUBLINGS = _env_int("TRUNCATION_MAX_DOUBLINGS", 6)
MULTIPLICITY_RTOL = _env_float("MULTIPLICITY_RTOL", 1e-10)


# ---------------------------------------------------------------------------
# Strip (2D) operators
# ---------------------------------------------------------------------------

EIGEN_RTOL = _env_float("EIGEN_RTOL", 1e-8)
EIGEN_MAXITER = _env_int("EIGEN_MAXITER", 5000)
STRIP_NS = _env_int("STRIP_NS", 160)
STRIP_NU = _env_int("STRIP_NU", 40)
STRIP_GRADING_MAX = _env_float("STRIP_GRADING_MAX", 4.0)
ORDER_FLAG_THRESHOLD = _env_float("ORDER_FLAG_THRESHOLD", 1.7)


# ---------------------------------------------------------------------------
# Studies and output
# ---------------------------------------------------------------------------

TAU_GRID = _env_floats("TAU_GRID", (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0))
SPECTRAL_OUTPUT_DIR = os.getenv("SPECTRAL_OUTPUT_DIR", "results")
LOGGING_ENABLED = os.getenv("LOGGING_ENABLED", "true").lower() == "true"
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
