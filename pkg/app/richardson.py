# app/richardson.py
import math
from typing import Sequence


def extrapolate(coarse: float, fine: float, order: float = 2.0) -> float:
    """Cancel the leading h^order term from values at h and h/2."""
    return fine + (fine - coarse) / (2.0 ** order - 1.0)


def observed_order(values: Sequence[float]) -> float:
    """Order from the last three values of a halving sequence; nan if undetermined."""
    if len(values) < 3:
        return math.nan
    v0, v1, v2 = values[-3:]
    d0, d1 = v0 - v1, v1 - v2
    if d1 == 0.0 or d0 == 0.0 or (d0 > 0) != (d1 > 0):
        return math.nan
    return math.log2(d0 / d1)


def error_estimate(coarse: float, fine: float, order: float = 2.0) -> float:
    return abs(fine - coarse) / (2.0 ** order - 1.0)
