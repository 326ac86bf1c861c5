# app/schrodinger_1d.py
"""
One-dimensional operators -c f'' + W f on (-L, L) with Dirichlet ends.

The comparison operator S has c = 1 and W = -γ²/4; the bracket operators
U±_a have c = (1 ∓ aγ₊)⁻² and W = V⁽±⁾. Eigenvalues come from the 3-point
discretization through Sturm bisection (LAPACK stebz); truncation error is
controlled by doubling L at fixed h and discretization error by Richardson
extrapolation h → h/2.
"""

import logging
import math
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
from humanfriendly import format_timespan
from scipy.linalg import eigh_tridiagonal

from app import richardson
from app.config import (
    FD1D_STEP,
    MULTIPLICITY_RTOL,
    TRUNCATION_MAX_DOUBLINGS,
    TRUNCATION_RTOL,
)
from app.curve_geometry import CurvatureProfile, bracket_potentials, bracket_thresholds
from app.data_types import BracketEnvelopeReport, BracketEnvelopeRow, CurveBounds, Operator1DSpec, Spectrum1D
from app.errors import ParameterError

logger = logging.getLogger("schrodinger_1d")

MIN_NODES = 64
SIGNS = ("plus", "minus")


# -----------------------------------------------------------------------------
# Operator construction
# -----------------------------------------------------------------------------
def grid_count(L: float, step: float = FD1D_STEP) -> int:
    """Interior node count giving mesh width close to `step` on (-L, L)."""
    return max(MIN_NODES, int(round(2.0 * L / step)) - 1)


def _validate(L: float, n: int) -> None:
    if not L > 0:
        raise ParameterError("Truncation length must be positive", {"L": L})
    if n < MIN_NODES:
        raise ParameterError(f"1D grid needs n >= {MIN_NODES}", {"n": n})


def build_comparison_operator(profile: CurvatureProfile, L: float, n: int) -> Operator1DSpec:
    """S = -d²/ds² - γ²/4."""
    if not profile.decays:
        raise ParameterError("Comparison operator needs a decaying curvature", {"family": profile.family})
    _validate(L, n)

    def W(s):
        return -0.25 * profile.gamma(s) ** 2

    return Operator1DSpec(c_kin=1.0, potential=W, L=L, n=n, threshold=0.0, label="S")


def build_bracket_operator(sign: str, profile: CurvatureProfile, bounds: CurveBounds,
                           a: float, L: float, n: int) -> Operator1DSpec:
    """U±_a = -(1 ∓ aγ₊)⁻² d²/ds² + V⁽±⁾."""
    if sign not in SIGNS:
        raise ParameterError(f"Unknown bracket sign '{sign}'", {"known": SIGNS})
    if not profile.decays:
        raise ParameterError("Bracket operators need a decaying curvature", {"family": profile.family})
    if a < 0:
        raise ParameterError("Half-width must be nonnegative", {"a": a})
    ag = a * bounds.gamma_plus
    if ag >= 0.5:
        raise ParameterError("Bracket operators need a*gamma_plus < 1/2", {"a_gamma_plus": ag})
    _validate(L, n)

    v_plus, v_minus = bracket_potentials(bounds, profile, a)
    floor_plus, floor_minus = bracket_thresholds(bounds, a)
    if sign == "plus":
        return Operator1DSpec(c_kin=(1.0 - ag) ** -2, potential=v_plus, L=L, n=n,
                              threshold=floor_plus, label="Uplus")
    return Operator1DSpec(c_kin=(1.0 + ag) ** -2, potential=v_minus, L=L, n=n,
                          threshold=floor_minus, label="Uminus")


def resize(spec: Operator1DSpec, L: float, n: int) -> Operator1DSpec:
    return Operator1DSpec(c_kin=spec.c_kin, potential=spec.potential, L=L, n=n,
                          threshold=spec.threshold, label=spec.label)


def default_truncation(profile: CurvatureProfile, step: float = FD1D_STEP) -> Tuple[float, int]:
    """Initial (L, n): decay radius plus ten decay lengths of the lowest bound state."""
    S = 0.0 if profile.is_straight else profile.decay_radius()
    trial = build_comparison_operator(profile, S + 40.0, grid_count(S + 40.0, 0.1))
    values = _eigenvalues(trial, 1, below_threshold_only=True)
    if values.size == 0:
        L = S + 20.0
    else:
        L = S + 10.0 / math.sqrt(abs(trial.threshold - values[0]))
    return L, grid_count(L, step)


# -----------------------------------------------------------------------------
# Eigenvalues
# -----------------------------------------------------------------------------
def _eigenvalues(spec: Operator1DSpec, k: int, below_threshold_only: bool) -> np.ndarray:
    h = spec.h
    W = np.asarray(spec.potential(spec.nodes()), dtype=float)
    d = 2.0 * spec.c_kin / h ** 2 + W
    e = np.full(spec.n - 1, -spec.c_kin / h ** 2)
    if below_threshold_only:
        # Gershgorin: the spectrum lies above min(W)
        vals = eigh_tridiagonal(d, e, eigvals_only=True, select="v",
                                select_range=(float(W.min()) - 1.0, spec.threshold),
                                lapack_driver="stebz")
        return np.sort(vals)[:k]
    return eigh_tridiagonal(d, e, eigvals_only=True, select="i",
                            select_range=(0, min(k, spec.n) - 1), lapack_driver="stebz")


def _common(*arrays: np.ndarray) -> int:
    return min(a.size for a in arrays)


def _multiplicities(values: Sequence[float]) -> Tuple[int, ...]:
    out = []
    for v in values:
        tol = MULTIPLICITY_RTOL * max(abs(v), 1.0)
        out.append(sum(1 for w in values if abs(w - v) <= tol))
    return tuple(out)


def lowest_eigenvalues_1d(spec: Operator1DSpec, k: int, *, below_threshold_only: bool = True,
                          adapt_truncation: bool = True, rtol: float = TRUNCATION_RTOL) -> Spectrum1D:
    """Up to k lowest eigenvalues, below spec.threshold unless the filter is off.

    Returned values are Richardson-extrapolated; err_disc is the h → h/2
    estimate and err_trunc the last change under L doubling.
    """
    if k < 1:
        raise ParameterError("k must be >= 1", {"k": k})
    started = time.monotonic()

    current = spec
    base = _eigenvalues(current, k, below_threshold_only)
    trunc = np.zeros(base.size)
    if adapt_truncation and base.size:
        for _ in range(TRUNCATION_MAX_DOUBLINGS):
            wider = resize(current, 2.0 * current.L, 2 * current.n + 1)
            values = _eigenvalues(wider, k, below_threshold_only)
            m = _common(base, values)
            change = np.abs(values[:m] - base[:m])
            scale = max(abs(values[0]), abs(values[0] - spec.threshold))
            current, base, trunc = wider, values, np.concatenate([change, np.zeros(values.size - m)])
            if m and np.max(change) <= rtol * scale:
                break
        else:
            logger.warning("%s: truncation did not settle after %d doublings (L=%.4g)",
                           spec.label, TRUNCATION_MAX_DOUBLINGS, current.L)

    half = _eigenvalues(resize(current, current.L, 2 * current.n + 1), k, below_threshold_only)
    quarter = _eigenvalues(resize(current, current.L, 4 * current.n + 3), k, below_threshold_only)
    m = _common(base, half, quarter)

    values: List[float] = []
    err_disc: List[float] = []
    orders: List[float] = []
    for j in range(m):
        values.append(richardson.extrapolate(half[j], quarter[j]))
        err_disc.append(richardson.error_estimate(half[j], quarter[j]))
        orders.append(richardson.observed_order([base[j], half[j], quarter[j]]))

    result = Spectrum1D(
        values=tuple(values),
        err_disc=tuple(err_disc),
        err_trunc=tuple(float(t) for t in trunc[:m]),
        multiplicities=_multiplicities(values),
        orders=tuple(orders),
        requested=k,
        L=current.L,
        n=current.n,
        threshold=spec.threshold,
    )
    if result.truncated:
        logger.info("%s: %d of %d requested eigenvalues below threshold %.6g",
                    spec.label, m, k, spec.threshold)
    logger.debug("%s solved in %s (L=%.4g, n=%d)", spec.label,
                 format_timespan(time.monotonic() - started), current.L, current.n)
    return result


# -----------------------------------------------------------------------------
# Bracket envelope |μ±_j(a) - μ_j| ≤ C a j²
# -----------------------------------------------------------------------------
def lemma_long_check(profile: CurvatureProfile, bounds: CurveBounds, a_list: Sequence[float],
                     j_max: int, *, L: Optional[float] = None, n: Optional[int] = None) -> BracketEnvelopeReport:
    if j_max < 1:
        raise ParameterError("j_max must be >= 1", {"j_max": j_max})
    a_sorted = sorted(a_list, reverse=True)
    for a in a_sorted:
        if a <= 0 or a * bounds.gamma_plus >= 0.5:
            raise ParameterError("Each a must satisfy a > 0 and a*gamma_plus < 1/2", {"a": a})
    if L is None or n is None:
        L, n = default_truncation(profile)

    mu = lowest_eigenvalues_1d(build_comparison_operator(profile, L, n), j_max).values
    brackets = {}
    available = len(mu)
    for a in a_sorted:
        for sign in SIGNS:
            spec = lowest_eigenvalues_1d(build_bracket_operator(sign, profile, bounds, a, L, n), j_max)
            brackets[(a, sign)] = spec.values
            available = min(available, len(spec.values))

    restricted = available < j_max
    if restricted:
        logger.warning("Only %d of %d bound states available for every operator; restricting j", available, j_max)

    rows: List[BracketEnvelopeRow] = []
    per_a: List[float] = []
    for a in a_sorted:
        worst = 0.0
        for sign in SIGNS:
            for j in range(1, available + 1):
                diff = abs(brackets[(a, sign)][j - 1] - mu[j - 1])
                rows.append(BracketEnvelopeRow(a=a, j=j, sign=sign, mu=mu[j - 1],
                                         mu_pm=brackets[(a, sign)][j - 1], difference=diff))
                worst = max(worst, diff / (a * j * j))
        per_a.append(worst)

    positive = [c for c in per_a if c > 0]
    stable = not positive or max(positive) <= 2.0 * min(positive)
    C = max(per_a) if per_a else 0.0
    logger.info("Bracket envelope constant C=%.6g over a=%s (stable=%s)", C, a_sorted, stable)
    return BracketEnvelopeReport(C=C, per_a_C=tuple(per_a), rows=tuple(rows), j_max=available,
                           restricted=restricted, stable=stable)
