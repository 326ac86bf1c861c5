# app/bracketing_asymptotics.py
"""
Strong-coupling bracketing.

The separable operators B±_β have spectra t±(a, β) + μ±_j(a); with the
half-width schedule a(β) = -(3/4) β ln β they squeeze λ_j(H_β) onto
-4/β² + μ_j up to O(β|ln β|). This module puts the pieces from the
transverse, 1D and 2D solvers together and checks that law.
"""

import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from tqdm import tqdm

from app.config import STRIP_NS, STRIP_NU, TAU_GRID
from app.curve_geometry import CurvatureProfile, curve_bounds, v_tau
from app.data_types import (
    AsymptoticsReport,
    BracketedSpectrum,
    BracketRecord,
    CurveBounds,
    EssentialThresholdBound,
    FormSide,
)
from app.errors import NumericalError, ParameterError, RegimeError
from app.schrodinger_1d import (
    build_bracket_operator,
    build_comparison_operator,
    default_truncation,
    lowest_eigenvalues_1d,
)
from app.strip_solver_2d import convergence_study, default_grading
from app.transverse_spectrum import (
    envelope_gap,
    in_transverse_regime,
    transverse_eigenvalue_dirichlet,
    transverse_eigenvalue_robin,
)

logger = logging.getLogger("bracketing_asymptotics")

# a/β = -(3/4) ln β exceeds 2 iff β < e^{-8/3}
SCHEDULE_REGIME_EDGE = math.exp(-8.0 / 3.0)


def halfwidth_schedule(beta: float) -> float:
    """a(β) = -(3/4) β ln β."""
    if not 0.0 < beta < 1.0:
        raise ParameterError("Half-width schedule needs 0 < beta < 1", {"beta": beta})
    a = -0.75 * beta * math.log(beta)
    if not schedule_in_regime(beta):
        logger.warning("beta=%.4g gives a/beta=%.4g <= 2, outside the transverse regime", beta, a / beta)
    return a


def schedule_in_regime(beta: float) -> bool:
    return beta < SCHEDULE_REGIME_EDGE


def _resolve(profile: CurvatureProfile, beta: float, a: Optional[float],
             bounds: Optional[CurveBounds], override: bool) -> Tuple[float, CurveBounds, bool]:
    bounds = bounds or curve_bounds(profile)
    a = halfwidth_schedule(beta) if a is None else a
    in_regime = in_transverse_regime(a, beta, bounds.gamma_plus) and a * bounds.gamma_plus < 0.5
    if not in_regime:
        if not override:
            raise RegimeError("Bracketing needs a/beta > 2, 2/beta > gamma_plus and a*gamma_plus < 1/2",
                              {"beta": beta, "a": a, "gamma_plus": bounds.gamma_plus})
        logger.warning("beta=%.4g, a=%.4g outside the regime; checks are informational", beta, a)
    return a, bounds, in_regime


# -----------------------------------------------------------------------------
# Brackets
# -----------------------------------------------------------------------------
class StripOffsets(NamedTuple):
    values: Sequence[Optional[float]]
    errors: Sequence[Optional[float]]

    @classmethod
    def empty(cls, m: int) -> "StripOffsets":
        return cls([None] * m, [None] * m)


def bracket_spectrum(profile: CurvatureProfile, beta: float, k: int, *, a: Optional[float] = None,
                     bounds: Optional[CurveBounds] = None, L: Optional[float] = None, n: Optional[int] = None,
                     direct: bool = False, n_s: int = STRIP_NS, n_u: int = STRIP_NU,
                     grading: Optional[float] = None, override: bool = False) -> BracketedSpectrum:
    """t± + μ±_j(a) for j ≤ k, the prediction -4/β² + μ_j, and optionally direct λ±_j.

    Direct solves are three-level convergence studies starting at (n_s, n_u)
    on a u-grid graded toward the interface; they report Richardson values
    with their error estimates. Every 1D operator is then kept at the strip's
    truncation length so the four quantities are compared on one domain.
    """
    if k < 1:
        raise ParameterError("k must be >= 1", {"k": k})
    a, bounds, in_regime = _resolve(profile, beta, a, bounds, override)
    t_plus = transverse_eigenvalue_dirichlet(a, beta, override=override)
    t_minus = transverse_eigenvalue_robin(a, beta, bounds.gamma_plus, override=override)

    if L is None or n is None:
        L, n = default_truncation(profile)
    adapt = not direct
    mu = lowest_eigenvalues_1d(build_comparison_operator(profile, L, n), k, adapt_truncation=adapt)
    mu_plus = lowest_eigenvalues_1d(build_bracket_operator("plus", profile, bounds, a, L, n), k,
                                    adapt_truncation=adapt)
    mu_minus = lowest_eigenvalues_1d(build_bracket_operator("minus", profile, bounds, a, L, n), k,
                                     adapt_truncation=adapt)
    m = min(len(mu.values), len(mu_plus.values), len(mu_minus.values))

    lam_plus = lam_minus = StripOffsets.empty(m)
    if direct and m:
        grading = default_grading(a, beta) if grading is None else grading
        lam_plus = _direct_offsets(profile, a, beta, L, n_s, n_u, FormSide.PLUS, m, bounds, grading)
        lam_minus = _direct_offsets(profile, a, beta, L, n_s, n_u, FormSide.MINUS, m, bounds, grading)

    records = tuple(
        BracketRecord(
            j=j + 1,
            beta=beta,
            mu=mu.values[j],
            mu_minus=mu_minus.values[j],
            mu_plus=mu_plus.values[j],
            lower_offset=t_minus.offset + mu_minus.values[j],
            upper_offset=t_plus.offset + mu_plus.values[j],
            lambda_minus_offset=lam_minus.values[j],
            lambda_plus_offset=lam_plus.values[j],
            lower_err=mu_minus.err_disc[j],
            upper_err=mu_plus.err_disc[j],
            lambda_minus_err=lam_minus.errors[j],
            lambda_plus_err=lam_plus.errors[j],
        )
        for j in range(m)
    )
    if m < k:
        logger.info("beta=%.4g: %d of %d bracket records available", beta, m, k)
    for record in records:
        if record.sandwiched is False:
            logger.warning("beta=%.4g, j=%d: direct solves leave the brackets, gaps %s",
                           beta, record.j, record.sandwich_gaps())
    return BracketedSpectrum(beta=beta, a=a, in_regime=in_regime, t_plus=t_plus, t_minus=t_minus,
                             records=records, requested=k)


def _direct_offsets(profile: CurvatureProfile, a: float, beta: float, L: float, n_s: int, n_u: int,
                    side: FormSide, k: int, bounds: CurveBounds, grading: float) -> StripOffsets:
    report = convergence_study(profile, a, beta, L, n_s, n_u, side, k=k, bounds=bounds, grading=grading)
    return StripOffsets([v + 4.0 / beta ** 2 for v in report.extrapolated], list(report.errors))


# -----------------------------------------------------------------------------
# Essential spectrum threshold
# -----------------------------------------------------------------------------
def ess_threshold_bound(profile: CurvatureProfile, beta: float, tau: float, a: Optional[float] = None, *,
                        tau_grid: Iterable[float] = TAU_GRID,
                        bounds: Optional[CurveBounds] = None) -> EssentialThresholdBound:
    """V_τ - 4/β² - (16/β²) e^{-4a/β}, and its sup over the τ-grid."""
    bounds = bounds or curve_bounds(profile)
    a = halfwidth_schedule(beta) if a is None else a
    if not in_transverse_regime(a, beta):
        raise RegimeError("Threshold bound needs a/beta > 2", {"a_over_beta": a / beta})
    if tau < 0:
        raise ParameterError("tau must be nonnegative", {"tau": tau})
    gap = envelope_gap(a, beta)

    def offset(t: float) -> float:
        return v_tau(profile, a, t, bounds) - gap

    here = offset(tau)
    best_tau, best = tau, here
    for t in tau_grid:
        value = offset(float(t))
        if value > best:
            best_tau, best = float(t), value
    return EssentialThresholdBound(beta=beta, tau=tau, a=a, v_tau=here + gap, offset=here,
                                   certified_offset=best, certified_tau=best_tau)


def bound_state_margin(profile: CurvatureProfile, beta: float, *, a: Optional[float] = None,
                       bounds: Optional[CurveBounds] = None, L: Optional[float] = None,
                       n: Optional[int] = None) -> float:
    """Certified threshold minus the upper bracket t₊ + μ⁺₁(a); positive certifies a bound state."""
    bounds = bounds or curve_bounds(profile)
    a = halfwidth_schedule(beta) if a is None else a
    if L is None or n is None:
        L, n = default_truncation(profile)
    threshold = ess_threshold_bound(profile, beta, TAU_GRID[-1], a, bounds=bounds)
    upper = lowest_eigenvalues_1d(build_bracket_operator("plus", profile, bounds, a, L, n), 1).values
    if not upper:
        return -math.inf
    t_plus = transverse_eigenvalue_dirichlet(a, beta, override=True)
    return threshold.certified_offset - (t_plus.offset + upper[0])


def find_beta0(profile: CurvatureProfile, beta_hi: float = 0.06, beta_lo: float = 1e-6, *,
               bounds: Optional[CurveBounds] = None) -> float:
    """Largest β on the schedule (to 0.1% in log β) where the upper bracket sits below the threshold."""
    if profile.is_straight:
        raise ParameterError("A straight curve has no bound states")
    bounds = bounds or curve_bounds(profile)
    L, n = default_truncation(profile)

    def margin(log_beta: float) -> float:
        return bound_state_margin(profile, math.exp(log_beta), bounds=bounds, L=L, n=n)

    hi, lo = math.log(beta_hi), math.log(beta_lo)
    if margin(hi) > 0:
        return beta_hi
    if margin(lo) <= 0:
        raise NumericalError("No certified bound state down to beta_lo", {"beta_lo": beta_lo})
    root = optimize.brentq(margin, lo, hi, xtol=1e-3, maxiter=60)
    # step to the certified side of the root
    beta0 = math.exp(root - 1e-3)
    logger.info("Bound state certified below beta0=%.6g", beta0)
    return beta0


# -----------------------------------------------------------------------------
# Asymptotics
# -----------------------------------------------------------------------------
def asymptotics_study(profile: CurvatureProfile, betas: Sequence[float], k: int = 1, *, direct: bool = False,
                      n_s: int = STRIP_NS, n_u: int = STRIP_NU, jobs: int = 1,
                      override: bool = False) -> AsymptoticsReport:
    """Residuals r_j = λ_j + 4/β² - μ_j over a β grid and the fit |r_j| ≈ C β|ln β|."""
    if not betas:
        raise ParameterError("Empty beta grid")
    betas = sorted(betas, reverse=True)
    bounds = curve_bounds(profile)
    L, n = default_truncation(profile)
    in_regime = all(schedule_in_regime(b) for b in betas)
    if not in_regime:
        if not override:
            raise RegimeError("beta grid leaves the regime", {"edge": SCHEDULE_REGIME_EDGE, "betas": betas})
        logger.warning("beta grid leaves the regime; the fitted law is informational")

    def one(beta: float) -> BracketedSpectrum:
        return bracket_spectrum(profile, beta, k, bounds=bounds, L=L, n=n, direct=direct,
                                n_s=n_s, n_u=n_u, override=override)

    progress = tqdm(total=len(betas), desc="asymptotics", disable=not sys.stderr.isatty())
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        spectra = []
        for spectrum in pool.map(one, betas):
            spectra.append(spectrum)
            progress.update(1)
    progress.close()

    rows, ratios = [], []
    for spectrum in spectra:
        scale = spectrum.beta * abs(math.log(spectrum.beta))
        for record in spectrum.records:
            rows.append((spectrum.beta, spectrum.a, record))
            ratios.append(abs(record.worst_residual()) / scale)

    if ratios and min(ratios) > 0:
        C_fit = float(np.exp(np.mean(np.log(ratios))))
        spread = max(ratios) / min(ratios)
    else:
        C_fit, spread = 0.0, 1.0
    bounded = spread < 2.0
    if not bounded:
        logger.warning("Residual ratio spread %.3g over the beta grid", spread)
    return AsymptoticsReport(records=tuple(rows), ratios=tuple(ratios), C_fit=C_fit, spread=spread,
                             bounded=bounded, in_regime=in_regime)
