# app/transverse_spectrum.py
"""
Transverse operators T±(s) = -d²/du² on (-a, a)∖{0} with δ′ matching

    f′(0₋) = f′(0₊) = -β⁻¹(f(0₊) - f(0₋)) + ½γ(s)(f(0₊) + f(0₋))

and f(±a) = 0 (plus case) or f′(±a) = ∓γ₊ f(±a) (minus case).

Writing f = e + o with e even and o odd about u = 0, the even part has
e′(0) = 0 and the odd part o′(0) = -(2/β)o(0) + γ(s)e(0). The system is
block-triangular, so γ(s) never moves the spectrum; the negative
eigenvalue is the odd one:

    plus:   κ = (2/β) tanh(κa)
    minus:  tanh(κa) = κ(2/β - γ₊) / (κ² - 2γ₊/β)
"""

import logging
import math
from typing import Tuple

import numpy as np
from scipy import optimize, sparse
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import eigs

from app.config import BISECTION_RTOL
from app.data_types import EndCondition, TransverseEigenvalue, TransverseProblem
from app.errors import ParameterError, RegimeError, SolverError

logger = logging.getLogger("transverse_spectrum")

_BRENT_RTOL = max(BISECTION_RTOL, 4.0 * np.finfo(float).eps)
_MAX_WIDENINGS = 60


# -----------------------------------------------------------------------------
# Regime bookkeeping
# -----------------------------------------------------------------------------
def in_transverse_regime(a: float, beta: float, gamma_plus: float = 0.0) -> bool:
    return a / beta > 2.0 and 2.0 / beta > gamma_plus


def envelope_gap(a: float, beta: float) -> float:
    """(16/β²) e^{-4a/β}."""
    return 16.0 / beta ** 2 * math.exp(-4.0 * a / beta)


def dirichlet_envelope_slack(a: float, beta: float) -> float:
    """Second-order excess of the exact t₊ over the envelope, ≈ gap·(8a/β)e^{-4a/β}, doubled."""
    return 2.0 * envelope_gap(a, beta) * (8.0 * a / beta) * math.exp(-4.0 * a / beta)


def lemma_trans_envelope(a: float, beta: float) -> Tuple[float, float]:
    """(-4/β² - (16/β²)e^{-4a/β}, -4/β² + (16/β²)e^{-4a/β})."""
    _check_positive(a, beta)
    if a / beta <= 2.0:
        raise RegimeError("Transverse envelope needs a/beta > 2", {"a_over_beta": a / beta})
    gap = envelope_gap(a, beta)
    return -4.0 / beta ** 2 - gap, -4.0 / beta ** 2 + gap


def _check_positive(a: float, beta: float) -> None:
    if not (a > 0 and beta > 0):
        raise ParameterError("Transverse problem needs a > 0 and beta > 0", {"a": a, "beta": beta})


def _check_regime(a: float, beta: float, gamma_plus: float, override: bool) -> None:
    _check_positive(a, beta)
    if in_transverse_regime(a, beta, gamma_plus):
        return
    if not override:
        raise RegimeError("Outside the transverse regime a/beta > 2, 2/beta > gamma_plus",
                          {"a_over_beta": a / beta, "two_over_beta": 2.0 / beta, "gamma_plus": gamma_plus})
    logger.warning("Transverse solve below regime (a/beta=%.3g); envelope checks are informational", a / beta)


def _one_minus_tanh(x: float) -> float:
    e = math.exp(-2.0 * x)
    return 2.0 * e / (1.0 + e)


def _matching_residual(kappa: float, a: float, beta: float, gamma_plus: float, end: EndCondition) -> float:
    """Relative defect of f′(0₊) = -β⁻¹(f(0₊) - f(0₋)) for the odd eigenfunction.

    On (0, a) the eigenfunction is φ(a - u) with φ(w) = sinh κw (Dirichlet) or
    κ cosh κw + γ₊ sinh κw (Robin); φ and φ′ are scaled by cosh κa.
    """
    T = math.tanh(kappa * a)
    if end is EndCondition.DIRICHLET:
        phi, dphi = T, kappa
    else:
        phi, dphi = kappa + gamma_plus * T, kappa * (kappa * T + gamma_plus)
    lhs, rhs = -dphi, -2.0 * phi / beta
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs))


# -----------------------------------------------------------------------------
# Transcendental solutions
# -----------------------------------------------------------------------------
def transverse_eigenvalue_dirichlet(a: float, beta: float, *, override: bool = False) -> TransverseEigenvalue:
    """Unique negative eigenvalue of T⁺: κ = (2/β) tanh(κa), root in (0, 2/β)."""
    _check_regime(a, beta, 0.0, override)
    k2 = 2.0 / beta

    def G(kappa: float) -> float:
        return kappa - k2 * math.tanh(kappa * a)

    lo, hi = 1e-9 * k2, k2
    if G(lo) >= 0.0:
        raise RegimeError("No sign change for the Dirichlet transverse equation",
                          {"a_over_beta": a / beta})
    kappa = optimize.brentq(G, lo, hi, xtol=1e-300, rtol=_BRENT_RTOL, maxiter=500)
    if k2 * a > 1.0:
        # contraction with factor (2a/β) sech²(κa); settles to the last ulp
        for _ in range(3):
            kappa = k2 * math.tanh(kappa * a)
    x = kappa * a
    e = math.exp(-2.0 * x)
    offset = (4.0 / beta ** 2) * 4.0 * e / (1.0 + e) ** 2   # (4/β²) sech²(κa)
    result = TransverseEigenvalue(
        value=-kappa ** 2,
        kappa=kappa,
        offset=offset,
        method="transcendental",
        residual=_matching_residual(kappa, a, beta, 0.0, EndCondition.DIRICHLET),
    )
    logger.debug("t_plus(a=%.4g, beta=%.4g) = %.15g", a, beta, result.value)
    return result


def transverse_eigenvalue_robin(a: float, beta: float, gamma_plus: float, *,
                                override: bool = False) -> TransverseEigenvalue:
    """Unique negative eigenvalue of T⁻, root κ ≥ 2/β."""
    if gamma_plus < 0:
        raise ParameterError("gamma_plus must be nonnegative", {"gamma_plus": gamma_plus})
    k2 = 2.0 / beta
    if not gamma_plus < k2:
        raise RegimeError("Robin transverse problem needs 2/beta > gamma_plus",
                          {"two_over_beta": k2, "gamma_plus": gamma_plus})
    _check_regime(a, beta, gamma_plus, override)

    def F(kappa: float) -> float:
        T = math.tanh(kappa * a)
        return kappa * (kappa * T + gamma_plus) - k2 * (kappa + gamma_plus * T)

    lo, hi = k2, k2 + gamma_plus + 1.0 / a
    for _ in range(_MAX_WIDENINGS):
        if F(hi) > 0.0:
            break
        hi = k2 + 2.0 * (hi - k2)
    else:
        raise RegimeError("Could not bracket the Robin transverse root", {"hi": hi})
    kappa = optimize.brentq(F, lo, hi, xtol=1e-300, rtol=_BRENT_RTOL, maxiter=500)

    # κ - 2/β = (1 - tanh κa)(κ² - 2γ₊/β)/(κ + γ₊), a contraction for the tiny gap
    for _ in range(3):
        delta = _one_minus_tanh(kappa * a) * (kappa ** 2 - gamma_plus * k2) / (kappa + gamma_plus)
        kappa = k2 + delta
    result = TransverseEigenvalue(
        value=-kappa ** 2,
        kappa=kappa,
        offset=-delta * (kappa + k2),
        method="transcendental",
        residual=_matching_residual(kappa, a, beta, gamma_plus, EndCondition.ROBIN),
    )
    logger.debug("t_minus(a=%.4g, beta=%.4g, gamma_plus=%.4g) = %.15g", a, beta, gamma_plus, result.value)
    return result


def solve_transverse(problem: TransverseProblem, *, override: bool = False) -> TransverseEigenvalue:
    if problem.end is EndCondition.DIRICHLET:
        return transverse_eigenvalue_dirichlet(problem.a, problem.beta, override=override)
    return transverse_eigenvalue_robin(problem.a, problem.beta, problem.gamma_plus, override=override)


# -----------------------------------------------------------------------------
# Finite-element oracle
# -----------------------------------------------------------------------------
def _half_interval_blocks(problem: TransverseProblem, n: int):
    """P1 stiffness blocks (even, odd) on [0, a] with lumped mass, as (diag, off, mass)."""
    h = problem.a / n
    nodes = n + 1 if problem.end is EndCondition.ROBIN else n   # Dirichlet drops u = a
    diag = np.full(nodes, 2.0 / h)
    diag[0] = 1.0 / h
    off = np.full(nodes - 1, -1.0 / h)
    mass = np.full(nodes, h)
    mass[0] = 0.5 * h
    if problem.end is EndCondition.ROBIN:
        diag[-1] = 1.0 / h + problem.gamma_plus
        mass[-1] = 0.5 * h
    even = diag.copy()
    odd = diag.copy()
    odd[0] -= 2.0 / problem.beta
    return even, odd, off, mass


def _assert_symmetric(diag: np.ndarray, off: np.ndarray) -> sparse.csr_matrix:
    K = sparse.diags([off, diag, off], [-1, 0, 1], format="csr")
    if (K - K.T).count_nonzero():
        raise AssertionError("Transverse stiffness matrix is not symmetric")
    return K


def transverse_fd_oracle(problem: TransverseProblem, n: int, *, coupled: bool = False) -> TransverseEigenvalue:
    """Lowest eigenvalue of the discretized T± with n elements per half-interval.

    The symmetric path solves the even and odd blocks with Sturm bisection; the
    coupled path keeps the γ(s) average term as an off-diagonal block and
    solves the non-symmetric pencil by shift-invert.
    """
    if n < 16:
        raise ParameterError("Transverse oracle needs n >= 16", {"n": n})
    _check_positive(problem.a, problem.beta)
    even, odd, off, mass = _half_interval_blocks(problem, n)
    inv_sqrt = 1.0 / np.sqrt(mass)
    scaled_off = off * inv_sqrt[:-1] * inv_sqrt[1:]

    if coupled:
        return _coupled_oracle(problem, even, odd, off, mass)

    lowest, negative, residual = math.inf, 0, 0.0
    for block in (even, odd):
        _assert_symmetric(block, off)
        d = block * inv_sqrt ** 2
        vals, vecs = eigh_tridiagonal(d, scaled_off, select="i", select_range=(0, 0))
        r = _tridiagonal_residual(d, scaled_off, vals[0], vecs[:, 0])
        negatives = eigh_tridiagonal(d, scaled_off, eigvals_only=True, select="v",
                                     select_range=(float(np.min(d) - 2 * np.max(np.abs(scaled_off)) - 1.0), 0.0))
        negative += int(np.sum(negatives < 0.0))
        if vals[0] < lowest:
            lowest, residual = float(vals[0]), r

    return TransverseEigenvalue(
        value=lowest,
        kappa=math.sqrt(-lowest) if lowest < 0 else 0.0,
        offset=lowest + 4.0 / problem.beta ** 2,
        method="finite-difference",
        residual=residual,
        negative_count=negative,
    )


def _tridiagonal_residual(d: np.ndarray, e: np.ndarray, lam: float, v: np.ndarray) -> float:
    Av = d * v
    Av[:-1] += e * v[1:]
    Av[1:] += e * v[:-1]
    return float(np.linalg.norm(Av - lam * v) / max(abs(lam), 1.0))


def _coupled_oracle(problem: TransverseProblem, even, odd, off, mass) -> TransverseEigenvalue:
    m = even.size
    K_e = _assert_symmetric(even, off)
    K_o = _assert_symmetric(odd, off)
    C = sparse.csr_matrix(([problem.gamma_s], ([0], [0])), shape=(m, m))
    A = sparse.bmat([[K_e, None], [C, K_o]], format="csc")
    M = sparse.diags(np.concatenate([mass, mass]), format="csc")
    sigma = -(5.0 + 16.0 * math.exp(-4.0 * problem.a / problem.beta)) / problem.beta ** 2
    try:
        vals, vecs = eigs(A, k=1, M=M, sigma=sigma, which="LM", v0=np.ones(2 * m))
    except Exception as e:
        raise SolverError(f"Coupled transverse solve failed: {e}") from e
    lam = float(vals[0].real)
    v = vecs[:, 0]
    residual = float(np.linalg.norm(A @ v - lam * (M @ v)) / np.linalg.norm(M @ v) / max(abs(lam), 1.0))
    return TransverseEigenvalue(
        value=lam,
        kappa=math.sqrt(-lam) if lam < 0 else 0.0,
        offset=lam + 4.0 / problem.beta ** 2,
        method="coupled",
        residual=residual,
        negative_count=-1,   # not counted on this path
    )
