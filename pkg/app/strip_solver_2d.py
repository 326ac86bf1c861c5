# app/strip_solver_2d.py
"""
Quadratic forms q± on the truncated strip (-L, L) × ((-a, 0) ∪ (0, a)).

    q[f] = ‖∂_s f / g‖² + ‖∂_u f‖² + (f, V f)
           - β⁻¹ ∫ |f(s, 0₊) - f(s, 0₋)|² ds + ½ ∫ γ (|f(s, 0₊)|² - |f(s, 0₋)|²) ds

q⁺ takes Dirichlet conditions at u = ±a; q⁻ keeps the traces at u = ±a and
adds -∫ γ/(2(1+aγ)) |f(s, a)|² + ∫ γ/(2(1-aγ)) |f(s, -a)|². Both use
Dirichlet ends at s = ±L.

Assembly is edge based on the tensor grid: each mesh edge contributes
c (f_x - f_y)² with nodal (trapezoidal) quadrature, which reproduces the
bilinear-element stiffness with lumped mass to second order. The u-nodes may
be graded toward the interface by a smooth map, which keeps the order.
"""

import logging
import math
import time
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from humanfriendly import format_timespan
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from app import richardson
from app.config import EIGEN_MAXITER, EIGEN_RTOL, ORDER_FLAG_THRESHOLD, STRIP_GRADING_MAX
from app.curve_geometry import CurvatureProfile, bracket_thresholds, curve_bounds, geometric_potential, metric_factor
from app.data_types import ConvergenceReport, CurveBounds, FormSide, StripGrid, SymmetricOperator2D
from app.errors import GeometryError, ParameterError, SolverError

logger = logging.getLogger("strip_solver_2d")

_V0_SEED = 20240101


# -----------------------------------------------------------------------------
# Grid
# -----------------------------------------------------------------------------
def default_grading(a: float, beta: float) -> float:
    """Log ratio of outer to inner u-spacing for the bound transverse mode.

    Spacing ∝ e^{2κu/3} with κ = 2/β equidistributes the interpolation error
    of e^{-κu}; the ratio is capped at e^{STRIP_GRADING_MAX}.
    """
    if math.isinf(beta):
        return 0.0
    return min(4.0 * a / (3.0 * beta), STRIP_GRADING_MAX)


def graded_offsets(a: float, n_u: int, grading: float = 0.0) -> np.ndarray:
    """Nodes 0 = x_0 < ... < x_n = a whose spacing grows smoothly by e^grading."""
    xi = np.arange(n_u + 1) / n_u
    if grading <= 0.0:
        x = a * xi
    else:
        x = -(a / grading) * np.log1p(xi * np.expm1(-grading))
    x[0], x[-1] = 0.0, a
    return x


def _dual_lengths(nodes: np.ndarray) -> np.ndarray:
    d = np.diff(nodes)
    w = np.zeros(nodes.size)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def build_strip_grid(L: float, n_s: int, a: float, n_u: int, side: FormSide,
                     grading: float = 0.0) -> StripGrid:
    """Tensor grid with interior s nodes and a doubled row at u = 0.

    n_u counts elements per side; `grading` > 0 refines them toward u = 0.
    The plus side drops the Dirichlet rows at u = ±a; the minus side keeps them.
    """
    if not (L > 0 and a > 0):
        raise ParameterError("Strip grid needs L > 0 and a > 0", {"L": L, "a": a})
    if n_s < 3 or n_u < 2:
        raise ParameterError("Strip grid needs n_s >= 3 and n_u >= 2", {"n_s": n_s, "n_u": n_u})
    if not 0.0 <= grading <= 20.0:
        raise ParameterError("Grading must lie in [0, 20]", {"grading": grading})
    side = FormSide(side)
    h_s = 2.0 * L / (n_s + 1)
    s = -L + h_s * np.arange(1, n_s + 1)

    x = graded_offsets(a, n_u, grading)
    lower, upper = -x[::-1], x                     # -a .. 0⁻ and 0⁺ .. a
    u = np.concatenate([lower, upper])
    weights = np.concatenate([_dual_lengths(lower), _dual_lengths(upper)])
    if side is FormSide.PLUS:
        u, weights = u[1:-1], weights[1:-1]
    i0m = int(np.flatnonzero(u == 0.0)[0])
    return StripGrid(L=L, n_s=n_s, a=a, n_u=n_u, side=side, s=s, u=u,
                     u_weights=weights, interface=(i0m, i0m + 1), grading=grading)


# -----------------------------------------------------------------------------
# Assembly
# -----------------------------------------------------------------------------
class _Triplets:
    def __init__(self):
        self.rows: List[np.ndarray] = []
        self.cols: List[np.ndarray] = []
        self.vals: List[np.ndarray] = []

    def diag(self, x: np.ndarray, c) -> None:
        x = np.asarray(x)
        c = np.broadcast_to(np.asarray(c, dtype=float), x.shape).ravel()
        x = x.ravel()
        self.rows.append(x)
        self.cols.append(x)
        self.vals.append(c)

    def pair(self, x: np.ndarray, y: np.ndarray, c) -> None:
        """Adds c (f_x - f_y)²."""
        x, y = np.asarray(x), np.asarray(y)
        c = np.broadcast_to(np.asarray(c, dtype=float), x.shape).ravel()
        x, y = x.ravel(), y.ravel()
        self.diag(x, c)
        self.diag(y, c)
        self.rows += [x, y]
        self.cols += [y, x]
        self.vals += [-c, -c]

    def matrix(self, size: int) -> sparse.csr_matrix:
        return sparse.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(size, size),
        ).tocsr()


def shift_below(beta: float, a: float, bounds: CurveBounds) -> float:
    """Envelope lower bound minus 1/β², lowered further by the potential and trace terms."""
    inv_b2 = 0.0 if math.isinf(beta) else 1.0 / beta ** 2
    envelope = -(4.0 + 16.0 * math.exp(-4.0 * a / beta)) * inv_b2 - inv_b2
    lo = 1.0 - a * bounds.gamma_plus
    _, floor_minus = bracket_thresholds(bounds, a)
    potential = floor_minus - bounds.gamma_plus ** 2 / (4.0 * lo ** 2)
    trace = bounds.gamma_plus / lo * (1.0 / a + bounds.gamma_plus / lo)
    return envelope + potential - trace - 1.0


def assemble_form(profile: CurvatureProfile, a: float, beta: float, L: float, grid: StripGrid,
                  which: Union[FormSide, str], *, bounds: Optional[CurveBounds] = None,
                  halfwidth: Optional[float] = None) -> SymmetricOperator2D:
    """Sparse stiffness A and lumped mass M of q⁺ (which="plus") or q⁻ (which="minus")."""
    which = FormSide(which)
    if which is not grid.side:
        raise ParameterError("Grid side does not match the requested form", {"grid": grid.side.value, "which": which.value})
    if not (math.isclose(grid.a, a) and math.isclose(grid.L, L)):
        raise ParameterError("Grid was built for another strip", {"grid_a": grid.a, "a": a, "grid_L": grid.L, "L": L})
    if not beta > 0:
        raise ParameterError("Coupling beta must be positive", {"beta": beta})
    if halfwidth is not None and a >= halfwidth:
        raise ParameterError("Strip half-width exceeds the injectivity half-width", {"a": a, "d": halfwidth})
    bounds = bounds or curve_bounds(profile)
    if a * bounds.gamma_plus >= 1.0:
        raise ParameterError("Strip assembly needs a*gamma_plus < 1", {"a_gamma_plus": a * bounds.gamma_plus})

    started = time.monotonic()
    h_s = grid.h_s
    n_s, col = grid.n_s, grid.column
    idx = np.arange(grid.size).reshape(n_s, col)
    omega = grid.u_weights
    inv_beta = 0.0 if math.isinf(beta) else 1.0 / beta

    s_ext = np.concatenate([[-L], grid.s, [L]])
    try:
        g = metric_factor(profile, s_ext[:, None], grid.u[None, :])
    except GeometryError as e:
        raise ParameterError(str(e), e.details) from e
    w = 1.0 / g ** 2
    gamma = profile.gamma(grid.s)
    t = _Triplets()

    # ∂_s energy: interior edges and edges to the Dirichlet rows s = ±L
    c_s = omega / h_s * 0.5 * (w[:-1] + w[1:])                # (n_s + 1, col)
    t.pair(idx[:-1], idx[1:], c_s[1:-1])
    t.diag(idx[0], c_s[0])
    t.diag(idx[-1], c_s[-1])

    # ∂_u energy, no edge across the interface
    i0m, i0p = grid.interface
    k = np.array([j for j in range(col - 1) if j != i0m])
    t.pair(idx[:, k], idx[:, k + 1], h_s / grid.u_steps[k])
    if which is FormSide.PLUS:
        t.diag(idx[:, 0], h_s / (grid.u[0] + a))
        t.diag(idx[:, -1], h_s / (a - grid.u[-1]))

    mass = np.broadcast_to(h_s * omega, (n_s, col))
    V = geometric_potential(profile, grid.s[:, None], grid.u[None, :])
    t.diag(idx, mass * V)

    # δ′ interface: jump and curvature-weighted traces
    if inv_beta:
        t.pair(idx[:, i0m], idx[:, i0p], -h_s * inv_beta)
    t.diag(idx[:, i0p], 0.5 * h_s * gamma)
    t.diag(idx[:, i0m], -0.5 * h_s * gamma)

    if which is FormSide.MINUS:
        t.diag(idx[:, -1], -h_s * gamma / (2.0 * (1.0 + a * gamma)))
        t.diag(idx[:, 0], h_s * gamma / (2.0 * (1.0 - a * gamma)))

    A = t.matrix(grid.size)
    if (A - A.T).count_nonzero():
        raise AssertionError("Assembled strip form is not symmetric")
    op = SymmetricOperator2D(A=A, M=np.ascontiguousarray(mass).ravel(), side=which, grid=grid,
                             beta=beta, sigma_hint=shift_below(beta, a, bounds))
    logger.debug("Assembled q%s: %d unknowns, %d nonzeros in %s", "+" if which is FormSide.PLUS else "-",
                 grid.size, A.nnz, format_timespan(time.monotonic() - started))
    return op


def bandwidth(A: sparse.spmatrix) -> int:
    coo = A.tocoo()
    return int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0


def dump_matrix(op: SymmetricOperator2D, path: Union[str, Path]) -> Path:
    """Writes A as `row col value` lines, then M as `row row value` under a marker line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coo = op.A.tocoo()
    with path.open("w") as fh:
        fh.write(f"# stiffness {op.A.shape[0]} {coo.nnz}\n")
        np.savetxt(fh, np.column_stack([coo.row, coo.col, coo.data]), fmt=["%d", "%d", "%.17g"])
        fh.write(f"# mass {op.M.size}\n")
        rows = np.arange(op.M.size)
        np.savetxt(fh, np.column_stack([rows, rows, op.M]), fmt=["%d", "%d", "%.17g"])
    logger.info("Matrix written to %s", path)
    return path


# -----------------------------------------------------------------------------
# Eigenvalues
# -----------------------------------------------------------------------------
def lowest_eigenvalues_2d(op: SymmetricOperator2D, k: int, rtol: float = EIGEN_RTOL,
                          sigma: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """k lowest eigenvalues of (A, M) and their relative residuals, by shift-invert Lanczos."""
    if k < 1:
        raise ParameterError("k must be >= 1", {"k": k})
    if rtol < 1e-10:
        raise ParameterError("rtol must be >= 1e-10", {"rtol": rtol})
    n = op.A.shape[0]
    if k >= n - 1:
        raise ParameterError("k must be smaller than the number of unknowns", {"k": k, "n": n})
    sigma = op.sigma_hint if sigma is None else sigma
    M = sparse.diags(op.M, format="csc")
    v0 = np.random.default_rng(_V0_SEED).standard_normal(n)
    ncv = min(n - 1, max(4 * k + 1, 40))

    started = time.monotonic()
    try:
        vals, vecs = eigsh(op.A.tocsc(), k=k, M=M, sigma=sigma, which="LM", v0=v0,
                           ncv=ncv, tol=0.1 * rtol, maxiter=EIGEN_MAXITER)
    except ArpackNoConvergence as e:
        raise SolverError("Shift-invert Lanczos did not converge",
                          {"converged": len(e.eigenvalues), "requested": k, "sigma": sigma}) from e

    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    Mv = op.M[:, None] * vecs
    residuals = np.linalg.norm(op.A @ vecs - vals[None, :] * Mv, axis=0) / np.linalg.norm(Mv, axis=0)
    scaled = residuals / np.maximum(np.abs(vals), 1.0)
    if np.any(scaled > rtol):
        raise SolverError("Eigenpair residual above tolerance",
                          {"residuals": scaled.tolist(), "rtol": rtol})
    logger.debug("%d eigenpairs of %d unknowns in %s", k, n, format_timespan(time.monotonic() - started))
    return vals, scaled


def convergence_study(profile: CurvatureProfile, a: float, beta: float, L: float, n_s: int, n_u: int,
                      which: Union[FormSide, str] = FormSide.PLUS, levels: int = 3, k: int = 1,
                      bounds: Optional[CurveBounds] = None, grading: float = 0.0) -> ConvergenceReport:
    """Halves h_s and the u-spacing per level; Richardson values and errors from the last two levels."""
    if levels < 3:
        raise ParameterError("Convergence study needs >= 3 levels", {"levels": levels})
    which = FormSide(which)
    bounds = bounds or curve_bounds(profile)
    sizes: List[Tuple[int, int]] = []
    per_level: List[Tuple[float, ...]] = []
    for level in range(levels):
        grid = build_strip_grid(L, n_s, a, n_u, which, grading)
        vals, _ = lowest_eigenvalues_2d(assemble_form(profile, a, beta, L, grid, which, bounds=bounds), k)
        sizes.append((n_s, n_u))
        per_level.append(tuple(float(v) for v in vals))
        logger.info("level %d (n_s=%d, n_u=%d): lambda_1=%.12g", level, n_s, n_u, vals[0])
        n_s, n_u = 2 * n_s + 1, 2 * n_u

    extrapolated, errors, orders = [], [], []
    for j in range(k):
        seq = [lv[j] for lv in per_level]
        extrapolated.append(richardson.extrapolate(seq[-2], seq[-1]))
        errors.append(richardson.error_estimate(seq[-2], seq[-1]))
        orders.append(richardson.observed_order(seq))
    flagged = any(not (o >= ORDER_FLAG_THRESHOLD) for o in orders)
    if flagged:
        logger.warning("Observed convergence order below %.2f: %s", ORDER_FLAG_THRESHOLD, orders)
    return ConvergenceReport(levels=tuple(sizes), eigenvalues=tuple(per_level),
                             extrapolated=tuple(extrapolated), errors=tuple(errors), orders=tuple(orders),
                             flagged=flagged)


def straight_strip_reference(t: float, L: float, j: int = 1) -> float:
    """Separable eigenvalue t + (jπ/2L)² of the straight truncated strip."""
    return t + (j * math.pi / (2.0 * L)) ** 2
