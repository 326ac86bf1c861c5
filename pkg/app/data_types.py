# app/data_types.py
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from scipy import sparse


class EndCondition(str, Enum):
    DIRICHLET = "dirichlet"
    ROBIN = "robin"


class FormSide(str, Enum):
    PLUS = "plus"    # Dirichlet at u = ±a
    MINUS = "minus"  # natural at u = ±a with curvature boundary terms


@dataclass(frozen=True)
class CurveBounds:
    gamma_plus: float
    dgamma_plus: float
    d2gamma_plus: float

    @property
    def is_straight(self) -> bool:
        return self.gamma_plus == 0.0


@dataclass(frozen=True)
class TubeSpec:
    a: float   # strip half-width
    L: float   # truncation length in s
    d: float   # injectivity half-width estimate


@dataclass(frozen=True)
class TransverseProblem:
    a: float
    beta: float
    gamma_s: float = 0.0      # γ(s) entering the matching condition
    gamma_plus: float = 0.0   # Robin coefficient for the minus case
    end: EndCondition = EndCondition.DIRICHLET

    @property
    def in_transverse_regime(self) -> bool:
        return self.a / self.beta > 2.0 and 2.0 / self.beta > self.gamma_plus


@dataclass(frozen=True)
class TransverseEigenvalue:
    value: float          # t = -κ²
    kappa: float
    offset: float         # t + 4/β², computed without cancellation
    method: str           # "transcendental" | "finite-difference" | "coupled"
    residual: float
    negative_count: int = 1


@dataclass(frozen=True)
class Operator1DSpec:
    """-c_kin f'' + W f on (-L, L) with Dirichlet ends, n interior nodes."""
    c_kin: float
    potential: Callable[[np.ndarray], np.ndarray]
    L: float
    n: int
    threshold: float = 0.0   # W(±∞), bottom of the essential spectrum
    label: str = "S"

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n + 1)

    def nodes(self) -> np.ndarray:
        return -self.L + self.h * np.arange(1, self.n + 1)


@dataclass(frozen=True)
class Spectrum1D:
    values: Tuple[float, ...]
    err_disc: Tuple[float, ...]
    err_trunc: Tuple[float, ...]
    multiplicities: Tuple[int, ...]
    orders: Tuple[float, ...]
    requested: int
    L: float
    n: int
    threshold: float = 0.0

    @property
    def truncated(self) -> bool:
        """True when fewer eigenvalues than requested lie below the threshold."""
        return len(self.values) < self.requested


@dataclass(frozen=True)
class StripGrid:
    L: float
    n_s: int                 # interior s nodes
    a: float
    n_u: int                 # elements per side
    side: FormSide
    s: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)          # column of u nodes, 0 appears twice
    u_weights: np.ndarray = field(repr=False)  # dual cell lengths (trapezoid weights)
    interface: Tuple[int, int] = (0, 0)        # column indices of 0⁻ and 0⁺
    grading: float = 0.0                       # log ratio of outer to inner u-spacing

    @property
    def h_s(self) -> float:
        return 2.0 * self.L / (self.n_s + 1)

    @property
    def h_u(self) -> float:
        """Mean u-spacing; the actual spacing on a uniform grid."""
        return self.a / self.n_u

    @property
    def u_steps(self) -> np.ndarray:
        return np.diff(self.u)

    @property
    def column(self) -> int:
        return int(self.u.size)

    @property
    def size(self) -> int:
        return self.n_s * self.column


@dataclass(frozen=True)
class SymmetricOperator2D:
    A: sparse.csr_matrix = field(repr=False)
    M: np.ndarray = field(repr=False)   # lumped (diagonal) mass
    side: FormSide
    grid: StripGrid = field(repr=False)
    beta: float
    sigma_hint: float                   # shift guaranteed below the wanted spectrum


@dataclass(frozen=True)
class ConvergenceReport:
    levels: Tuple[Tuple[int, int], ...]
    eigenvalues: Tuple[Tuple[float, ...], ...]
    extrapolated: Tuple[float, ...]
    errors: Tuple[float, ...]          # Richardson estimate from the last two levels
    orders: Tuple[float, ...]
    flagged: bool


@dataclass(frozen=True)
class BracketEnvelopeRow:
    a: float
    j: int
    sign: str
    mu: float
    mu_pm: float
    difference: float


@dataclass(frozen=True)
class BracketEnvelopeReport:
    C: float
    per_a_C: Tuple[float, ...]
    rows: Tuple[BracketEnvelopeRow, ...]
    j_max: int
    restricted: bool
    stable: bool


@dataclass(frozen=True)
class BracketRecord:
    j: int
    beta: float
    mu: float
    mu_minus: float
    mu_plus: float
    lower_offset: float        # t₋ + 4/β² + μ_j⁻
    upper_offset: float        # t₊ + 4/β² + μ_j⁺
    lambda_minus_offset: Optional[float] = None
    lambda_plus_offset: Optional[float] = None
    lower_err: float = 0.0     # discretization error of μ_j⁻
    upper_err: float = 0.0     # discretization error of μ_j⁺
    lambda_minus_err: Optional[float] = None
    lambda_plus_err: Optional[float] = None

    @property
    def threshold(self) -> float:
        return -4.0 / self.beta ** 2

    @property
    def lower(self) -> float:
        return self.threshold + self.lower_offset

    @property
    def upper(self) -> float:
        return self.threshold + self.upper_offset

    @property
    def prediction(self) -> float:
        return self.threshold + self.mu

    def residuals(self) -> Dict[str, float]:
        """r = λ + 4/β² - μ_j against every available estimate of λ_j."""
        out = {
            "lower": self.lower_offset - self.mu,
            "upper": self.upper_offset - self.mu,
        }
        if self.lambda_minus_offset is not None:
            out["lambda_minus"] = self.lambda_minus_offset - self.mu
        if self.lambda_plus_offset is not None:
            out["lambda_plus"] = self.lambda_plus_offset - self.mu
        if self.lambda_minus_offset is not None and self.lambda_plus_offset is not None:
            out["midpoint"] = 0.5 * (self.lambda_minus_offset + self.lambda_plus_offset) - self.mu
        return out

    def worst_residual(self) -> float:
        return max(self.residuals().values(), key=abs)

    def sandwich_gaps(self) -> Optional[Tuple[float, float, float]]:
        """(λ⁻ - lower, λ⁺ - λ⁻, upper - λ⁺), each widened by the errors of its two ends.

        None without direct solves; the sandwich holds when all three are >= 0.
        """
        if self.lambda_minus_offset is None or self.lambda_plus_offset is None:
            return None
        e_minus, e_plus = self.lambda_minus_err or 0.0, self.lambda_plus_err or 0.0
        return (
            self.lambda_minus_offset - self.lower_offset + e_minus + self.lower_err,
            self.lambda_plus_offset - self.lambda_minus_offset + e_minus + e_plus,
            self.upper_offset - self.lambda_plus_offset + e_plus + self.upper_err,
        )

    @property
    def sandwiched(self) -> Optional[bool]:
        gaps = self.sandwich_gaps()
        return None if gaps is None else min(gaps) >= 0.0


@dataclass(frozen=True)
class BracketedSpectrum:
    beta: float
    a: float
    in_regime: bool
    t_plus: TransverseEigenvalue
    t_minus: TransverseEigenvalue
    records: Tuple[BracketRecord, ...]
    requested: int

    @property
    def truncated(self) -> bool:
        return len(self.records) < self.requested


@dataclass(frozen=True)
class EssentialThresholdBound:
    beta: float
    tau: float
    a: float
    v_tau: float
    offset: float              # V_τ - (16/β²) e^{-4a/β}
    certified_offset: float    # sup of offset over the τ-grid
    certified_tau: float

    @property
    def value(self) -> float:
        return -4.0 / self.beta ** 2 + self.offset

    @property
    def certified(self) -> float:
        return -4.0 / self.beta ** 2 + self.certified_offset


@dataclass(frozen=True)
class AsymptoticsReport:
    records: Tuple[Tuple[float, float, BracketRecord], ...]  # (β, a, record)
    ratios: Tuple[float, ...]
    C_fit: float
    spread: float
    bounded: bool
    in_regime: bool


@dataclass
class ExperimentManifest:
    subcommand: str
    parameters: Dict[str, Any]
    curve: Optional[Dict[str, Any]]
    version: str
    timestamp: str

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
