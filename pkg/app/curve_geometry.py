# app/curve_geometry.py
"""
Curve Γ, its signed curvature and the curvilinear strip geometry.

Curves are specified curvature-first: a CurvatureProfile carries γ, γ′, γ″
and PlanarCurve is reconstructed from it by integrating the turning angle.
Sign convention: γ = Γ₁″Γ₂′ − Γ₁′Γ₂″, hence θ′ = −γ for Γ′ = (cos θ, sin θ).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

import numpy as np
from scipy import integrate, optimize
from scipy.spatial import cKDTree

from app.config import (
    CURVE_WINDOW,
    DECAY_EPS,
    HALFWIDTH_CAP,
    HALFWIDTH_RESOLUTION,
    ODE_ATOL,
    ODE_RTOL,
    UNIT_SPEED_TOL,
)
from app.data_types import CurveBounds, TubeSpec
from app.errors import GeometryError, NumericalError, ParameterError

logger = logging.getLogger("curve_geometry")

FAMILIES = ("line", "constant", "gaussian_bump", "two_bump", "sampled")

# 5-point stencil steps: truncation ~ roundoff for first and second derivatives
_FD_STEP_1 = 1e-3
_FD_STEP_2 = 2e-3


# -----------------------------------------------------------------------------
# Curvature profiles
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class CurvatureProfile:
    family: str
    c: float = 0.0
    s0: float = 0.0
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    window: float = CURVE_WINDOW

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"Unknown curve family '{self.family}'", {"known": FAMILIES})
        if self.family == "sampled" and self.func is None:
            raise ParameterError("Sampled profile needs a callable γ(s)")

    @property
    def is_straight(self) -> bool:
        return self.family == "line" or (self.family != "sampled" and self.c == 0.0)

    @property
    def decays(self) -> bool:
        """Constant curvature never decays; every other family does."""
        return self.family != "constant" or self.c == 0.0

    def gamma(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.family == "line":
            return np.zeros_like(s)
        if self.family == "constant":
            return np.full_like(s, self.c)
        if self.family == "gaussian_bump":
            return self.c * np.exp(-s ** 2)
        if self.family == "two_bump":
            return self.c * (np.exp(-(s - self.s0) ** 2) + np.exp(-(s + self.s0) ** 2))
        return np.asarray(self.func(s), dtype=float)

    def dgamma(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.family in ("line", "constant"):
            return np.zeros_like(s)
        if self.family == "gaussian_bump":
            return -2.0 * self.c * s * np.exp(-s ** 2)
        if self.family == "two_bump":
            sm, sp = s - self.s0, s + self.s0
            return -2.0 * self.c * (sm * np.exp(-sm ** 2) + sp * np.exp(-sp ** 2))
        h = _FD_STEP_1
        f = self.gamma
        return (f(s - 2 * h) - 8 * f(s - h) + 8 * f(s + h) - f(s + 2 * h)) / (12.0 * h)

    def d2gamma(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.family in ("line", "constant"):
            return np.zeros_like(s)
        if self.family == "gaussian_bump":
            return self.c * (4.0 * s ** 2 - 2.0) * np.exp(-s ** 2)
        if self.family == "two_bump":
            sm, sp = s - self.s0, s + self.s0
            return self.c * ((4.0 * sm ** 2 - 2.0) * np.exp(-sm ** 2)
                             + (4.0 * sp ** 2 - 2.0) * np.exp(-sp ** 2))
        h = _FD_STEP_2
        f = self.gamma
        return (-f(s - 2 * h) + 16 * f(s - h) - 30 * f(s)
                + 16 * f(s + h) - f(s + 2 * h)) / (12.0 * h * h)

    def decay_radius(self, eps: float = DECAY_EPS) -> float:
        """S_decay such that |γ(s)| < eps for |s| > S_decay."""
        if self.is_straight:
            return 0.0
        if self.family == "constant":
            return math.inf
        if self.family == "gaussian_bump":
            return math.sqrt(max(0.0, math.log(abs(self.c) / eps)))
        if self.family == "two_bump":
            return abs(self.s0) + math.sqrt(max(0.0, math.log(2.0 * abs(self.c) / eps)))
        return self.window

    def tail_bounds(self, S: float) -> Tuple[float, float, float]:
        """sup over |s| > S of |γ|, |γ′|, |γ″|.

        Built-in families are monotone past their bumps, so the sup is taken on
        a finite sweep that reaches well beyond the decay radius.
        """
        if self.is_straight:
            return 0.0, 0.0, 0.0
        if not self.decays:
            return abs(self.c), 0.0, 0.0
        end = max(S, self.decay_radius()) + 10.0
        s = np.linspace(S, end, 4001)
        s = np.concatenate([s, -s])
        return (float(np.max(np.abs(self.gamma(s)))),
                float(np.max(np.abs(self.dgamma(s)))),
                float(np.max(np.abs(self.d2gamma(s)))))

    def to_config(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"family": self.family, "window": self.window}
        if self.family in ("constant", "gaussian_bump", "two_bump"):
            out["c"] = self.c
        if self.family == "two_bump":
            out["s0"] = self.s0
        return out


def profile_from_config(config: Mapping[str, Any]) -> CurvatureProfile:
    """Build a profile from the JSON curve config ({"family": ..., "c": ..., ...})."""
    family = str(config.get("family", "")).strip()
    if family == "sampled":
        raise ParameterError("Sampled profiles cannot be loaded from JSON")
    try:
        return CurvatureProfile(
            family=family,
            c=float(config.get("c", 0.0)),
            s0=float(config.get("s0", 0.0)),
            window=float(config.get("window", CURVE_WINDOW)),
        )
    except (TypeError, ValueError) as e:
        raise ParameterError(f"Malformed curve config: {e}", {"config": dict(config)}) from e


def curve_bounds(profile: CurvatureProfile, window: Optional[float] = None) -> CurveBounds:
    """γ₊, (γ′)₊, (γ″)₊ on [-window, window], grid maximum polished by a bounded search."""
    if profile.is_straight:
        return CurveBounds(0.0, 0.0, 0.0)
    W = profile.window if window is None else window
    s = np.linspace(-W, W, 40001)
    h = s[1] - s[0]

    def _max_abs(fn: Callable) -> float:
        vals = np.abs(fn(s))
        i = int(np.argmax(vals))
        best = float(vals[i])
        lo, hi = max(-W, s[i] - h), min(W, s[i] + h)
        if hi > lo:
            res = optimize.minimize_scalar(lambda x: -abs(float(fn(x))), bounds=(lo, hi),
                                           method="bounded", options={"xatol": 1e-13})
            best = max(best, -float(res.fun))
        return best

    return CurveBounds(_max_abs(profile.gamma), _max_abs(profile.dgamma), _max_abs(profile.d2gamma))


# -----------------------------------------------------------------------------
# Planar curves
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class PlanarCurve:
    """Unit-speed curve; derivative(s, k) returns Γ^{(k)}(s) with shape (2, *s.shape)."""
    kind: str   # "closed-form" | "curvature-defined"
    window: float
    evaluator: Callable[[np.ndarray, int], np.ndarray] = field(repr=False, compare=False)
    profile: Optional[CurvatureProfile] = None

    def derivative(self, s, order: int = 0) -> np.ndarray:
        if not 0 <= order <= 4:
            raise ParameterError("Derivative order must be within 0..4", {"order": order})
        return self.evaluator(np.asarray(s, dtype=float), order)

    def point(self, s) -> np.ndarray:
        return self.derivative(s, 0)


def line_curve(window: float = CURVE_WINDOW) -> PlanarCurve:
    def _eval(s: np.ndarray, k: int) -> np.ndarray:
        zero = np.zeros_like(s)
        if k == 0:
            return np.stack([s, zero])
        if k == 1:
            return np.stack([np.ones_like(s), zero])
        return np.stack([zero, zero])
    return PlanarCurve("closed-form", window, _eval, CurvatureProfile("line", window=window))


def circle_curve(R: float, window: float = CURVE_WINDOW) -> PlanarCurve:
    """Γ(s) = (R sin(s/R), R cos(s/R)), signed curvature +1/R."""
    if R <= 0:
        raise ParameterError("Circle radius must be positive", {"R": R})

    def _eval(s: np.ndarray, k: int) -> np.ndarray:
        x = s / R
        scale = R ** (1 - k)
        # d^k/ds^k of (sin, cos) cycles through (cos,-sin), (-sin,-cos), (-cos,sin), (sin,cos)
        comps = [(np.sin(x), np.cos(x)), (np.cos(x), -np.sin(x)),
                 (-np.sin(x), -np.cos(x)), (-np.cos(x), np.sin(x))][k % 4]
        return scale * np.stack(comps)

    return PlanarCurve("closed-form", window, _eval, CurvatureProfile("constant", c=1.0 / R, window=window))


def curve_from_curvature(profile: CurvatureProfile, window: Optional[float] = None) -> PlanarCurve:
    """Integrate x′ = cos θ, y′ = sin θ, θ′ = −γ from θ(0)=0, Γ(0)=0 in both directions."""
    W = profile.window if window is None else window

    def rhs(s, z):
        return [math.cos(z[2]), math.sin(z[2]), -float(profile.gamma(s))]

    branches = {}
    for name, end in (("fwd", W), ("bwd", -W)):
        sol = integrate.solve_ivp(rhs, (0.0, end), [0.0, 0.0, 0.0], method="DOP853",
                                  rtol=ODE_RTOL, atol=ODE_ATOL, dense_output=True)
        if sol.status != 0:
            raise NumericalError("Curve reconstruction did not reach the window end",
                                 {"message": sol.message, "end": end})
        turning = integrate.quad(lambda t: -float(profile.gamma(t)), 0.0, end,
                                 epsabs=1e-14, epsrel=1e-13, limit=400)[0]
        drift = abs(float(sol.y[2, -1]) - turning)
        if drift > 1e-8:
            raise NumericalError("Curve reconstruction missed the integrator tolerance",
                                 {"turning_drift": drift, "end": end})
        branches[name] = sol.sol

    def _state(s: np.ndarray) -> np.ndarray:
        flat = np.atleast_1d(s).ravel()
        out = np.empty((3, flat.size))
        fwd = flat >= 0
        if np.any(fwd):
            out[:, fwd] = branches["fwd"](flat[fwd])
        if np.any(~fwd):
            out[:, ~fwd] = branches["bwd"](flat[~fwd])
        return out.reshape((3,) + np.shape(s))

    def _eval(s: np.ndarray, k: int) -> np.ndarray:
        z = _state(s)
        if k == 0:
            return z[:2]
        th = z[2]
        T = np.stack([np.cos(th), np.sin(th)])
        N = np.stack([-np.sin(th), np.cos(th)])
        d1 = -profile.gamma(s)
        if k == 1:
            return T
        if k == 2:
            return d1 * N
        d2 = -profile.dgamma(s)
        if k == 3:
            return d2 * N - d1 ** 2 * T
        d3 = -profile.d2gamma(s)
        return (d3 - d1 ** 3) * N - 3.0 * d1 * d2 * T

    logger.debug("Reconstructed %s curve on [-%.3g, %.3g]", profile.family, W, W)
    return PlanarCurve("curvature-defined", W, _eval, profile)


def signed_curvature(curve: PlanarCurve, s) -> np.ndarray:
    """γ = Γ₁″Γ₂′ − Γ₁′Γ₂″; curvature-defined curves return the stored profile value."""
    if curve.kind == "curvature-defined" and curve.profile is not None:
        return curve.profile.gamma(s)
    d1 = curve.derivative(s, 1)
    speed_err = np.abs(d1[0] ** 2 + d1[1] ** 2 - 1.0)
    if np.any(speed_err > UNIT_SPEED_TOL):
        raise GeometryError("Curve is not parameterized by arc length",
                            {"max_speed_error": float(np.max(speed_err))})
    d2 = curve.derivative(s, 2)
    return d2[0] * d1[1] - d1[0] * d2[1]


def smoothness_proxy(curve: PlanarCurve, h: float = 0.05, window: Optional[float] = None) -> Tuple[float, float]:
    """Max fourth divided difference of Γ at steps h and h/2; bounded ratio means C⁴-like."""
    W = curve.window if window is None else window
    out = []
    for step in (h, h / 2):
        s = np.arange(-W + 2 * step, W - 2 * step, step)
        p = [curve.point(s + k * step) for k in (-2, -1, 0, 1, 2)]
        d4 = (p[0] - 4 * p[1] + 6 * p[2] - 4 * p[3] + p[4]) / step ** 4
        out.append(float(np.max(np.abs(d4))))
    return out[0], out[1]


# -----------------------------------------------------------------------------
# Strip coordinates
# -----------------------------------------------------------------------------
def map_to_strip(curve: PlanarCurve, s, u, halfwidth: Optional[float] = None) -> np.ndarray:
    """(x, y) = (Γ₁ + uΓ₂′, Γ₂ − uΓ₁′)."""
    u = np.asarray(u, dtype=float)
    if halfwidth is not None and np.any(np.abs(u) >= halfwidth):
        logger.warning("map_to_strip: |u| >= d=%.4g, the coordinate map may fold", halfwidth)
    p = curve.point(s)
    t = curve.derivative(s, 1)
    return np.stack([p[0] + u * t[1], p[1] - u * t[0]])


def injectivity_halfwidth(curve: PlanarCurve, window: Optional[float] = None,
                          resolution: float = HALFWIDTH_RESOLUTION,
                          cap: float = HALFWIDTH_CAP) -> float:
    """Lower estimate of d: min(1/γ₊, half the distance between non-adjacent pieces)."""
    W = curve.window if window is None else window
    s = np.arange(-W, W + 0.5 * resolution, resolution)
    gamma_plus = float(np.max(np.abs(signed_curvature(curve, s))))
    if gamma_plus == 0.0:
        return cap
    local = min(cap, 1.0 / gamma_plus)

    pts = curve.point(s).T
    tree = cKDTree(pts)
    pairs = tree.query_pairs(r=2.0 * local, output_type="ndarray")
    if pairs.size:
        sep = np.abs(s[pairs[:, 0]] - s[pairs[:, 1]])
        far = pairs[sep > math.pi * local]
        if far.size:
            dist = np.linalg.norm(pts[far[:, 0]] - pts[far[:, 1]], axis=1)
            local = min(local, max(0.0, 0.5 * (float(dist.min()) - resolution)))
    logger.debug("injectivity_halfwidth: window=%.3g gamma_plus=%.4g d=%.4g", W, gamma_plus, local)
    return local


def tube_spec(curve: PlanarCurve, a: float, L: float, bounds: Optional[CurveBounds] = None,
              window: Optional[float] = None) -> TubeSpec:
    """Validate the strip Ω_a against the injectivity half-width and the curvature bounds."""
    d = injectivity_halfwidth(curve, window)
    if not 0.0 < a < d:
        raise GeometryError("Strip half-width must satisfy 0 < a < d", {"a": a, "d": d})
    if bounds is not None and bounds.gamma_plus * a >= 0.5:
        logger.warning("a*gamma_plus=%.3g >= 1/2: longitudinal estimates do not apply",
                       a * bounds.gamma_plus)
    return TubeSpec(a=a, L=L, d=d)


# -----------------------------------------------------------------------------
# Geometric potentials
# -----------------------------------------------------------------------------
def metric_factor(profile: CurvatureProfile, s, u) -> np.ndarray:
    """g(s, u) = 1 + uγ(s)."""
    ug = np.asarray(u, dtype=float) * profile.gamma(s)
    if np.any(np.abs(ug) >= 1.0):
        raise GeometryError("Degenerate metric: |u gamma(s)| >= 1", {"max_u_gamma": float(np.max(np.abs(ug)))})
    return 1.0 + ug


def geometric_potential(profile: CurvatureProfile, s, u) -> np.ndarray:
    """V = uγ″/(2g³) − 5(uγ′)²/(4g⁴) − γ²/(4g²)."""
    u = np.asarray(u, dtype=float)
    g = metric_factor(profile, s, u)
    return (u * profile.d2gamma(s) / (2.0 * g ** 3)
            - 5.0 * (u * profile.dgamma(s)) ** 2 / (4.0 * g ** 4)
            - profile.gamma(s) ** 2 / (4.0 * g ** 2))


def bracket_thresholds(bounds: CurveBounds, a: float) -> Tuple[float, float]:
    """Constant parts of (V⁽⁺⁾, V⁽⁻⁾); their values at s → ±∞ when γ decays."""
    ag = a * bounds.gamma_plus
    if ag >= 1.0:
        raise ParameterError("bracket potentials need a*gamma_plus < 1", {"a_gamma_plus": ag})
    lo = 1.0 - ag
    shift_plus = a * bounds.d2gamma_plus / (2.0 * lo ** 3)
    return shift_plus, -(shift_plus + 5.0 * (a * bounds.dgamma_plus) ** 2 / (4.0 * lo ** 4))


def bracket_potentials(bounds: CurveBounds, profile: CurvatureProfile,
                       a: float) -> Tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]:
    """(V⁽⁺⁾, V⁽⁻⁾) with V⁽⁻⁾(s) ≤ V(s, u) ≤ V⁽⁺⁾(s) for |u| ≤ a."""
    floor_plus, floor_minus = bracket_thresholds(bounds, a)
    ag = a * bounds.gamma_plus
    lo, hi = 1.0 - ag, 1.0 + ag

    def v_plus(s):
        return floor_plus - profile.gamma(s) ** 2 / (4.0 * hi ** 2)

    def v_minus(s):
        return floor_minus - profile.gamma(s) ** 2 / (4.0 * lo ** 2)

    return v_plus, v_minus


def v_tau_tail_bound(profile: CurvatureProfile, a: float, tau: float,
                     bounds: Optional[CurveBounds] = None) -> float:
    """sup over |s| > τ, |u| < a of |V|, from the curvature tails."""
    bounds = bounds or curve_bounds(profile)
    g_t, dg_t, d2g_t = profile.tail_bounds(tau)
    lo = 1.0 - a * bounds.gamma_plus
    return a * d2g_t / (2.0 * lo ** 3) + 5.0 * (a * dg_t) ** 2 / (4.0 * lo ** 4) + g_t ** 2 / (4.0 * lo ** 2)


def v_tau(profile: CurvatureProfile, a: float, tau: float,
          bounds: Optional[CurveBounds] = None) -> float:
    """V_τ = inf over |s| > τ, |u| < a of V(s, u).

    Grid infimum refined where |V| is large, polished by a bounded search,
    and combined with an analytic tail bound beyond the decay radius.
    """
    bounds = bounds or curve_bounds(profile)
    if a * bounds.gamma_plus >= 1.0:
        raise ParameterError("v_tau needs a*gamma_plus < 1", {"a_gamma_plus": a * bounds.gamma_plus})
    if profile.is_straight:
        return 0.0
    if not profile.decays:
        return float(np.min(geometric_potential(profile, 0.0, np.linspace(-a, a, 81))))

    s_max = max(tau, profile.decay_radius()) + 1.0
    tail = -v_tau_tail_bound(profile, a, s_max, bounds)

    u = np.linspace(-a, a, 41)
    s = np.linspace(tau, s_max, 2001)
    best, best_at = math.inf, (tau, 0.0)
    for sign in (1.0, -1.0):
        S, U = np.meshgrid(sign * s, u, indexing="ij")
        V = geometric_potential(profile, S, U)
        # refine cells where |V| is within a factor 2 of its peak
        col = np.max(np.abs(V), axis=1)
        hot = np.flatnonzero(col >= 0.5 * col.max())
        if hot.size:
            fine = np.unique(np.concatenate([np.linspace(s[max(i - 1, 0)], s[min(i + 1, s.size - 1)], 33)
                                             for i in hot]))
            Sf, Uf = np.meshgrid(sign * fine, u, indexing="ij")
            S, V = np.concatenate([S, Sf]), np.concatenate([V, geometric_potential(profile, Sf, Uf)])
            U = np.concatenate([U, Uf])
        k = np.unravel_index(int(np.argmin(V)), V.shape)
        if V[k] < best:
            best, best_at = float(V[k]), (float(S[k]), float(U[k]))

    s_lo, s_hi = sorted((math.copysign(tau, best_at[0]), math.copysign(s_max, best_at[0])))
    res = optimize.minimize(lambda z: float(geometric_potential(profile, z[0], z[1])),
                            x0=np.array(best_at), method="L-BFGS-B",
                            bounds=[(s_lo, s_hi), (-a, a)])
    if res.success:
        best = min(best, float(res.fun))
    return min(best, tail)
