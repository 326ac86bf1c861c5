import math

import numpy as np
import pytest
import sympy as sp
from scipy.spatial import cKDTree

from app.config import HALFWIDTH_CAP
from app.curve_geometry import (
    CurvatureProfile,
    bracket_potentials,
    bracket_thresholds,
    circle_curve,
    curve_bounds,
    curve_from_curvature,
    geometric_potential,
    injectivity_halfwidth,
    line_curve,
    map_to_strip,
    metric_factor,
    profile_from_config,
    signed_curvature,
    tube_spec,
    v_tau,
)
from app.errors import GeometryError, ParameterError

S_POINTS = np.array([-2.5, -1.0, -0.3, 0.0, 0.4, 1.7, 3.0])


def _symbolic(expr, s):
    f0 = sp.lambdify(s, expr, "numpy")
    f1 = sp.lambdify(s, sp.diff(expr, s), "numpy")
    f2 = sp.lambdify(s, sp.diff(expr, s, 2), "numpy")
    return f0, f1, f2


@pytest.mark.parametrize("family, c, s0", [("gaussian_bump", 0.7, 0.0), ("two_bump", 0.4, 3.0)])
def test_analytic_derivatives_match_symbolic(family, c, s0):
    s = sp.Symbol("s")
    if family == "gaussian_bump":
        expr = c * sp.exp(-s ** 2)
    else:
        expr = c * (sp.exp(-(s - s0) ** 2) + sp.exp(-(s + s0) ** 2))
    f0, f1, f2 = _symbolic(expr, s)
    profile = CurvatureProfile(family, c=c, s0=s0)
    np.testing.assert_allclose(profile.gamma(S_POINTS), f0(S_POINTS), atol=1e-14)
    np.testing.assert_allclose(profile.dgamma(S_POINTS), f1(S_POINTS), atol=1e-13)
    np.testing.assert_allclose(profile.d2gamma(S_POINTS), f2(S_POINTS), atol=1e-13)


def test_sampled_profile_uses_finite_differences():
    s = sp.Symbol("s")
    expr = 0.5 / sp.cosh(s) ** 2
    f0, f1, f2 = _symbolic(expr, s)
    profile = CurvatureProfile("sampled", func=f0)
    np.testing.assert_allclose(profile.dgamma(S_POINTS), f1(S_POINTS), atol=1e-8)
    np.testing.assert_allclose(profile.d2gamma(S_POINTS), f2(S_POINTS), atol=1e-6)


def test_unknown_family_rejected():
    with pytest.raises(ParameterError):
        CurvatureProfile("spiral")
    with pytest.raises(ParameterError):
        profile_from_config({"family": "gaussian_bump", "c": "strong"})


def test_profile_config_round_trip():
    profile = CurvatureProfile("two_bump", c=0.4, s0=3.0)
    assert profile_from_config(profile.to_config()) == profile


def test_curve_bounds_of_bump():
    bounds = curve_bounds(CurvatureProfile("gaussian_bump", c=1.0))
    assert bounds.gamma_plus == pytest.approx(1.0, abs=1e-12)
    # max |2s e^{-s²}| at s = 1/√2
    assert bounds.dgamma_plus == pytest.approx(2.0 * math.exp(-0.5) / math.sqrt(2.0), rel=1e-10)
    assert bounds.d2gamma_plus == pytest.approx(2.0, abs=1e-12)
    assert curve_bounds(CurvatureProfile("line")).is_straight


def test_circle_reconstruction_matches_closed_form():
    c = 0.5
    curve = curve_from_curvature(CurvatureProfile("constant", c=c, window=5.0))
    s = np.linspace(-4.0, 4.0, 17)
    expected = np.stack([np.sin(c * s) / c, (np.cos(c * s) - 1.0) / c])
    np.testing.assert_allclose(curve.point(s), expected, atol=1e-8)


def test_turning_angle_round_trip(bump):
    curve = curve_from_curvature(bump)
    s = np.array([-3.0, -0.5, 1.0, 3.0])
    tangent = curve.derivative(s, 1)
    theta = np.arctan2(tangent[1], tangent[0])
    # θ(s) = -∫₀ˢ γ = -(√π/2) erf(s) for c = 1
    expected = -0.5 * math.sqrt(math.pi) * np.array([math.erf(x) for x in s])
    np.testing.assert_allclose(theta, expected, atol=1e-8)
    np.testing.assert_allclose(np.hypot(tangent[0], tangent[1]), 1.0, atol=1e-10)


def test_reconstructed_positions_carry_curvature():
    profile = CurvatureProfile("gaussian_bump", c=0.5)
    curve = curve_from_curvature(profile)
    s = np.array([-1.0, 0.0, 2.0])
    h = 0.01
    p = [curve.point(s + k * h) for k in (-2, -1, 0, 1, 2)]
    d1 = (p[0] - 8.0 * p[1] + 8.0 * p[3] - p[4]) / (12.0 * h)
    d2 = (-p[0] + 16.0 * p[1] - 30.0 * p[2] + 16.0 * p[3] - p[4]) / (12.0 * h ** 2)
    np.testing.assert_allclose(np.hypot(d1[0], d1[1]), 1.0, atol=1e-8)
    np.testing.assert_allclose(d2[0] * d1[1] - d1[0] * d2[1], profile.gamma(s), atol=1e-7)


def test_curvature_from_derivatives_matches_profile(bump):
    curve = curve_from_curvature(bump)
    s = np.linspace(-3.0, 3.0, 13)
    d1, d2 = curve.derivative(s, 1), curve.derivative(s, 2)
    np.testing.assert_allclose(d2[0] * d1[1] - d1[0] * d2[1], bump.gamma(s), atol=1e-10)


def test_signed_curvature_of_circle_is_positive():
    curve = circle_curve(2.0)
    np.testing.assert_allclose(signed_curvature(curve, np.linspace(-3, 3, 7)), 0.5, atol=1e-12)


def test_injectivity_halfwidth():
    assert injectivity_halfwidth(line_curve()) == HALFWIDTH_CAP
    assert injectivity_halfwidth(circle_curve(2.0, window=2.0)) == pytest.approx(2.0, rel=1e-9)


def test_injectivity_halfwidth_of_gentle_bump():
    curve = curve_from_curvature(CurvatureProfile("gaussian_bump", c=0.5))
    assert injectivity_halfwidth(curve) >= 2.0 - 1e-12


def test_strip_points_sit_at_distance_u(bump):
    curve = curve_from_curvature(bump)
    tree = cKDTree(curve.point(np.arange(-8.0, 8.0, 5e-4)).T)
    s = np.linspace(-3.0, 3.0, 13)
    for u in (-0.6, -0.2, 0.2, 0.6):
        dist, _ = tree.query(map_to_strip(curve, s, np.full_like(s, u)).T)
        np.testing.assert_allclose(dist, abs(u), atol=1e-6)


def test_strip_map_is_injective_on_grid(bump):
    curve = curve_from_curvature(bump)
    hs, hu = 0.05, 0.1
    s, u = np.meshgrid(np.arange(-10.0, 10.0 + 0.5 * hs, hs), np.linspace(-0.9, 0.9, 19), indexing="ij")
    pts = map_to_strip(curve, s.ravel(), u.ravel()).T
    # |∂_s| ≥ 1 - |u|γ₊ = 0.1 keeps distinct nodes at least 0.1·hs apart
    assert len(cKDTree(pts).query_pairs(r=0.5 * min(0.1 * hs, hu))) == 0


def test_tube_spec_rejects_wide_strip():
    with pytest.raises(GeometryError):
        tube_spec(circle_curve(2.0, window=2.0), a=2.5, L=1.0)
    assert tube_spec(line_curve(), a=1.0, L=5.0).d == HALFWIDTH_CAP


def test_map_to_strip_on_line():
    xy = map_to_strip(line_curve(), np.array([0.0, 1.0]), np.array([0.5, -0.5]))
    np.testing.assert_allclose(xy, [[0.0, 1.0], [-0.5, 0.5]])


def test_potential_on_curve_is_minus_quarter_gamma_squared(bump):
    s = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(geometric_potential(bump, s, 0.0), -0.25 * bump.gamma(s) ** 2, atol=1e-15)


def test_metric_factor_degenerate():
    with pytest.raises(GeometryError):
        metric_factor(CurvatureProfile("gaussian_bump", c=2.0), 0.0, 0.5)


@pytest.mark.parametrize("a", [0.02, 0.1, 0.3])
def test_potential_sandwich(bump, bump_bounds, a):
    v_plus, v_minus = bracket_potentials(bump_bounds, bump, a)
    s = np.linspace(-6, 6, 601)[:, None]
    u = np.linspace(-a, a, 41)[None, :]
    V = geometric_potential(bump, s, u)
    assert np.all(V <= v_plus(s) + 1e-12)
    assert np.all(V >= v_minus(s) - 1e-12)


SANDWICH_CASES = [
    (CurvatureProfile("gaussian_bump", c=1.0), 0.05),
    (CurvatureProfile("gaussian_bump", c=1.0), 0.25),
    (CurvatureProfile("two_bump", c=0.4, s0=3.0), 0.05),
    (CurvatureProfile("two_bump", c=0.4, s0=3.0), 0.25),
    (CurvatureProfile("constant", c=0.5), 0.05),
    (CurvatureProfile("constant", c=0.5), 0.25),
    (CurvatureProfile("line"), 0.1),
    (CurvatureProfile("line"), 1.0),
]


@pytest.mark.parametrize("profile, fraction", SANDWICH_CASES)
def test_potential_sandwich_for_builtin_profiles(profile, fraction):
    # aγ₊ = fraction for curved profiles, a = fraction on the line
    bounds = curve_bounds(profile)
    a = fraction / bounds.gamma_plus if bounds.gamma_plus > 0 else fraction
    v_plus, v_minus = bracket_potentials(bounds, profile, a)
    s = np.linspace(-8.0, 8.0, 801)[:, None]
    u = np.linspace(-a, a, 41)[None, :]
    V = geometric_potential(profile, s, u)
    assert np.all(V <= v_plus(s) + 1e-12)
    assert np.all(V >= v_minus(s) - 1e-12)


def test_potential_matches_laplace_beltrami():
    # V = -g^{1/2} Δ g^{-1/2} with Δ = g⁻¹∂_s(g⁻¹∂_s) + g⁻¹∂_u(g∂_u)
    s, u = sp.symbols("s u")
    g = 1 + u * sp.exp(-s ** 2)
    psi = g ** sp.Rational(-1, 2)
    laplacian = (sp.diff(sp.diff(psi, s) / g, s) + sp.diff(g * sp.diff(psi, u), u)) / g
    expected = float((-sp.sqrt(g) * laplacian).subs({s: 0.7, u: 0.1}))
    bump = CurvatureProfile("gaussian_bump", c=1.0)
    assert float(geometric_potential(bump, 0.7, 0.1)) == pytest.approx(expected, abs=1e-10)


def test_bracket_thresholds_vanish_at_zero_width(bump_bounds):
    assert bracket_thresholds(bump_bounds, 0.0) == (0.0, 0.0)
    with pytest.raises(ParameterError):
        bracket_thresholds(bump_bounds, 1.0)


def test_v_tau(bump, bump_bounds, line):
    a = 0.1
    assert v_tau(line, a, 0.0) == 0.0
    far = v_tau(bump, a, 10.0, bump_bounds)
    assert -1e-12 < far <= 0.0
    assert v_tau(bump, a, 0.0, bump_bounds) < -0.25
