import math

import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.linalg import eigsh

from app import richardson
from app.curve_geometry import CurvatureProfile, curve_bounds
from app.data_types import Operator1DSpec
from app.errors import ParameterError
from app.schrodinger_1d import (
    build_bracket_operator,
    build_comparison_operator,
    default_truncation,
    grid_count,
    lemma_long_check,
    lowest_eigenvalues_1d,
)


def _sparse_ground_state(profile, L, step):
    n = grid_count(L, step)
    h = 2.0 * L / (n + 1)
    s = -L + h * np.arange(1, n + 1)
    W = -0.25 * profile.gamma(s) ** 2
    T = sparse.diags([np.full(n - 1, -1.0 / h ** 2), 2.0 / h ** 2 + W, np.full(n - 1, -1.0 / h ** 2)],
                     [-1, 0, 1], format="csc")
    vals = eigsh(T, k=1, sigma=-0.1, return_eigenvectors=False)
    return float(vals[0])


# -----------------------------------------------------------------------------
# Construction
# -----------------------------------------------------------------------------
def test_comparison_potential_values():
    op = build_comparison_operator(CurvatureProfile("gaussian_bump", c=0.5), 10.0, 999)
    assert op.c_kin == 1.0 and op.threshold == 0.0
    assert op.potential(np.array([0.0]))[0] == pytest.approx(-0.0625, abs=1e-15)

    two = build_comparison_operator(CurvatureProfile("two_bump", c=0.4, s0=3.0), 10.0, 999)
    assert two.potential(np.array([3.0]))[0] == pytest.approx(-0.04, rel=1e-12)


def test_comparison_rejects_constant_curvature():
    with pytest.raises(ParameterError):
        build_comparison_operator(CurvatureProfile("constant", c=0.5), 10.0, 999)


def test_bracket_kinetic_coefficients(bump, bump_bounds):
    plus = build_bracket_operator("plus", bump, bump_bounds, 0.025, 10.0, 999)
    minus = build_bracket_operator("minus", bump, bump_bounds, 0.025, 10.0, 999)
    assert plus.c_kin == pytest.approx(0.975 ** -2, rel=1e-12)
    assert minus.c_kin == pytest.approx(1.025 ** -2, rel=1e-12)
    assert plus.label == "Uplus" and minus.label == "Uminus"
    assert minus.threshold < 0.0 < plus.threshold


def test_bracket_at_zero_width_is_comparison(bump, bump_bounds):
    plus = build_bracket_operator("plus", bump, bump_bounds, 0.0, 10.0, 999)
    s = np.linspace(-3, 3, 13)
    assert plus.c_kin == 1.0 and plus.threshold == 0.0
    np.testing.assert_allclose(plus.potential(s), -0.25 * bump.gamma(s) ** 2, atol=1e-15)


@pytest.mark.parametrize("kwargs", [
    {"sign": "plus", "a": 0.5},
    {"sign": "middle", "a": 0.1},
    {"sign": "minus", "a": -0.1},
])
def test_bracket_rejects_bad_parameters(bump, bump_bounds, kwargs):
    with pytest.raises(ParameterError):
        build_bracket_operator(kwargs["sign"], bump, bump_bounds, kwargs["a"], 10.0, 999)


def test_grid_too_coarse(bump):
    with pytest.raises(ParameterError):
        build_comparison_operator(bump, 10.0, 16)
    with pytest.raises(ParameterError):
        build_comparison_operator(bump, 0.0, 999)


def test_grid_count_matches_step():
    n = grid_count(60.0, 0.02)
    assert 2.0 * 60.0 / (n + 1) == pytest.approx(0.02, rel=1e-12)


# -----------------------------------------------------------------------------
# Eigenvalues
# -----------------------------------------------------------------------------
def test_straight_line_has_no_bound_state(line):
    L, n = default_truncation(line)
    result = lowest_eigenvalues_1d(build_comparison_operator(line, L, n), 3)
    assert result.values == ()
    assert result.truncated


def test_harmonic_oscillator():
    spec = Operator1DSpec(c_kin=1.0, potential=lambda s: s ** 2, L=8.0, n=1599,
                          threshold=math.inf, label="harmonic")
    result = lowest_eigenvalues_1d(spec, 3, below_threshold_only=False, adapt_truncation=False)
    np.testing.assert_allclose(result.values, [1.0, 3.0, 5.0], atol=1e-6)
    np.testing.assert_allclose(result.orders, 2.0, atol=0.05)
    assert result.multiplicities == (1, 1, 1)
    assert result.err_trunc == (0.0, 0.0, 0.0)
    assert all(0 < e < 1e-3 for e in result.err_disc)


def test_k_must_be_positive(bump):
    with pytest.raises(ParameterError):
        lowest_eigenvalues_1d(build_comparison_operator(bump, 10.0, 999), 0)


def test_bump_ground_state_matches_independent_solve(bump):
    L = 60.0
    spec = build_comparison_operator(bump, L, grid_count(L))
    result = lowest_eigenvalues_1d(spec, 1, adapt_truncation=False)
    assert len(result.values) == 1
    mu = result.values[0]
    assert -0.05 < mu < -0.005

    reference = richardson.extrapolate(_sparse_ground_state(bump, L, 0.02),
                                       _sparse_ground_state(bump, L, 0.01))
    assert mu == pytest.approx(reference, abs=5e-8)


def test_truncation_lowers_eigenvalue(bump):
    values = []
    for L in (15.0, 30.0, 60.0):
        spec = build_comparison_operator(bump, L, grid_count(L))
        values.append(lowest_eigenvalues_1d(spec, 1, adapt_truncation=False).values[0])
    assert values[0] > values[1] > values[2]


def test_adaptive_truncation_settles(bump):
    spec = build_comparison_operator(bump, 15.0, grid_count(15.0))
    result = lowest_eigenvalues_1d(spec, 1)
    assert result.L > 15.0
    assert result.err_trunc[0] <= 1e-8 * abs(result.values[0]) * 10.0


def test_brackets_order_comparison_eigenvalue(bump, bump_bounds):
    L, n = 60.0, grid_count(60.0)
    mu = lowest_eigenvalues_1d(build_comparison_operator(bump, L, n), 1, adapt_truncation=False).values[0]
    for a in (0.05, 0.2):
        lo = lowest_eigenvalues_1d(build_bracket_operator("minus", bump, bump_bounds, a, L, n), 1,
                                   adapt_truncation=False).values[0]
        hi = lowest_eigenvalues_1d(build_bracket_operator("plus", bump, bump_bounds, a, L, n), 1,
                                   adapt_truncation=False).values[0]
        assert lo < mu < hi


# -----------------------------------------------------------------------------
# Bracket envelope
# -----------------------------------------------------------------------------
def test_envelope_vanishes_on_line(line):
    report = lemma_long_check(line, curve_bounds(line), [0.1, 0.05], 2)
    assert report.C == 0.0
    assert report.rows == ()
    assert report.restricted and report.stable


def test_envelope_constant_is_stable(bump, bump_bounds):
    report = lemma_long_check(bump, bump_bounds, [0.02, 0.08, 0.04], 2)
    # a weak well of this size holds one bound state
    assert report.restricted and report.j_max == 1
    assert len(report.rows) == 6
    assert report.stable
    assert report.C == max(report.per_a_C) > 0.0
    for sign in ("plus", "minus"):
        diffs = [r.difference for r in report.rows if r.sign == sign]
        assert diffs == sorted(diffs, reverse=True)


def test_envelope_rejects_wide_strip(bump, bump_bounds):
    with pytest.raises(ParameterError):
        lemma_long_check(bump, bump_bounds, [0.1, 0.6], 1)
    with pytest.raises(ParameterError):
        lemma_long_check(bump, bump_bounds, [0.1], 0)
