import logging
import math

import numpy as np
import pytest

from app import richardson
from app.data_types import EndCondition, TransverseProblem
from app.errors import ParameterError, RegimeError
from app.transverse_spectrum import (
    dirichlet_envelope_slack,
    envelope_gap,
    lemma_trans_envelope,
    solve_transverse,
    transverse_eigenvalue_dirichlet,
    transverse_eigenvalue_robin,
    transverse_fd_oracle,
)

BETAS = np.logspace(-2, 0, 10)
RATIOS = np.logspace(math.log10(2.5), math.log10(20.0), 10)


def test_dirichlet_wide_strip():
    t = transverse_eigenvalue_dirichlet(10.0, 1.0)
    assert t.value == pytest.approx(-4.0, abs=1e-12)
    assert t.method == "transcendental"
    assert t.residual < 1e-10
    assert t.kappa == pytest.approx(2.0, abs=1e-12)


def test_dirichlet_inside_envelope():
    t = transverse_eigenvalue_dirichlet(3.0, 1.0)
    lower, upper = lemma_trans_envelope(3.0, 1.0)
    assert -4.0 <= t.value <= upper + dirichlet_envelope_slack(3.0, 1.0)
    assert t.offset == pytest.approx(t.value + 4.0, abs=1e-12)
    assert t.residual < 1e-10


def test_robin_without_curvature():
    t = transverse_eigenvalue_robin(10.0, 1.0, 0.0)
    assert t.value == pytest.approx(-4.0, abs=1e-12)
    assert t.value <= -4.0
    # κ tanh(κa) = 2/β
    assert t.kappa * math.tanh(10.0 * t.kappa) == pytest.approx(2.0, rel=1e-13)


def test_robin_inside_envelope():
    t = transverse_eigenvalue_robin(3.0, 1.0, 0.5)
    lower, _ = lemma_trans_envelope(3.0, 1.0)
    assert lower <= t.value <= -4.0
    assert t.residual < 1e-10


@pytest.mark.parametrize("beta", BETAS)
@pytest.mark.parametrize("ratio", RATIOS)
def test_envelope_grid(beta, ratio):
    a = ratio * beta
    gap = envelope_gap(a, beta)
    plus = transverse_eigenvalue_dirichlet(a, beta)
    minus = transverse_eigenvalue_robin(a, beta, 0.0)
    # relative 1e-12 absorbs rounding where e^{-4a/β} makes the bound exact
    assert 0.0 <= plus.offset <= (gap + dirichlet_envelope_slack(a, beta)) * (1.0 + 1e-12)
    assert -gap * (1.0 + 1e-12) <= minus.offset <= 0.0
    assert plus.residual < 1e-10 and minus.residual < 1e-10


@pytest.mark.parametrize("a, beta, gamma_plus", [(3.0, 1.0, 0.5), (0.5, 0.1, 5.0), (1.0, 0.25, 2.0)])
def test_ordering_of_end_conditions(a, beta, gamma_plus):
    free = transverse_eigenvalue_robin(a, beta, 0.0).value
    robin = transverse_eigenvalue_robin(a, beta, gamma_plus).value
    plus = transverse_eigenvalue_dirichlet(a, beta).value
    assert free <= robin <= -4.0 / beta ** 2 <= plus


def test_offsets_survive_tiny_coupling():
    beta = 1e-5
    a = -0.75 * beta * math.log(beta)
    gap = envelope_gap(a, beta)
    assert gap == pytest.approx(16.0 * beta, rel=1e-12)
    assert transverse_eigenvalue_dirichlet(a, beta).offset == pytest.approx(gap, rel=1e-6)
    assert transverse_eigenvalue_robin(a, beta, 1.0).offset == pytest.approx(-gap, rel=1e-3)


def test_envelope_formula():
    lower, upper = lemma_trans_envelope(1.0, 0.1)
    assert lower == pytest.approx(-400.0 - 1600.0 * math.exp(-40.0), rel=1e-15)
    assert upper == pytest.approx(-400.0 + 1600.0 * math.exp(-40.0), rel=1e-15)
    with pytest.raises(RegimeError):
        lemma_trans_envelope(1.0, 1.0)


def test_regime_guard_and_override(caplog):
    with pytest.raises(RegimeError) as err:
        transverse_eigenvalue_dirichlet(1.5, 1.0)
    assert err.value.details["a_over_beta"] == pytest.approx(1.5)
    with caplog.at_level(logging.WARNING, logger="transverse_spectrum"):
        t = transverse_eigenvalue_dirichlet(1.5, 1.0, override=True)
    assert t.value < 0
    assert "below regime" in caplog.text
    with pytest.raises(RegimeError):
        transverse_eigenvalue_dirichlet(0.4, 1.0, override=True)   # no root for a/β < 1/2


def test_bad_inputs():
    with pytest.raises(ParameterError):
        transverse_eigenvalue_dirichlet(-1.0, 1.0)
    with pytest.raises(RegimeError):
        transverse_eigenvalue_robin(3.0, 1.0, 2.5)
    with pytest.raises(ParameterError):
        transverse_fd_oracle(TransverseProblem(a=3.0, beta=1.0), 8)


def test_oracle_matches_dirichlet_after_extrapolation():
    problem = TransverseProblem(a=3.0, beta=1.0)
    exact = transverse_eigenvalue_dirichlet(3.0, 1.0).value
    coarse = transverse_fd_oracle(problem, 2048).value
    fine = transverse_fd_oracle(problem, 4096).value
    # lumped P1 leading error is 4h²/β⁴
    assert fine - exact == pytest.approx(4.0 * (3.0 / 4096) ** 2, rel=1e-2)
    assert abs(richardson.extrapolate(coarse, fine) - exact) < 4e-7


@pytest.mark.parametrize("end, gamma_plus", [(EndCondition.DIRICHLET, 0.0), (EndCondition.ROBIN, 0.5)])
def test_oracle_converges_at_second_order(end, gamma_plus):
    problem = TransverseProblem(a=2.5, beta=1.0, gamma_plus=gamma_plus, end=end)
    exact = solve_transverse(problem).value
    values = [transverse_fd_oracle(problem, n).value for n in (128, 256, 512)]
    assert richardson.observed_order(values) == pytest.approx(2.0, abs=0.1)
    assert abs(richardson.extrapolate(values[1], values[2]) - exact) < 1e-6


@pytest.mark.parametrize("beta", BETAS)
@pytest.mark.parametrize("ratio", RATIOS)
@pytest.mark.parametrize("end, gamma_plus", [(EndCondition.DIRICHLET, 0.0), (EndCondition.ROBIN, 1.0)])
def test_extrapolated_oracle_agrees_on_grid(beta, ratio, end, gamma_plus):
    problem = TransverseProblem(a=ratio * beta, beta=beta, gamma_plus=gamma_plus, end=end)
    exact = solve_transverse(problem).value
    coarse = transverse_fd_oracle(problem, 2048).value
    fine = transverse_fd_oracle(problem, 4096).value
    assert richardson.extrapolate(coarse, fine) == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("a, beta, gamma_plus", [(3.0, 1.0, 0.5), (0.3, 0.1, 4.0), (1.0, 0.2, 0.0)])
def test_oracle_uniqueness(a, beta, gamma_plus):
    for end in EndCondition:
        problem = TransverseProblem(a=a, beta=beta, gamma_plus=gamma_plus, end=end)
        assert transverse_fd_oracle(problem, 256).negative_count == 1


def test_curvature_in_matching_condition_does_not_move_spectrum():
    symmetric = transverse_fd_oracle(TransverseProblem(a=3.0, beta=1.0), 2048).value
    for gamma_s in (-1.0, 0.0, 1.0):
        problem = TransverseProblem(a=3.0, beta=1.0, gamma_s=gamma_s)
        coupled = transverse_fd_oracle(problem, 2048, coupled=True)
        assert coupled.method == "coupled"
        assert coupled.value == pytest.approx(symmetric, abs=1e-8)


def test_decoupled_limit_has_no_negative_eigenvalue():
    t = transverse_fd_oracle(TransverseProblem(a=3.0, beta=1e6), 512)
    assert t.negative_count == 0
    assert t.value == pytest.approx((math.pi / 6.0) ** 2, rel=1e-3)
