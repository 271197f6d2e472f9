"""Tests for evaluation/diagnostics.py"""

import math

import numpy as np
import pytest

from pcflow.correctors import CorrectorConfig
from pcflow.evaluation import diagnostics
from pcflow.oracle import ScoreOracle


def test_underdamped_moment_check_passes():
    result = diagnostics.underdamped_moment_check(((2.0, 0.1), (10.0, 0.01)), inner_steps=10**4)
    assert result.passed
    assert result.value <= result.tolerance
    assert len(result.details["settings"]) == 2


def test_underdamped_moment_check_fails_with_a_coarse_reference():
    result = diagnostics.underdamped_moment_check(((2.0, 0.1),), inner_steps=1)
    assert not result.passed


def test_reparam_check_passes_for_the_exact_score(bimodal):
    oracle = ScoreOracle.build(bimodal, 1.0)
    result = diagnostics.reparam_check(oracle, [0.0, 0.1], n_particles=20, inner_step=1e-4)
    assert result.passed, result.details
    assert result.details["deviations"][0] == 0.0
    assert result.name == "reparam"


def test_reparam_check_fails_for_a_flipped_score(bimodal):
    oracle = ScoreOracle.build(bimodal, 1.0, kind="sign_flip")
    result = diagnostics.reparam_check(oracle, [0.0, 0.1], n_particles=20, inner_step=1e-4)
    assert not result.passed
    assert result.value > result.tolerance


def test_reparam_check_rejects_times_past_the_horizon(bimodal):
    oracle = ScoreOracle.build(bimodal, 1.0)
    with pytest.raises(ValueError):
        diagnostics.reparam_check(oracle, [0.0, 2.0])


@pytest.mark.parametrize("flow", [diagnostics.OU, diagnostics.HEAT])
def test_score_perturbation_stays_below_the_bound(bimodal, flow):
    result, records = diagnostics.score_perturbation_diagnostic(
        bimodal, [0.1, 0.5, 1.0], n_particles=200, flow=flow
    )
    assert result.name == f"score_perturbation_{flow}"
    assert result.passed, result.details
    assert [r.t for r in records] == [0.1, 0.5, 1.0]
    assert all(r.bound > 0 and r.mean_squared >= 0 for r in records)


def test_score_perturbation_bound_uses_the_given_lipschitz(bimodal):
    _, records = diagnostics.score_perturbation_diagnostic(
        bimodal, [0.5], n_particles=50, lipschitz=2.0
    )
    np.testing.assert_allclose(records[0].bound, 4.0 * 2 * 2.0)


def test_score_perturbation_needs_positive_times(bimodal):
    with pytest.raises(ValueError):
        diagnostics.score_perturbation_diagnostic(bimodal, [0.0, 1.0])
    with pytest.raises(ValueError):
        diagnostics.score_perturbation_diagnostic(bimodal, [1.0], flow="brownian")


def test_forward_convergence_rate(bimodal):
    result = diagnostics.forward_convergence_check(bimodal, [1.0, 2.0, 3.0, 4.0], n=1000)
    assert result.passed, result.details
    np.testing.assert_allclose(result.value, -1.0, atol=0.1)
    assert len(result.details["w2_estimates"]) == 4


def test_forward_convergence_fails_outside_the_range(standard_2d):
    result = diagnostics.forward_convergence_check(
        standard_2d, [1.0, 2.0, 3.0], n=500, slope_range=(-3.0, -2.0)
    )
    assert not result.passed


def test_forward_convergence_needs_two_times(standard_2d):
    with pytest.raises(ValueError):
        diagnostics.forward_convergence_check(standard_2d, [1.0])


def test_stationarity_of_the_exact_corrector(standard_2d):
    oracle = ScoreOracle.build(standard_2d, 1.0)
    cfg = CorrectorConfig("overdamped", total_time=0.1, step=0.01)
    result = diagnostics.corrector_stationarity_check(oracle, cfg, 0.5, n_particles=4000)
    assert result.passed, result.details
    assert result.details["kind"] == "overdamped"


def test_stationarity_of_the_underdamped_corrector(bimodal):
    oracle = ScoreOracle.build(bimodal, 1.0)
    cfg = CorrectorConfig("underdamped", total_time=0.1, step=0.01, friction=1.0)
    result = diagnostics.corrector_stationarity_check(oracle, cfg, 0.5, n_particles=4000)
    assert result.passed, result.details


def test_stationarity_fails_for_a_flipped_score(standard_2d):
    oracle = ScoreOracle.build(standard_2d, 1.0, kind="sign_flip")
    cfg = CorrectorConfig("overdamped", total_time=1.0, step=0.01)
    result = diagnostics.corrector_stationarity_check(oracle, cfg, 0.5, n_particles=4000)
    assert not result.passed
    assert result.value > 1.0


def test_check_results_serialize():
    result = diagnostics.CheckResult("x", True, 0.5, 1.0)
    assert list(result.serialize()) == ["name", "passed", "value", "tolerance", "details"]
    assert math.isfinite(result.serialize()["value"])


def test_forward_convergence_on_the_five_mode_mixture(five_mode_mixture):
    result = diagnostics.forward_convergence_check(five_mode_mixture, [1.0, 2.0, 3.0, 4.0])
    assert result.passed, result.details


@pytest.mark.slow
def test_score_perturbation_on_the_five_mode_mixture(five_mode_mixture):
    result, _ = diagnostics.score_perturbation_diagnostic(
        five_mode_mixture, [0.05, 0.1, 0.5, 1.0, 2.0]
    )
    assert result.value <= 10.0
