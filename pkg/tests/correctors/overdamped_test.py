"""Tests for the overdamped Langevin corrector."""

import math

import numpy as np
import pytest

from pcflow import correctors, mixture, oracle
from pcflow import rng as rng_lib
from pcflow.correctors import overdamped
from pcflow.ensemble import Ensemble


@pytest.fixture
def standard_oracle():
    return oracle.ScoreOracle.build(mixture.GaussianMixture.standard(2), 1.0)


def test_overdamped_step_formula():
    x = np.array([[1.0, -1.0]])
    g = np.array([[0.5, 0.25]])
    noise = np.array([[0.1, -0.2]])
    h = 0.01
    expected = x + h * g + math.sqrt(2 * h) * noise
    np.testing.assert_allclose(overdamped.overdamped_step(x, h, g, noise), expected)


def test_overdamped_step_accepts_a_callable():
    x = np.array([[1.0, -1.0]])
    noise = np.zeros((1, 2))
    np.testing.assert_allclose(
        overdamped.overdamped_step(x, 0.1, lambda y: -y, noise), 0.9 * x
    )


def test_overdamped_step_draws_from_a_stream():
    x = np.zeros(3)
    stream = rng_lib.RngStream(5, particle=2, phase=rng_lib.CORRECTOR)
    expected = math.sqrt(2 * 0.02) * stream.normal(3)
    np.testing.assert_allclose(overdamped.overdamped_step(x, 0.02, np.zeros(3), stream), expected)


def test_overdamped_step_rejects_bad_inputs():
    with pytest.raises(ValueError):
        overdamped.overdamped_step(np.zeros(2), 0.0, np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        overdamped.overdamped_step(np.zeros(2), 0.1, np.zeros(2), np.zeros(3))


def test_default_total_time():
    assert overdamped.OverdampedCorrector.default_total_time(4.0) == 0.125
    assert overdamped.OverdampedCorrector.default_total_time(4.0, 2.0) == 0.5


def test_corrector_config_validation():
    with pytest.raises(ValueError):
        correctors.CorrectorConfig("overdamped", total_time=0.1, step=0.03)
    with pytest.raises(ValueError):
        correctors.CorrectorConfig("overdamped", total_time=0.1, step=-0.01)
    with pytest.raises(ValueError):
        correctors.CorrectorConfig("overdamped", total_time=-0.1, step=0.01)
    with pytest.raises(ValueError):
        correctors.CorrectorConfig("underdamped", total_time=0.1, step=0.01)
    assert correctors.CorrectorConfig("overdamped", total_time=0.1, step=0.01).n_steps == 10


def test_get_corrector():
    assert correctors.get_corrector("overdamped") is overdamped.OverdampedCorrector
    with pytest.raises(ValueError):
        correctors.get_corrector("hamiltonian")


def test_run_corrector_skips_empty_work(standard_oracle):
    cfg = correctors.CorrectorConfig("overdamped", total_time=0.0, step=0.01)
    ensemble = Ensemble(np.ones((5, 2)))
    assert correctors.run_corrector(ensemble, cfg, standard_oracle, 0.5) is ensemble
    empty = Ensemble(np.zeros((0, 2)))
    cfg = correctors.CorrectorConfig("overdamped", total_time=0.1, step=0.01)
    assert correctors.run_corrector(empty, cfg, standard_oracle, 0.5) is empty


def test_epochs_are_reproducible_and_distinct(standard_oracle):
    cfg = correctors.CorrectorConfig("overdamped", total_time=0.05, step=0.01)
    ensemble = Ensemble.standard(100, 2, seed=9)
    one = correctors.run_corrector(ensemble, cfg, standard_oracle, 0.5, epoch=1)
    two = correctors.run_corrector(ensemble, cfg, standard_oracle, 0.5, epoch=1)
    other = correctors.run_corrector(ensemble, cfg, standard_oracle, 0.5, epoch=2)
    np.testing.assert_array_equal(one.particles, two.particles)
    assert not np.array_equal(one.particles, other.particles)
    assert one.reverse_time == ensemble.reverse_time


def test_particles_draw_from_their_own_streams(standard_oracle):
    cfg = correctors.CorrectorConfig("overdamped", total_time=0.03, step=0.01)
    full = Ensemble.standard(10, 2, seed=9)
    subset = Ensemble(full.particles[[7, 2]], seed=9, ids=full.ids[[7, 2]])
    full_out = correctors.run_corrector(full, cfg, standard_oracle, 0.5)
    subset_out = correctors.run_corrector(subset, cfg, standard_oracle, 0.5)
    np.testing.assert_allclose(subset_out.particles, full_out.particles[[7, 2]], rtol=1e-12)


def test_standard_gaussian_is_approximately_stationary(standard_oracle):
    n, h = 20_000, 0.01
    cfg = correctors.CorrectorConfig("overdamped", total_time=1.0, step=h)
    out = correctors.run_corrector(Ensemble.standard(n, 2, seed=3), cfg, standard_oracle, 0.5)
    mean, variance = out.particles.mean(axis=0), out.particles.var(axis=0, ddof=1)
    # The unadjusted chain is stationary at variance 1 / (1 - h / 2).
    np.testing.assert_allclose(mean, 0.0, atol=4 / math.sqrt(n))
    np.testing.assert_allclose(variance, 1 / (1 - h / 2), atol=4 * math.sqrt(2 / n))


def test_corrector_contracts_toward_the_target():
    target = mixture.GaussianMixture([1.0], [[1.0, -1.0]], [[0.5, 0.5]])
    target_oracle = oracle.ScoreOracle.build(target, 1.0)
    cfg = correctors.CorrectorConfig("overdamped", total_time=4.0, step=0.01)
    start = Ensemble(np.full((4000, 2), 5.0), seed=1)
    out = correctors.run_corrector(start, cfg, target_oracle, 1.0)
    np.testing.assert_allclose(out.particles.mean(axis=0), [1.0, -1.0], atol=0.05)
