"""Tests for mixture.py"""

import numpy as np
import pytest
import scipy.integrate

from pcflow import mixture
from pcflow import rng as rng_lib

TRIALS = 5


def test_isotropic_variances_expand():
    m = mixture.GaussianMixture.from_components(
        [{"weight": 1.0, "mean": [0.0, 1.0, 2.0], "variance": 0.5}]
    )
    np.testing.assert_array_equal(m.variances, [[0.5, 0.5, 0.5]])


@pytest.mark.parametrize(
    "weights,means,variances",
    [
        ([0.5, 0.6], [[0.0], [1.0]], [1.0, 1.0]),
        ([1.5, -0.5], [[0.0], [1.0]], [1.0, 1.0]),
        ([1.0], [[0.0]], [0.0]),
        ([1.0], [[np.nan]], [1.0]),
        ([0.5, 0.5], [[0.0]], [1.0]),
        ([1.0], [[0.0, 0.0]], [[1.0, 1.0, 1.0]]),
    ],
)
def test_invalid_mixtures(weights, means, variances):
    with pytest.raises(ValueError):
        mixture.GaussianMixture(weights, means, variances)


def test_zero_weight_components_are_allowed():
    m = mixture.GaussianMixture([1.0, 0.0], [[0.0], [5.0]], [1.0, 1.0])
    assert np.isfinite(m.log_density(np.array([5.0])))
    samples, components = m.sample_block(0, 10_000, return_components=True)
    assert np.all(components == 0)


def test_arrays_are_read_only():
    m = mixture.GaussianMixture.standard(2)
    with pytest.raises(ValueError):
        m.means[0, 0] = 1.0


def test_serialize_round_trips_through_from_components(bimodal):
    assert mixture.GaussianMixture.from_components(bimodal.serialize()) == bimodal


def test_ou_marginal_at_zero_is_identity(bimodal):
    assert bimodal.ou_marginal(0.0) is bimodal


def test_standard_gaussian_is_ou_invariant():
    standard = mixture.GaussianMixture.standard(3)
    for t in (1e-8, 0.3, 2.0):
        evolved = standard.ou_marginal(t)
        np.testing.assert_allclose(evolved.means, 0.0)
        np.testing.assert_allclose(evolved.variances, 1.0, rtol=1e-14)


def test_ou_marginal_closed_form(bimodal):
    t = 0.7
    evolved = bimodal.ou_marginal(t)
    np.testing.assert_allclose(evolved.means, np.exp(-t) * bimodal.means)
    np.testing.assert_allclose(
        evolved.variances, np.exp(-2 * t) * bimodal.variances + 1 - np.exp(-2 * t)
    )
    assert np.array_equal(evolved.weights, bimodal.weights)


def test_ou_marginal_is_a_semigroup(mixture_generator):
    m = mixture_generator.random_mixture(3, 4, seed=2)
    for s, t in [(0.1, 0.2), (0.5, 1.5), (2.0, 0.01)]:
        stepped = m.ou_marginal(s).ou_marginal(t)
        direct = m.ou_marginal(s + t)
        np.testing.assert_allclose(stepped.means, direct.means, rtol=0, atol=1e-12)
        np.testing.assert_allclose(stepped.variances, direct.variances, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(stepped.weights, direct.weights)


def test_ou_marginal_converges_to_standard(bimodal):
    far = bimodal.ou_marginal(30.0)
    np.testing.assert_allclose(far.means, 0.0, atol=1e-12)
    np.testing.assert_allclose(far.variances, 1.0)


def test_negative_times_are_rejected(bimodal):
    with pytest.raises(ValueError):
        bimodal.ou_marginal(-0.1)
    with pytest.raises(ValueError):
        bimodal.heat_marginal(-0.1)


def test_log_density_integrates_to_one():
    m = mixture.GaussianMixture.from_components(
        [
            {"weight": 0.3, "mean": [-4.0], "variance": 0.05},
            {"weight": 0.5, "mean": [0.5], "variance": 1.0},
            {"weight": 0.2, "mean": [6.0], "variance": 2.5},
        ]
    )
    total, _ = scipy.integrate.quad(
        lambda x: np.exp(m.log_density(np.array([x]))), -20.0, 20.0, points=[-4.0, 0.5, 6.0], limit=200
    )
    assert abs(total - 1.0) <= 1e-6


def test_single_gaussian_score():
    m = mixture.GaussianMixture([1.0], [[1.0, -2.0]], [[0.5, 2.0]])
    x = np.array([[0.0, 0.0], [3.0, 1.0]])
    np.testing.assert_allclose(m.score(x), (m.means - x) / m.variances)


def test_score_is_gradient_of_log_density(mixture_generator):
    eps = 1e-6
    for trial in range(TRIALS):
        m = mixture_generator.random_mixture(3, 4, seed=trial)
        x = mixture_generator.random_points(5, 3, seed=trial)
        numeric = np.stack(
            [
                (m.log_density(x + eps * e) - m.log_density(x - eps * e)) / (2 * eps)
                for e in np.eye(3)
            ],
            axis=1,
        )
        np.testing.assert_allclose(m.score(x), numeric, rtol=1e-5, atol=1e-6)


def test_hessian_is_jacobian_of_score(mixture_generator):
    eps = 1e-6
    for trial in range(TRIALS):
        m = mixture_generator.random_mixture(3, 3, seed=trial)
        x = mixture_generator.random_points(4, 3, seed=trial)
        numeric = np.stack(
            [(m.score(x + eps * e) - m.score(x - eps * e)) / (2 * eps) for e in np.eye(3)],
            axis=2,
        )
        np.testing.assert_allclose(m.hessian(x), numeric, rtol=1e-5, atol=1e-6)


def test_single_point_and_batch_agree(bimodal):
    x = np.array([[0.3, -0.4], [1.0, 2.0]])
    np.testing.assert_allclose(bimodal.score(x[1]), bimodal.score(x)[1])
    np.testing.assert_allclose(bimodal.hessian(x[0]), bimodal.hessian(x)[0])
    assert isinstance(bimodal.log_density(x[0]), float)


def test_score_is_stable_far_from_the_modes(bimodal):
    x = np.array([[1e3, -1e3]])
    assert np.all(np.isfinite(bimodal.score(x)))
    assert np.isfinite(bimodal.log_density(x[0]))


def test_moments():
    m = mixture.GaussianMixture([0.5, 0.5], [[2.0], [-2.0]], [1.0, 1.0])
    np.testing.assert_allclose(m.mean(), [0.0])
    np.testing.assert_allclose(m.variance_diag(), [5.0])
    np.testing.assert_allclose(m.second_moment(), np.sqrt(5.0))


def test_sampling_is_deterministic(bimodal):
    a = bimodal.sample_block(7, 100)
    b = bimodal.sample_block(7, 100)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(bimodal.sample(rng_lib.RngStream(7, 3, rng_lib.MIXTURE)), a[3])


def test_component_frequencies_match_weights(five_mode_mixture):
    n = 100_000
    _, components = five_mode_mixture.sample_block(11, n, return_components=True)
    counts = np.bincount(components, minlength=five_mode_mixture.n_components)
    w = five_mode_mixture.weights
    sigma = np.sqrt(n * w * (1 - w))
    assert np.all(np.abs(counts - n * w) <= 3 * sigma)


def test_sample_moments_match_closed_form(bimodal):
    n = 100_000
    samples = bimodal.sample_block(5, n)
    variance = bimodal.variance_diag()
    np.testing.assert_allclose(
        samples.mean(axis=0), bimodal.mean(), atol=float(4 * np.sqrt(variance.max() / n))
    )
    np.testing.assert_allclose(samples.var(axis=0), variance, rtol=0.03)


def test_cell_probabilities_cover_the_mass(bimodal):
    edges = [np.linspace(-10, 10, 21), np.linspace(-10, 10, 11)]
    cells = bimodal.cell_probabilities(edges)
    assert cells.shape == (20, 10)
    np.testing.assert_allclose(cells.sum(), 1.0, atol=1e-10)
    assert np.all(cells >= 0)


def test_cell_probabilities_needs_every_axis(bimodal):
    with pytest.raises(ValueError):
        bimodal.cell_probabilities([np.linspace(-1, 1, 5)])


def test_smoothness_of_standard_gaussian():
    info = mixture.smoothness(mixture.GaussianMixture.standard(4), [0.0, 1.0, 2.0], n_points=100)
    np.testing.assert_allclose(info.lipschitz_L, 1.0)
    np.testing.assert_allclose(info.second_moment_m2, 2.0)


def test_smoothness_of_narrow_gaussian():
    narrow = mixture.GaussianMixture([1.0], [[0.0, 0.0]], [[0.1, 0.5]])
    info = mixture.smoothness(narrow, [0.0], n_points=10)
    np.testing.assert_allclose(info.lipschitz_L, 10.0)


def test_smoothness_is_clamped_to_one():
    wide = mixture.GaussianMixture([1.0], [[0.0]], [[4.0]])
    info = mixture.smoothness(wide, [0.0], n_points=10)
    np.testing.assert_allclose(info.raw_lipschitz, 0.25)
    assert info.lipschitz_L == 1.0


def test_smoothness_needs_times(bimodal):
    with pytest.raises(ValueError):
        mixture.smoothness(bimodal, [])


def test_expected_squared_score_is_bounded_by_l_times_d(bimodal):
    """E_q ||grad log q||^2 <= L d, up to Monte Carlo error."""
    n = 20_000
    for i, t in enumerate((0.0, 0.2, 1.0)):
        qt = bimodal.ou_marginal(t)
        L = mixture.smoothness(qt, [0.0], n_points=2000).lipschitz_L
        squared = np.sum(qt.score(qt.sample_block(i, n)) ** 2, axis=1)
        stderr = squared.std(ddof=1) / np.sqrt(n)
        assert squared.mean() <= L * qt.dimension + 3 * stderr
