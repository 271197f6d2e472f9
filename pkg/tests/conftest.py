"""Shared fixtures for running tests"""

import numpy as np
import pytest

from pcflow import config, mixture


class MixtureGenerator:
    @staticmethod
    def random_mixture(d, n_components, seed=0, radius=2.0):
        """A diagonal mixture with well separated means and moderate variances."""
        rng = np.random.default_rng(seed)
        weights = rng.uniform(0.5, 1.5, size=n_components)
        means = rng.normal(size=(n_components, d))
        means = radius * means / np.linalg.norm(means, axis=1, keepdims=True)
        variances = rng.uniform(0.2, 1.0, size=(n_components, d))
        return mixture.GaussianMixture(weights / weights.sum(), means, variances)

    @staticmethod
    def random_points(n, d, seed=0, scale=1.5):
        return scale * np.random.default_rng(seed).normal(size=(n, d))


@pytest.fixture
def mixture_generator():
    return MixtureGenerator


@pytest.fixture
def standard_2d():
    return mixture.GaussianMixture.standard(2)


@pytest.fixture
def bimodal():
    """The two component target used by the theory presets."""
    return mixture.GaussianMixture.from_components(
        [
            {"weight": 0.5, "mean": [1.5, 0.0], "variance": 0.5},
            {"weight": 0.5, "mean": [-1.5, 0.5], "variance": [0.5, 1.0]},
        ]
    )


@pytest.fixture
def five_mode_mixture():
    return config.load_preset("five-mode").run.mixture
