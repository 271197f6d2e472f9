"""Predictor-corrector samplers for the probability flow ODE."""

from pcflow import (
    correctors,
    ensemble,
    evaluation,
    mixture,
    numerics,
    oracle,
    perturbations,
    predictor,
    rng,
    sampler,
    utils,
)

__version__ = "0.1.0"
