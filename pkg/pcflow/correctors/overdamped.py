"""Overdamped Langevin Monte Carlo with a frozen score."""

import math
from typing import Callable, Union

import numpy as np

from pcflow import rng as rng_lib
from pcflow.correctors.base import Corrector, noise_for
from pcflow.ensemble import Ensemble
from pcflow.numerics import check_finite

ScoreArg = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def overdamped_step(
    x: np.ndarray,
    h: float,
    s: ScoreArg,
    rng: Union[rng_lib.RngStream, np.ndarray],
) -> np.ndarray:
    """x + h s(x) + sqrt(2h) xi.

    `s` is either the score value at x or a callable evaluating it; `rng` is
    either a stream or the standard normal noise itself.
    """
    if h <= 0:
        raise ValueError(f"Corrector step must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    g = s(x) if callable(s) else np.asarray(s, dtype=np.float64)
    noise = noise_for(rng, x.shape, x.size)
    return x + h * g + math.sqrt(2 * h) * noise


class OverdampedCorrector(Corrector):
    name: str = "overdamped"

    @classmethod
    def default_total_time(cls, lipschitz, multiplier=0.5):
        return multiplier / lipschitz

    def run_epoch(self, ensemble, oracle, t, epoch=0):
        h = self.config.step
        phase_word = rng_lib.phase(rng_lib.CORRECTOR, epoch)
        x = ensemble.particles
        for k in range(self.config.n_steps):
            noise = rng_lib.gaussian_block(
                ensemble.seed, ensemble.ids, phase_word, k, ensemble.dimension
            )
            x = check_finite(
                overdamped_step(x, h, oracle.eval(t, x), noise),
                "Non-finite overdamped corrector output",
                reverse_time=t,
                epoch=epoch,
                step=k,
            )
        return ensemble.replace(x)
