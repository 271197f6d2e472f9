"""Particle ensembles carried through the samplers."""

import dataclasses
from typing import Optional

import numpy as np

from pcflow import rng as rng_lib
from pcflow.numerics import check_finite


@dataclasses.dataclass(frozen=True, eq=False)
class Ensemble:
    """Particles at a common reverse time.

    `ids` are the particle indices of the random streams; they stay attached
    to a particle for the whole run so every draw it makes is replayable.
    """

    particles: np.ndarray
    reverse_time: float = 0.0
    seed: int = 0
    ids: Optional[np.ndarray] = None

    def __post_init__(self):
        particles = np.asarray(self.particles, dtype=np.float64)
        if particles.ndim != 2:
            raise ValueError(f"Particles must be a (n, d) array, got shape {particles.shape}")
        check_finite(particles, "Non-finite particle", reverse_time=self.reverse_time)
        ids = np.arange(particles.shape[0]) if self.ids is None else np.asarray(self.ids)
        if ids.shape != (particles.shape[0],):
            raise ValueError(f"Got {ids.shape[0]} ids for {particles.shape[0]} particles")
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "ids", ids.astype(np.int64))

    @classmethod
    def standard(cls, n: int, d: int, seed: int, reverse_time: float = 0.0) -> "Ensemble":
        """n draws from the standard Gaussian, one INIT stream per particle."""
        particles = rng_lib.gaussian_block(seed, n, rng_lib.phase(rng_lib.INIT), 0, d)
        return cls(particles, reverse_time=reverse_time, seed=seed)

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @property
    def dimension(self) -> int:
        return self.particles.shape[1]

    def replace(self, particles: np.ndarray, reverse_time: Optional[float] = None) -> "Ensemble":
        return dataclasses.replace(
            self,
            particles=particles,
            reverse_time=self.reverse_time if reverse_time is None else reverse_time,
        )

    def copy(self) -> "Ensemble":
        return self.replace(self.particles.copy())
