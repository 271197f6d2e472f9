"""Base class for Langevin corrector plugins.

A corrector epoch runs Langevin dynamics targeting q_t with the score frozen at
reverse time t; it injects noise without advancing reverse time.
"""

import dataclasses
import logging
from abc import ABCMeta, abstractmethod
from typing import Optional, Union

import numpy as np

from pcflow import rng as rng_lib
from pcflow import utils
from pcflow.ensemble import Ensemble
from pcflow.oracle import ScoreOracle

BUILTIN_CORRECTORS = {
    "overdamped": "pcflow.correctors.overdamped:OverdampedCorrector",
    "underdamped": "pcflow.correctors.underdamped:UnderdampedCorrector",
}


@dataclasses.dataclass(frozen=True)
class CorrectorConfig:
    kind: str
    total_time: float
    step: float
    friction: Optional[float] = None
    velocity_init_std: float = 1.0

    def __post_init__(self):
        if self.kind not in BUILTIN_CORRECTORS:
            # Third party correctors are validated by their own plugin.
            logging.getLogger("pcflow").debug(f"Using non built-in corrector {self.kind!r}")
        if self.step <= 0:
            raise ValueError(f"Corrector step must be positive, got {self.step}")
        if self.total_time < 0:
            raise ValueError(f"Corrector time must be nonnegative, got {self.total_time}")
        if self.total_time > 0 and not utils.is_multiple(self.total_time, self.step):
            raise ValueError(
                f"Corrector time {self.total_time} is not a multiple of the step {self.step}"
            )
        if self.kind == "underdamped" and (self.friction is None or self.friction <= 0):
            raise ValueError(f"Underdamped friction must be positive, got {self.friction}")
        if self.velocity_init_std < 0:
            raise ValueError(
                f"Velocity std must be nonnegative, got {self.velocity_init_std}"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.total_time / self.step))


def noise_for(
    rng: Union[rng_lib.RngStream, np.ndarray], shape, d: int
) -> np.ndarray:
    """Standard normals either drawn from a stream or passed in precomputed."""
    if isinstance(rng, rng_lib.RngStream):
        return rng_lib.gaussian_vector(rng, d).reshape(shape)
    noise = np.asarray(rng, dtype=np.float64)
    if noise.shape != tuple(shape):
        raise ValueError(f"Noise has shape {noise.shape}, expected {tuple(shape)}")
    return noise


@utils.abstract_classattributes("name")
class Corrector(metaclass=ABCMeta):
    """Base class for corrector plugins."""

    name: str = NotImplemented  # The name used to lookup the plug-in.

    def __init__(self, config: CorrectorConfig):
        self.config = config

    @classmethod
    @abstractmethod
    def default_total_time(cls, lipschitz: float, multiplier: float = 0.5) -> float:
        """The corrector time budget for a score with Lipschitz constant L."""

    @abstractmethod
    def run_epoch(
        self, ensemble: Ensemble, oracle: ScoreOracle, t: float, epoch: int = 0
    ) -> Ensemble:
        """Run one corrector epoch at fixed reverse time `t`.

        `epoch` selects the random streams; every particle draws from streams
        keyed by its id, the epoch and the step index.
        """


def get_corrector(name: str) -> Corrector:
    """Get a Corrector class by name."""
    return utils.load_plugin("pcflow.plugins.correctors", name, BUILTIN_CORRECTORS)


def run_corrector(
    ensemble: Ensemble,
    cfg: CorrectorConfig,
    oracle: ScoreOracle,
    t: float,
    epoch: int = 0,
) -> Ensemble:
    """Run the configured corrector for one epoch at reverse time `t`."""
    if ensemble.size == 0 or cfg.n_steps == 0:
        return ensemble
    corrector = get_corrector(cfg.kind)(cfg)
    logging.getLogger("pcflow").debug(
        f"Running {cfg.n_steps} {corrector.name} corrector steps at t={t}"
    )
    return corrector.run_epoch(ensemble, oracle, t, epoch)
