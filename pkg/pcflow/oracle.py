"""Time-indexed score estimates in reverse-time coordinates.

This is the only place that converts between the reverse time t used by the
samplers and the forward OU time T - t.
"""

import dataclasses
import functools
import logging
from typing import Optional

import numpy as np

from pcflow import mixture, perturbations
from pcflow import rng as rng_lib
from pcflow.numerics import check_finite
from pcflow.utils import EnvVarConstants

_MARGINAL_CACHE_SIZE = 4096


@dataclasses.dataclass(frozen=True, eq=False)
class ScoreOracle:
    """s_t(x) = grad log q_{T-t}(x) plus a configured perturbation."""

    base: mixture.GaussianMixture
    horizon_T: float
    perturbation: perturbations.Perturbation
    base_lipschitz: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "_marginals", {})
        if self.horizon_T <= 0:
            raise ValueError(f"Horizon must be positive, got {self.horizon_T}")
        if self.perturbation.direction is not None and (
            self.perturbation.direction.shape != (self.base.dimension,)
        ):
            raise ValueError(
                f"Perturbation direction has shape {self.perturbation.direction.shape}, "
                f"expected ({self.base.dimension},)"
            )

    @classmethod
    def build(
        cls,
        base: mixture.GaussianMixture,
        horizon_T: float,
        kind: str = "none",
        epsilon: float = 0.0,
        omega: float = 0.0,
        direction: Optional[np.ndarray] = None,
        direction_seed: int = 0,
        base_lipschitz: Optional[float] = None,
    ) -> "ScoreOracle":
        """Look up the perturbation plugin and draw its direction if needed."""
        if direction is None:
            direction = rng_lib.unit_vector(
                rng_lib.RngStream(direction_seed, 0, rng_lib.DIRECTION), base.dimension
            )
        perturbation = perturbations.get_perturbation(kind)(
            epsilon=epsilon, omega=omega, direction=direction
        )
        return cls(base, horizon_T, perturbation, base_lipschitz)

    def with_horizon(self, horizon_T: float) -> "ScoreOracle":
        return dataclasses.replace(self, horizon_T=horizon_T)

    @property
    def dimension(self) -> int:
        return self.base.dimension

    def marginal(self, t: float) -> mixture.GaussianMixture:
        """q_t, the forward marginal at time T - t."""
        cached = self._marginals.get(t)
        if cached is None:
            self._check_time(t)
            if len(self._marginals) >= _MARGINAL_CACHE_SIZE:
                self._marginals.clear()
            cached = self._marginals[t] = self.base.ou_marginal(max(0.0, self.horizon_T - t))
        return cached

    def _check_time(self, t: float):
        # Allow round-off from accumulated step sizes.
        if t < -1e-12 or t > self.horizon_T * (1 + 1e-12):
            raise ValueError(f"Reverse time {t} outside [0, {self.horizon_T}]")

    def exact(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.marginal(t).score(x)

    def eval(self, t: float, x: np.ndarray) -> np.ndarray:
        """The score estimate s_t(x) for one point or a batch."""
        x = np.asarray(x, dtype=np.float64)
        value = self.perturbation.apply(x, self.exact(t, x))
        return check_finite(value, "Non-finite score estimate", reverse_time=t)

    def eval_forward(self, s: float, x: np.ndarray) -> np.ndarray:
        """The estimate expressed at forward time s."""
        return self.eval(self.horizon_T - s, x)

    def frozen(self, t: float):
        """The estimate at fixed reverse time t as a callable of x."""
        return functools.partial(self.eval, t)

    def effective_lipschitz(self) -> float:
        """Lipschitz constant of the estimate, used by schedules."""
        if self.base_lipschitz is None:
            grid = np.linspace(0.0, self.horizon_T, EnvVarConstants.LIPSCHITZ_TIMES)
            base = mixture.smoothness(self.base, grid).lipschitz_L
            object.__setattr__(self, "base_lipschitz", base)
            logging.getLogger("pcflow").debug(f"Estimated base Lipschitz constant {base}")
        return self.perturbation.lipschitz(self.base_lipschitz)
