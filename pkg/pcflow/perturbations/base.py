"""Base class for score perturbation plugins.

A perturbation turns the exact score of q_t into an erroneous estimate with a
controlled L2(q_t) error and a known Lipschitz constant.
"""

from abc import ABCMeta, abstractmethod
from typing import Optional

import numpy as np

from pcflow import utils

BUILTIN_PERTURBATIONS = {
    "none": "pcflow.perturbations.additive:NoPerturbation",
    "constant_bias": "pcflow.perturbations.additive:ConstantBias",
    "sinusoidal": "pcflow.perturbations.additive:Sinusoidal",
    "sign_flip": "pcflow.perturbations.fault:SignFlip",
}


@utils.abstract_classattributes("name")
class Perturbation(metaclass=ABCMeta):
    """Base class for score perturbation plugins."""

    name: str = NotImplemented  # The name used to lookup the plug-in.

    def __init__(
        self,
        epsilon: float = 0.0,
        omega: float = 0.0,
        direction: Optional[np.ndarray] = None,
    ):
        if epsilon < 0:
            raise ValueError(f"Perturbation magnitude must be nonnegative, got {epsilon}")
        if omega < 0:
            raise ValueError(f"Perturbation frequency must be nonnegative, got {omega}")
        self.epsilon = float(epsilon)
        self.omega = float(omega)
        self.direction = None
        if direction is not None:
            direction = np.asarray(direction, dtype=np.float64)
            self.direction = direction / np.linalg.norm(direction)

    @abstractmethod
    def apply(self, x: np.ndarray, exact_score: np.ndarray) -> np.ndarray:
        """Turn the exact score at `x` into the estimate."""

    @abstractmethod
    def lipschitz(self, base_lipschitz: float) -> float:
        """Lipschitz constant of the estimate given that of the exact score."""


def get_perturbation(name: Optional[str] = None) -> Perturbation:
    """Get a Perturbation class by name, defaulting to "none"."""
    return utils.load_plugin(
        "pcflow.plugins.perturbations", name or "none", BUILTIN_PERTURBATIONS
    )
