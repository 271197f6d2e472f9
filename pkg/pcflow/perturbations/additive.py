"""Perturbations that add a fixed vector field to the exact score."""

import numpy as np

from pcflow.perturbations import Perturbation


class NoPerturbation(Perturbation):
    """The estimate is the exact score."""

    name: str = "none"

    def apply(self, x, exact_score):
        return exact_score

    def lipschitz(self, base_lipschitz):
        return base_lipschitz


class ConstantBias(Perturbation):
    """s = grad log q + epsilon * u for a fixed unit vector u.

    The squared L2(q_t) error is epsilon^2 for every t and the bias is
    0-Lipschitz.
    """

    name: str = "constant_bias"

    def apply(self, x, exact_score):
        return exact_score + self.epsilon * self.direction

    def lipschitz(self, base_lipschitz):
        return base_lipschitz


class Sinusoidal(Perturbation):
    """s = grad log q + epsilon * sin(omega <u, x>) u."""

    name: str = "sinusoidal"

    def apply(self, x, exact_score):
        phase = np.asarray(x) @ self.direction
        return exact_score + self.epsilon * np.multiply.outer(
            np.sin(self.omega * phase), self.direction
        )

    def lipschitz(self, base_lipschitz):
        return max(base_lipschitz, base_lipschitz + self.epsilon * self.omega)
