"""A deliberately corrupted score, used to check that diagnostics can fail."""

from pcflow.perturbations import Perturbation


class SignFlip(Perturbation):
    """s = -grad log q."""

    name: str = "sign_flip"

    def apply(self, x, exact_score):
        return -exact_score

    def lipschitz(self, base_lipschitz):
        return base_lipschitz
