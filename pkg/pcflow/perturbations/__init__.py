from pcflow.perturbations.base import Perturbation, get_perturbation
