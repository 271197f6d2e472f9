"""Log-log slope fits for error scaling sweeps."""

import dataclasses
import logging
from typing import Sequence, Tuple

import numpy as np
import scipy.stats

MIN_POINTS = 4


@dataclasses.dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    n_points: int

    def within(self, low: float, high: float) -> bool:
        return low <= self.slope <= high


def slope_regression(points: Sequence[Tuple[float, float]]) -> SlopeFit:
    """Ordinary least squares of ln(error) on ln(parameter)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("Slope regression takes (parameter, error) pairs")
    if points.shape[0] < MIN_POINTS:
        raise ValueError(
            f"Slope regression needs at least {MIN_POINTS} points, got {points.shape[0]}"
        )
    if not np.all(np.isfinite(points)) or np.any(points <= 0):
        raise ValueError("Slope regression needs positive finite parameters and errors")
    parameters, errors = points[:, 0], points[:, 1]
    if np.unique(parameters).size < 2:
        raise ValueError("Slope regression needs at least two distinct parameters")
    if parameters.max() / parameters.min() < 10:
        logging.getLogger("pcflow").warning(
            f"Swept parameters span a factor {parameters.max() / parameters.min():.3g}, "
            "less than a decade"
        )
    fit = scipy.stats.linregress(np.log(parameters), np.log(errors))
    return SlopeFit(
        slope=float(fit.slope),
        stderr=float(fit.stderr),
        intercept=float(fit.intercept),
        n_points=points.shape[0],
    )
