"""Distances and summaries between ensembles and mixtures."""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.optimize
import scipy.spatial.distance

from pcflow import rng as rng_lib
from pcflow.ensemble import Ensemble
from pcflow.mixture import GaussianMixture
from pcflow.utils import EnvVarConstants

EXACT = "exact"
SLICED = "sliced"

Points = Union[Ensemble, np.ndarray]


def as_points(a: Points) -> np.ndarray:
    if isinstance(a, Ensemble):
        return a.particles
    return np.atleast_2d(np.asarray(a, dtype=np.float64))


def _check_dimensions(a: np.ndarray, b: np.ndarray):
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"Dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("Cannot compare empty ensembles")


def projections(d: int, n_slices: int, seed: int = 0) -> np.ndarray:
    """`n_slices` unit directions, one PROJECTION stream each."""
    directions = rng_lib.gaussian_block(seed, n_slices, rng_lib.phase(rng_lib.PROJECTION), 0, d)
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def _quantiles(sorted_values: np.ndarray, levels: np.ndarray) -> np.ndarray:
    n = sorted_values.shape[0]
    return sorted_values[np.minimum((levels * n).astype(np.int64), n - 1)]


def _w2_1d_squared(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared 1-d W2 along axis 0 for every column, by the sorted coupling."""
    a = np.sort(a, axis=0)
    b = np.sort(b, axis=0)
    if a.shape[0] != b.shape[0]:
        levels = (np.arange(max(a.shape[0], b.shape[0])) + 0.5) / max(
            a.shape[0], b.shape[0]
        )
        a, b = _quantiles(a, levels), _quantiles(b, levels)
    return np.mean((a - b) ** 2, axis=0)


def w2_estimate(
    a: Points,
    b: Points,
    mode: str = SLICED,
    n_slices: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Empirical Wasserstein-2 distance between two point clouds.

    `exact` solves the assignment problem on squared Euclidean costs (equal
    sizes, at most PCFLOW_W2_EXACT_MAX points). `sliced` averages squared 1-d
    costs over random projections and rescales by d, so it matches W2 on
    isotropic Gaussian pairs.
    """
    a, b = as_points(a), as_points(b)
    _check_dimensions(a, b)
    if mode == EXACT:
        if a.shape[0] != b.shape[0]:
            raise ValueError(f"Exact W2 needs equal sizes, got {a.shape[0]} and {b.shape[0]}")
        if a.shape[0] > EnvVarConstants.W2_EXACT_MAX:
            raise ValueError(
                f"Exact W2 is capped at {EnvVarConstants.W2_EXACT_MAX} points, got {a.shape[0]}"
            )
        cost = scipy.spatial.distance.cdist(a, b, metric="sqeuclidean")
        rows, cols = scipy.optimize.linear_sum_assignment(cost)
        return float(np.sqrt(np.mean(cost[rows, cols])))
    if mode != SLICED:
        raise ValueError(f"Unknown W2 mode {mode!r}")
    n_slices = EnvVarConstants.SLICES if n_slices is None else n_slices
    d = a.shape[1]
    directions = projections(d, n_slices, seed)
    per_slice = _w2_1d_squared(a @ directions.T, b @ directions.T)
    return float(np.sqrt(d * np.mean(per_slice)))


def coupled_deviation(a: Points, b: Points) -> float:
    """Root mean squared distance between particles with the same identity.

    This is the cost of one particular coupling, so it bounds W2 from above.
    """
    a, b = as_points(a), as_points(b)
    if a.shape != b.shape:
        raise ValueError(f"Coupled ensembles must match in shape: {a.shape} vs {b.shape}")
    if a.shape[0] == 0:
        raise ValueError("Cannot compare empty ensembles")
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def histogram_edges(
    points: Sequence[np.ndarray],
    bins: int,
    ranges: Optional[Sequence[Tuple[float, float]]] = None,
) -> List[np.ndarray]:
    """Per-axis edges; without `ranges` they cover every given point."""
    d = points[0].shape[1]
    if ranges is None:
        stacked = np.concatenate(points)
        low, high = stacked.min(axis=0), stacked.max(axis=0)
        pad = 1e-9 * np.maximum(1.0, high - low)
        ranges = list(zip(low - pad, high + pad))
    if len(ranges) != d:
        raise ValueError(f"Need {d} histogram ranges, got {len(ranges)}")
    return [np.linspace(lo, hi, bins + 1) for lo, hi in ranges]


def _cell_masses(points: np.ndarray, edges: List[np.ndarray]) -> np.ndarray:
    counts, _ = np.histogramdd(points, bins=edges)
    return counts / points.shape[0]


def tv_histogram(
    a: Points,
    b: Union[Points, GaussianMixture],
    bins: int = 50,
    ranges: Optional[Sequence[Tuple[float, float]]] = None,
) -> float:
    """Half L1 distance between histograms on a shared grid, for d <= 3.

    A mixture on the right hand side is integrated exactly over each cell.
    Mass outside the grid counts as one extra cell.
    """
    a = as_points(a)
    if a.shape[1] > 3:
        raise ValueError(f"Histogram TV is limited to d <= 3, got d={a.shape[1]}")
    if isinstance(b, GaussianMixture):
        if b.dimension != a.shape[1]:
            raise ValueError(f"Dimension mismatch: {a.shape[1]} vs {b.dimension}")
        if a.shape[0] == 0:
            raise ValueError("Cannot compare empty ensembles")
        if ranges is None:
            spread = 6.0 * np.sqrt(b.variances.max(axis=0))
            ranges = list(
                zip(
                    np.minimum(a.min(axis=0), b.means.min(axis=0) - spread),
                    np.maximum(a.max(axis=0), b.means.max(axis=0) + spread),
                )
            )
        edges = histogram_edges([a], bins, ranges)
        p, q = _cell_masses(a, edges), b.cell_probabilities(edges)
    else:
        b = as_points(b)
        _check_dimensions(a, b)
        edges = histogram_edges([a, b], bins, ranges)
        p, q = _cell_masses(a, edges), _cell_masses(b, edges)
    outside = abs((1.0 - p.sum()) - (1.0 - q.sum()))
    return float(np.clip(0.5 * (np.abs(p - q).sum() + outside), 0.0, 1.0))


def tv_marginals(
    a: Points, b: Union[Points, GaussianMixture], bins: int = 50
) -> np.ndarray:
    """Histogram TV of every 1-d marginal; each is a lower bound on joint TV."""
    a = as_points(a)
    if isinstance(b, GaussianMixture):
        return np.array([tv_histogram(a[:, [i]], marginal(b, i), bins) for i in range(a.shape[1])])
    b = as_points(b)
    _check_dimensions(a, b)
    return np.array([tv_histogram(a[:, [i]], b[:, [i]], bins) for i in range(a.shape[1])])


def marginal(mixture: GaussianMixture, axis: int) -> GaussianMixture:
    """The 1-d marginal of a diagonal mixture along one axis."""
    return GaussianMixture(
        weights=mixture.weights,
        means=mixture.means[:, [axis]],
        variances=mixture.variances[:, [axis]],
    )


def mode_weights(ensemble: Points, mixture: GaussianMixture) -> np.ndarray:
    """Fraction of particles whose nearest component mean is each component."""
    points = as_points(ensemble)
    if points.shape[0] == 0:
        raise ValueError("Mode weights of an empty ensemble are undefined")
    distances = scipy.spatial.distance.cdist(points, mixture.means, metric="sqeuclidean")
    nearest = np.argmin(distances, axis=1)
    return np.bincount(nearest, minlength=mixture.n_components) / points.shape[0]


def moments(ensemble: Points) -> Tuple[np.ndarray, np.ndarray]:
    """Per-axis sample mean and (unbiased) variance."""
    points = as_points(ensemble)
    if points.shape[0] < 2:
        raise ValueError("Moments need at least two particles")
    return points.mean(axis=0), points.var(axis=0, ddof=1)


def target_samples(
    mixture: GaussianMixture, n: int, seed: int, stream: int = 0
) -> np.ndarray:
    """Exact reference samples of a mixture from a MIXTURE stream."""
    logging.getLogger("pcflow").debug(f"Drawing {n} exact reference samples")
    return mixture.sample_block(seed, n, rng_lib.phase(rng_lib.MIXTURE, stream))


def sliced_w2_with_stderr(
    a: Points, b: Points, n_slices: Optional[int] = None, seed: int = 0
) -> Tuple[float, float]:
    """Sliced W2 and its slice-to-slice standard error."""
    a, b = as_points(a), as_points(b)
    _check_dimensions(a, b)
    n_slices = EnvVarConstants.SLICES if n_slices is None else n_slices
    terms = a.shape[1] * _w2_1d_squared(
        a @ projections(a.shape[1], n_slices, seed).T,
        b @ projections(b.shape[1], n_slices, seed).T,
    )
    w2 = float(np.sqrt(np.mean(terms)))
    if n_slices < 2 or w2 == 0:
        return w2, 0.0
    return w2, float(np.std(terms, ddof=1) / np.sqrt(n_slices) / (2 * w2))
