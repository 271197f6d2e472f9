"""Gaussian mixtures with diagonal covariances and their OU marginals.

A mixture is immutable. Everything the samplers and diagnostics need (OU and
heat-flow marginals, exact scores, Hessians, densities, moments, cell
probabilities) is available in closed form.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
from collections import OrderedDict
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import scipy.special

from pcflow import rng as rng_lib
from pcflow.utils import EnvVarConstants

# Companion stream used for component selection when sampling.
_COMPONENT_SALT = 0x80000000


@dataclasses.dataclass(frozen=True, eq=False)
class GaussianMixture:
    """sum_k weights[k] * N(means[k], diag(variances[k]))."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        variances = np.asarray(self.variances, dtype=np.float64)
        if means.shape[0] != weights.shape[0]:
            raise ValueError(
                f"Got {weights.shape[0]} weights but {means.shape[0]} means"
            )
        if means.shape[1] < 1:
            raise ValueError("Mixture dimension must be at least 1")
        if variances.ndim < 2:
            # Isotropic components: one scalar per component.
            variances = np.repeat(variances.reshape(-1, 1), means.shape[1], axis=1)
        if variances.shape != means.shape:
            raise ValueError(
                f"Variances of shape {variances.shape} do not match means {means.shape}"
            )
        if not (np.isfinite(weights).all() and np.isfinite(means).all()):
            raise ValueError("Mixture weights and means must be finite")
        if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"Weights must be nonnegative and sum to 1, got {weights}")
        if not (np.isfinite(variances).all() and (variances > 0).all()):
            raise ValueError("Variances must be finite and strictly positive")
        for name, value in (("weights", weights), ("means", means), ("variances", variances)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def from_components(cls, components: Sequence[Dict[str, Any]]) -> GaussianMixture:
        """Build from a list of {weight, mean, variance} records."""
        if not components:
            raise ValueError("A mixture needs at least one component")
        d = len(components[0]["mean"])
        variances = []
        for component in components:
            variance = component["variance"]
            if np.isscalar(variance):
                variance = [variance] * d
            variances.append(variance)
        return cls(
            weights=[c["weight"] for c in components],
            means=[c["mean"] for c in components],
            variances=variances,
        )

    @classmethod
    def standard(cls, d: int) -> GaussianMixture:
        """The standard Gaussian measure on R^d."""
        return cls(weights=[1.0], means=np.zeros((1, d)), variances=np.ones((1, d)))

    def serialize(self) -> List[Dict[str, Any]]:
        components = []
        for w, mu, var in zip(self.weights, self.means, self.variances):
            variance = float(var[0]) if np.all(var == var[0]) else var.tolist()
            components.append(
                OrderedDict(weight=float(w), mean=mu.tolist(), variance=variance)
            )
        return components

    def __eq__(self, other):
        return (
            isinstance(other, GaussianMixture)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.variances, other.variances)
        )

    def __hash__(self):
        return hash((self.weights.tobytes(), self.means.tobytes(), self.variances.tobytes()))

    @property
    def dimension(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @functools.cached_property
    def _log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def is_standard(self) -> bool:
        """Whether every component with positive weight is N(0, I)."""
        active = self.weights > 0
        return bool(
            np.all(self.means[active] == 0.0) and np.all(self.variances[active] == 1.0)
        )

    # ----- time evolution ------------------------------------------------

    def ou_marginal(self, t: float) -> GaussianMixture:
        """Law at forward time t of dx = -x dt + sqrt(2) dB started here."""
        if t < 0:
            raise ValueError(f"OU time must be nonnegative, got {t}")
        if t == 0:
            return self
        decay = np.exp(-t)
        # 1 - e^{-2t} without cancellation for small t.
        noise = -np.expm1(-2.0 * t)
        return GaussianMixture(
            weights=self.weights,
            means=decay * self.means,
            variances=decay**2 * self.variances + noise,
        )

    def heat_marginal(self, s: float) -> GaussianMixture:
        """This mixture convolved with N(0, s I)."""
        if s < 0:
            raise ValueError(f"Heat-flow time must be nonnegative, got {s}")
        return GaussianMixture(
            weights=self.weights, means=self.means, variances=self.variances + s
        )

    # ----- densities and derivatives -------------------------------------

    def _component_terms(self, x: np.ndarray):
        """Per-component log joint densities (n, K) and gradients (n, K, d)."""
        diff = self.means[None, :, :] - x[:, None, :]
        grads = diff / self.variances[None, :, :]
        log_norm = -0.5 * np.sum(np.log(2.0 * np.pi * self.variances), axis=1)
        log_joint = self._log_weights + log_norm - 0.5 * np.sum(diff * grads, axis=2)
        return log_joint, grads

    def log_density(self, x: np.ndarray) -> Union[float, np.ndarray]:
        """log q(x) for one point (d,) or a batch (n, d)."""
        x = np.asarray(x, dtype=np.float64)
        log_joint, _ = self._component_terms(np.atleast_2d(x))
        values = scipy.special.logsumexp(log_joint, axis=1)
        return float(values[0]) if x.ndim == 1 else values

    def responsibilities(self, x: np.ndarray) -> np.ndarray:
        log_joint, _ = self._component_terms(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        return scipy.special.softmax(log_joint, axis=1)

    def score(self, x: np.ndarray) -> np.ndarray:
        """grad log q(x) = sum_k r_k(x) (mu_k - x) / sigma_k^2."""
        x = np.asarray(x, dtype=np.float64)
        log_joint, grads = self._component_terms(np.atleast_2d(x))
        resp = scipy.special.softmax(log_joint, axis=1)
        values = np.einsum("nk,nkd->nd", resp, grads)
        return values[0] if x.ndim == 1 else values

    def hessian(self, x: np.ndarray) -> np.ndarray:
        """Closed-form Hessian of log q, shape (d, d) or (n, d, d)."""
        x = np.asarray(x, dtype=np.float64)
        log_joint, grads = self._component_terms(np.atleast_2d(x))
        resp = scipy.special.softmax(log_joint, axis=1)
        mean_grad = np.einsum("nk,nkd->nd", resp, grads)
        hess = np.einsum("nk,nki,nkj->nij", resp, grads, grads)
        hess -= np.einsum("ni,nj->nij", mean_grad, mean_grad)
        diagonal = np.einsum("nk,kd->nd", resp, 1.0 / self.variances)
        idx = np.arange(self.dimension)
        hess[:, idx, idx] -= diagonal
        return hess[0] if x.ndim == 1 else hess

    # ----- moments -------------------------------------------------------

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def variance_diag(self) -> np.ndarray:
        """Per-axis variance of the mixture."""
        second = self.weights @ (self.means**2 + self.variances)
        return second - self.mean() ** 2

    def second_moment(self) -> float:
        """m2 = sqrt(E ||x||^2)."""
        per_component = np.sum(self.means**2, axis=1) + np.sum(self.variances, axis=1)
        return float(np.sqrt(self.weights @ per_component))

    # ----- sampling ------------------------------------------------------

    def sample(self, rng: rng_lib.RngStream) -> np.ndarray:
        """One draw; the Gaussian part uses `rng` itself."""
        return self.sample_block(rng.seed, [rng.particle], rng.phase, rng.step)[0]

    def sample_block(
        self,
        seed: int,
        particles: Union[int, Sequence[int], np.ndarray],
        phase_word: int = rng_lib.MIXTURE,
        step: int = 0,
        return_components: bool = False,
    ):
        """One draw per particle stream: pick a component by weight, then a Gaussian."""
        noise = rng_lib.gaussian_block(seed, particles, phase_word, step, self.dimension)
        if self.n_components == 1:
            components = np.zeros(noise.shape[0], dtype=np.int64)
        else:
            u = rng_lib.uniform_block(
                seed, particles, phase_word ^ _COMPONENT_SALT, step, 1
            )[:, 0]
            cumulative = np.cumsum(self.weights)
            components = np.searchsorted(cumulative, u, side="right")
            components = np.minimum(components, self.n_components - 1)
            # Rounding in the cumulative sum can land on a zero-weight tail.
            while np.any(self.weights[components] == 0):
                bad = self.weights[components] == 0
                components[bad] -= 1
        samples = self.means[components] + np.sqrt(self.variances[components]) * noise
        if return_components:
            return samples, components
        return samples

    # ----- cell probabilities --------------------------------------------

    def cell_probabilities(self, edges: Sequence[np.ndarray]) -> np.ndarray:
        """Mass of each cell of an axis-aligned grid, via per-axis normal CDFs."""
        if len(edges) != self.dimension:
            raise ValueError(f"Need {self.dimension} edge arrays, got {len(edges)}")
        total = 0.0
        for w, mu, var in zip(self.weights, self.means, self.variances):
            if w == 0:
                continue
            per_axis = [
                np.diff(scipy.special.ndtr((np.asarray(e) - m) / np.sqrt(v)))
                for e, m, v in zip(edges, mu, var)
            ]
            total = total + w * functools.reduce(np.multiply.outer, per_axis)
        return total


@dataclasses.dataclass(frozen=True)
class SmoothnessInfo:
    lipschitz_L: float
    second_moment_m2: float
    raw_lipschitz: float


def smoothness(
    q0: GaussianMixture,
    t_grid: Sequence[float],
    n_points: Optional[int] = None,
    seed: int = 0,
) -> SmoothnessInfo:
    """Estimate the score Lipschitz constant over forward times `t_grid`.

    The estimate is the largest Hessian operator norm seen at Monte Carlo
    points drawn from each q_t, at the OU-evolved component means, and at the
    midpoints between pairs of means, clamped up to 1.
    """
    t_grid = list(t_grid)
    if not t_grid:
        raise ValueError("Smoothness needs a nonempty time grid")
    n_points = EnvVarConstants.LIPSCHITZ_POINTS if n_points is None else n_points
    logger = logging.getLogger("pcflow")
    largest = 0.0
    for i, t in enumerate(t_grid):
        qt = q0.ou_marginal(t)
        anchors = [qt.means]
        if qt.n_components > 1:
            first, second = np.triu_indices(qt.n_components, k=1)
            anchors.append(0.5 * (qt.means[first] + qt.means[second]))
        points = np.concatenate(anchors)
        if n_points > 0:
            mc = qt.sample_block(seed, n_points, rng_lib.phase(rng_lib.DIAGNOSTIC, i))
            points = np.concatenate([points, mc])
        eigenvalues = np.linalg.eigvalsh(qt.hessian(points))
        largest = max(largest, float(np.max(np.abs(eigenvalues))))
    logger.debug(f"Largest Hessian operator norm over {len(t_grid)} times: {largest}")
    return SmoothnessInfo(
        lipschitz_L=max(1.0, largest),
        second_moment_m2=q0.second_moment(),
        raw_lipschitz=largest,
    )
