"""Underdamped (kinetic) Langevin Monte Carlo with a frozen score.

With the drift g = s(z) frozen over a step the dynamics

    dz = v dt,    dv = (g - gamma v) dt + sqrt(2 gamma) dB

are linear, so each step samples the exact Gaussian transition law.
"""

import math
from typing import Callable, NamedTuple, Union

import numpy as np

from pcflow import rng as rng_lib
from pcflow.correctors.base import Corrector, noise_for
from pcflow.ensemble import Ensemble
from pcflow.numerics import check_finite

ScoreArg = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]

# Below this gamma * h the position variance is evaluated by its series.
_SERIES_THRESHOLD = 1e-3


class KernelMoments(NamedTuple):
    mean_z: np.ndarray
    mean_v: np.ndarray
    var_z: float
    var_v: float
    cov_zv: float


def _position_bracket(u: float) -> float:
    """u - 2 (1 - e^-u) + (1 - e^-2u) / 2."""
    if u < _SERIES_THRESHOLD:
        return u**3 / 3 - u**4 / 4 + 7 * u**5 / 60 - u**6 / 24
    return u + 2 * math.expm1(-u) - math.expm1(-2 * u) / 2


def underdamped_moments(
    z: np.ndarray, v: np.ndarray, g: np.ndarray, gamma: float, h: float
) -> KernelMoments:
    """Closed form mean and per-axis covariance of one exact step."""
    if h <= 0 or gamma <= 0:
        raise ValueError(f"Need positive step and friction, got h={h}, gamma={gamma}")
    u = gamma * h
    decay = -math.expm1(-u)  # 1 - e^{-gamma h}
    z, v, g = (np.asarray(a, dtype=np.float64) for a in (z, v, g))
    mean_v = v + decay * (g / gamma - v)
    mean_z = z + decay / gamma * v + (u - decay) / gamma * g / gamma
    return KernelMoments(
        mean_z=mean_z,
        mean_v=mean_v,
        var_z=2 / gamma**2 * _position_bracket(u),
        var_v=-math.expm1(-2 * u),
        cov_zv=decay**2 / gamma,
    )


def underdamped_step(
    z: np.ndarray,
    v: np.ndarray,
    h: float,
    gamma: float,
    s: ScoreArg,
    rng: Union[rng_lib.RngStream, np.ndarray],
):
    """One exact step; returns the new (z, v).

    `rng` is a stream or standard normals of shape (..., 2d): the first d
    columns drive the position, the rest the velocity.
    """
    z = np.asarray(z, dtype=np.float64)
    g = s(z) if callable(s) else s
    moments = underdamped_moments(z, v, g, gamma, h)
    d = z.shape[-1]
    noise = noise_for(rng, z.shape[:-1] + (2 * d,), z.size * 2)
    xi_z, xi_v = noise[..., :d], noise[..., d:]
    # Per-axis Cholesky factor of [[var_z, cov], [cov, var_v]].
    l11 = math.sqrt(moments.var_z)
    l21 = moments.cov_zv / l11
    l22 = math.sqrt(max(moments.var_v - l21**2, 0.0))
    return (
        moments.mean_z + l11 * xi_z,
        moments.mean_v + l21 * xi_z + l22 * xi_v,
    )


def _check_inner(h, inner_steps):
    if inner_steps < 1:
        raise ValueError(f"Need at least one inner step, got {inner_steps}")
    return h / inner_steps


def euler_maruyama_moments(
    z: np.ndarray,
    v: np.ndarray,
    g: np.ndarray,
    gamma: float,
    h: float,
    inner_steps: int = 10**4,
) -> KernelMoments:
    """Mean and covariance of Euler-Maruyama over one step, propagated exactly.

    The scheme is linear with additive noise, so its mean and covariance obey
    a deterministic recursion; iterating it gives the fine-step law without
    sampling noise.
    """
    dt = _check_inner(h, inner_steps)
    mean_z, mean_v = (np.array(a, dtype=np.float64) for a in (z, v))
    g = np.asarray(g, dtype=np.float64)
    var_z = var_v = cov = 0.0
    damp = 1 - gamma * dt
    for _ in range(inner_steps):
        mean_z, mean_v = mean_z + dt * mean_v, damp * mean_v + dt * g
        var_z, cov, var_v = (
            var_z + 2 * dt * cov + dt**2 * var_v,
            damp * (cov + dt * var_v),
            damp**2 * var_v + 2 * gamma * dt,
        )
    return KernelMoments(mean_z, mean_v, var_z, var_v, cov)


def euler_maruyama_paths(
    z: np.ndarray,
    v: np.ndarray,
    g: np.ndarray,
    gamma: float,
    h: float,
    n_paths: int,
    inner_steps: int = 10**4,
    seed: int = 0,
):
    """Simulate Euler-Maruyama paths over one step, returning (z, v) samples."""
    dt = _check_inner(h, inner_steps)
    z, v, g = (np.asarray(a, dtype=np.float64) for a in (z, v, g))
    d = z.shape[-1]
    paths_z = np.broadcast_to(z, (n_paths, d)).copy()
    paths_v = np.broadcast_to(v, (n_paths, d)).copy()
    phase_word = rng_lib.phase(rng_lib.DIAGNOSTIC)
    scale = math.sqrt(2 * gamma * dt)
    for k in range(inner_steps):
        noise = rng_lib.gaussian_block(seed, n_paths, phase_word, k, d)
        paths_z, paths_v = (
            paths_z + dt * paths_v,
            paths_v + dt * (g - gamma * paths_v) + scale * noise,
        )
    return paths_z, paths_v


def sample_moments(paths_z: np.ndarray, paths_v: np.ndarray) -> KernelMoments:
    """Empirical moments of simulated paths, pooled over axes for covariances."""
    dz = paths_z - paths_z.mean(axis=0)
    dv = paths_v - paths_v.mean(axis=0)
    return KernelMoments(
        mean_z=paths_z.mean(axis=0),
        mean_v=paths_v.mean(axis=0),
        var_z=float(np.mean(dz**2)),
        var_v=float(np.mean(dv**2)),
        cov_zv=float(np.mean(dz * dv)),
    )


class UnderdampedCorrector(Corrector):
    """Fresh velocity each epoch, positions returned, velocity discarded."""

    name: str = "underdamped"

    @classmethod
    def default_total_time(cls, lipschitz, multiplier=0.5):
        return multiplier / math.sqrt(lipschitz)

    def initial_velocity(self, ensemble: Ensemble, epoch: int) -> np.ndarray:
        return self.config.velocity_init_std * rng_lib.gaussian_block(
            ensemble.seed,
            ensemble.ids,
            rng_lib.phase(rng_lib.VELOCITY, epoch),
            0,
            ensemble.dimension,
        )

    def run_epoch(self, ensemble, oracle, t, epoch=0):
        h, gamma = self.config.step, self.config.friction
        phase_word = rng_lib.phase(rng_lib.CORRECTOR, epoch)
        z = ensemble.particles
        v = self.initial_velocity(ensemble, epoch)
        for k in range(self.config.n_steps):
            noise = rng_lib.gaussian_block(
                ensemble.seed, ensemble.ids, phase_word, k, 2 * ensemble.dimension
            )
            z, v = underdamped_step(z, v, h, gamma, oracle.eval(t, z), noise)
            check_finite(
                z,
                "Non-finite underdamped corrector output",
                reverse_time=t,
                epoch=epoch,
                step=k,
            )
        return ensemble.replace(z)
