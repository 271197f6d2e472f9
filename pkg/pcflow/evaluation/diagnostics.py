"""Self-checks of the score, flow and corrector machinery.

Every check returns a `CheckResult` with the measured value, the tolerance it
was held to and whether it passed; `verify` runs them as a suite.
"""

import dataclasses
import logging
import math
from collections import OrderedDict
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.stats

from pcflow import correctors
from pcflow import mixture as mixture_lib
from pcflow import rng as rng_lib
from pcflow.correctors import CorrectorConfig
from pcflow.correctors import underdamped as underdamped_lib
from pcflow.ensemble import Ensemble
from pcflow.evaluation import metrics
from pcflow.oracle import ScoreOracle
from pcflow.utils import EnvVarConstants, NumericalError

OU = "ou"
HEAT = "heat"


@dataclasses.dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    details: Dict[str, Any] = dataclasses.field(default_factory=OrderedDict)

    def serialize(self) -> Dict[str, Any]:
        return dataclasses.asdict(self, dict_factory=OrderedDict)


def _rk4(drift, x, t0, t1, step):
    count = max(1, int(math.ceil((t1 - t0) / step - 1e-9)))
    h = (t1 - t0) / count
    for i in range(count):
        t = t0 + i * h
        k1 = drift(t, x)
        k2 = drift(t + h / 2, x + h / 2 * k1)
        k3 = drift(t + h / 2, x + h / 2 * k2)
        k4 = drift(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def _heun(drift, x, t0, t1, step):
    count = max(1, int(math.ceil((t1 - t0) / step - 1e-9)))
    h = (t1 - t0) / count
    for i in range(count):
        t = t0 + i * h
        k1 = drift(t, x)
        k2 = drift(t + h, x + h * k1)
        x = x + h / 2 * (k1 + k2)
    return x


def _initial_points(q0: mixture_lib.GaussianMixture, n: int, seed: int) -> np.ndarray:
    return q0.sample_block(seed, n, rng_lib.phase(rng_lib.DIAGNOSTIC, 2))


# ----- score perturbation ----------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ScorePerturbationRecord:
    t: float
    mean_squared: float
    bound: float
    ratio: float
    halved_step_change: float


def _flow_fields(q0: mixture_lib.GaussianMixture, flow: str):
    """(marginal at time t, flow velocity) for the OU or heat flow."""
    if flow == OU:
        marginal = q0.ou_marginal
        velocity_scale, linear = 1.0, -1.0
    elif flow == HEAT:
        marginal = q0.heat_marginal
        velocity_scale, linear = 0.5, 0.0
    else:
        raise ValueError(f"Unknown flow {flow!r}")

    def velocity(t, y):
        return linear * y - velocity_scale * marginal(t).score(y)

    return marginal, velocity


def _heat_lipschitz(q0: mixture_lib.GaussianMixture, s_grid, seed: int) -> float:
    """Largest Hessian operator norm of log p_s over the grid, at least 1."""
    largest = 0.0
    for i, s in enumerate(s_grid):
        ps = q0.heat_marginal(s)
        points = np.concatenate(
            [
                ps.means,
                ps.sample_block(
                    seed,
                    EnvVarConstants.LIPSCHITZ_POINTS,
                    rng_lib.phase(rng_lib.DIAGNOSTIC, 4 + i),
                ),
            ]
        )
        eigenvalues = np.linalg.eigvalsh(ps.hessian(points))
        largest = max(largest, float(np.max(np.abs(eigenvalues))))
    return max(1.0, largest)


def _score_time_derivative(marginal, velocity, t, y, eta):
    """d/dt grad log q_t(y_t) along the flow: partial in t plus Hessian times motion."""
    partial = (marginal(t + eta).score(y) - marginal(t - eta).score(y)) / (2 * eta)
    transport = np.einsum("nij,nj->ni", marginal(t).hessian(y), velocity(t, y))
    return partial + transport


def score_perturbation_diagnostic(
    q0: mixture_lib.GaussianMixture,
    t_grid: Sequence[float],
    n_particles: int = 1000,
    seed: int = 0,
    relative_fd_step: float = 1e-4,
    ode_step: float = 1e-3,
    flow: str = OU,
    lipschitz: Optional[float] = None,
    max_ratio: float = 10.0,
    max_fd_change: float = 0.01,
) -> Tuple[CheckResult, List[ScorePerturbationRecord]]:
    """Mean squared time derivative of the score along flow trajectories.

    The OU bound is L^2 d max(L, 1/t), the heat flow one L^2 d (L + 1/t). The
    check passes when every ratio to the bound stays below `max_ratio` and
    halving the finite difference step moves each estimate by at most
    `max_fd_change` relative.
    """
    t_grid = sorted(float(t) for t in t_grid)
    if not t_grid or t_grid[0] <= 0:
        raise ValueError("Score perturbation times must be positive")
    marginal, velocity = _flow_fields(q0, flow)
    if lipschitz is None:
        grid = np.union1d(
            np.linspace(0.0, t_grid[-1], EnvVarConstants.LIPSCHITZ_TIMES), t_grid
        )
        if flow == HEAT:
            lipschitz = _heat_lipschitz(q0, grid, seed)
        else:
            lipschitz = mixture_lib.smoothness(q0, grid, seed=seed).lipschitz_L
    d = q0.dimension
    y = _initial_points(q0, n_particles, seed)
    records = []
    previous = 0.0
    for t in t_grid:
        y = _rk4(velocity, y, previous, t, ode_step)
        previous = t
        eta = relative_fd_step * t
        value = float(np.mean(np.sum(_score_time_derivative(marginal, velocity, t, y, eta) ** 2, axis=1)))
        halved = float(
            np.mean(np.sum(_score_time_derivative(marginal, velocity, t, y, eta / 2) ** 2, axis=1))
        )
        change = abs(halved - value) / max(value, 1e-12)
        if flow == OU:
            bound = lipschitz**2 * d * max(lipschitz, 1 / t)
        else:
            bound = lipschitz**2 * d * (lipschitz + 1 / t)
        records.append(ScorePerturbationRecord(t, value, bound, value / bound, change))
    c_emp = max(r.ratio for r in records)
    worst_change = max(r.halved_step_change for r in records)
    result = CheckResult(
        name=f"score_perturbation_{flow}",
        passed=bool(c_emp <= max_ratio and worst_change <= max_fd_change),
        value=c_emp,
        tolerance=max_ratio,
        details=OrderedDict(
            lipschitz=lipschitz,
            max_fd_change=worst_change,
            records=[dataclasses.asdict(r, dict_factory=OrderedDict) for r in records],
        ),
    )
    return result, records


# ----- reparameterization ----------------------------------------------------


def _reparam_deviation(
    oracle: ScoreOracle,
    y0: np.ndarray,
    t_grid: Sequence[float],
    inner_step: float,
) -> np.ndarray:
    """Max over particles of |y_t - e^-t x_{e^2t - 1}| at every grid time.

    The heat flow is integrated in the clock tau with s = e^{2 tau} - 1, where
    dx/dtau = -e^{2 tau} grad log p_s(x); both flows then share one step size.
    """
    q0 = oracle.base

    def ou_velocity(t, y):
        return -y - oracle.eval_forward(t, y)

    def heat_velocity(tau, x):
        return -np.exp(2 * tau) * q0.heat_marginal(np.expm1(2 * tau)).score(x)

    y = x = y0
    previous = 0.0
    deviations = []
    for t in t_grid:
        y = _heun(ou_velocity, y, previous, t, inner_step)
        x = _heun(heat_velocity, x, previous, t, inner_step)
        previous = t
        deviations.append(float(np.max(np.linalg.norm(y - np.exp(-t) * x, axis=1))))
    return np.array(deviations)


def reparam_check(
    oracle: ScoreOracle,
    t_grid: Sequence[float],
    n_particles: int = 100,
    seed: int = 0,
    inner_step: float = 1e-5,
    tolerance: float = 1e-4,
    min_reduction: float = 3.0,
    floor: float = 1e-11,
) -> CheckResult:
    """Check that the OU flow is the time-changed, rescaled heat flow.

    The OU flow uses the scores served by `oracle`, so a corrupted oracle
    fails. The deviation must be below `tolerance` and shrink by at least
    `min_reduction` when the inner step is halved, unless it is already below
    the round-off `floor`.
    """
    t_grid = sorted(float(t) for t in t_grid)
    if not t_grid or t_grid[0] < 0:
        raise ValueError("Reparameterization times must be nonnegative")
    if t_grid[-1] > oracle.horizon_T:
        raise ValueError(f"Times reach {t_grid[-1]} beyond the horizon {oracle.horizon_T}")
    y0 = _initial_points(oracle.base, n_particles, seed)
    coarse = _reparam_deviation(oracle, y0, t_grid, inner_step)
    fine = _reparam_deviation(oracle, y0, t_grid, inner_step / 2)
    worst = float(coarse.max())
    reduction = worst / max(float(fine.max()), 1e-300)
    converged = worst <= floor or reduction >= min_reduction
    return CheckResult(
        name="reparam",
        passed=bool(worst <= tolerance and converged),
        value=worst,
        tolerance=tolerance,
        details=OrderedDict(
            times=list(t_grid),
            deviations=coarse.tolist(),
            halved_step_deviations=fine.tolist(),
            reduction=reduction,
        ),
    )


# ----- forward convergence ---------------------------------------------------


def forward_convergence_check(
    q0: mixture_lib.GaussianMixture,
    T_grid: Sequence[float],
    n: int = 4000,
    seed: int = 0,
    slope_range: Tuple[float, float] = (-1.2, -0.8),
) -> CheckResult:
    """Decay rate of the W2 distance between q_T and the standard Gaussian.

    Samples of q_T are built as e^-T x_0 + sqrt(1 - e^-2T) xi and paired with
    the same xi. The RMS distance of that pairing bounds W2 from above and has
    no Monte Carlo floor; the fitted slope of its log against T must fall in
    `slope_range`. Sliced W2 estimates are reported alongside.
    """
    T_grid = sorted(float(T) for T in T_grid)
    if len(T_grid) < 2 or T_grid[0] <= 0:
        raise ValueError("Forward convergence needs at least two positive times")
    x0 = _initial_points(q0, n, seed)
    xi = rng_lib.gaussian_block(seed, n, rng_lib.phase(rng_lib.DIAGNOSTIC, 3), 0, q0.dimension)
    w2, coupled = [], []
    for T in T_grid:
        y = np.exp(-T) * x0 + np.sqrt(-np.expm1(-2 * T)) * xi
        w2.append(metrics.w2_estimate(y, xi, mode=metrics.SLICED, seed=seed))
        coupled.append(metrics.coupled_deviation(y, xi))
    fit = scipy.stats.linregress(T_grid, np.log(np.maximum(coupled, 1e-300)))
    low, high = slope_range
    return CheckResult(
        name="forward_convergence",
        passed=bool(low <= fit.slope <= high),
        value=float(fit.slope),
        tolerance=high - (low + high) / 2,
        details=OrderedDict(
            times=T_grid,
            w2_estimates=w2,
            coupled_bounds=coupled,
            slope_stderr=float(fit.stderr),
        ),
    )


# ----- correctors ------------------------------------------------------------


def underdamped_moment_check(
    settings: Sequence[Tuple[float, float]] = ((2.0, 0.1), (0.01, 0.001), (10.0, 0.01)),
    inner_steps: int = 10**4,
    tolerance: float = 0.01,
    state: Tuple[float, float, float] = (0.3, -0.2, 0.5),
) -> CheckResult:
    """Closed-form exact-kernel moments against fine-step Euler-Maruyama.

    `state` is the (z, v, g) the step starts from. Each of the five moments
    must agree within `tolerance` relative error.
    """
    z, v, g = (np.array([value]) for value in state)
    worst = 0.0
    rows = []
    for gamma, h in settings:
        exact = underdamped_lib.underdamped_moments(z, v, g, gamma, h)
        oracle = underdamped_lib.euler_maruyama_moments(z, v, g, gamma, h, inner_steps)
        errors = OrderedDict()
        for field in underdamped_lib.KernelMoments._fields:
            a = np.asarray(getattr(exact, field), dtype=np.float64)
            b = np.asarray(getattr(oracle, field), dtype=np.float64)
            errors[field] = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
        worst = max(worst, max(errors.values()))
        rows.append(OrderedDict(gamma=gamma, h=h, relative_errors=errors))
    return CheckResult(
        name="underdamped_moments",
        passed=bool(worst <= tolerance),
        value=worst,
        tolerance=tolerance,
        details=OrderedDict(settings=rows),
    )


def corrector_stationarity_check(
    oracle: ScoreOracle,
    cfg: CorrectorConfig,
    t: float,
    n_particles: int = 4000,
    seed: int = 0,
    sigmas: float = 4.0,
    bias_factor: float = 5.0,
) -> CheckResult:
    """A corrector epoch started at exact q_t samples should leave q_t in place.

    Mean and per-axis variance are compared with the closed form, allowing
    `sigmas` Monte Carlo standard errors plus `bias_factor` h^p for the
    discretization bias, with p = 1/2 overdamped and p = 1 underdamped.
    """
    target = oracle.base.ou_marginal(max(0.0, oracle.horizon_T - t))
    start = Ensemble(
        target.sample_block(seed, n_particles, rng_lib.phase(rng_lib.MIXTURE, 2)),
        reverse_time=t,
        seed=seed,
    )
    try:
        end = correctors.run_corrector(start, cfg, oracle, t, epoch=0)
    except NumericalError as e:
        return CheckResult(
            name="corrector_stationarity",
            passed=False,
            value=math.inf,
            tolerance=1.0,
            details=OrderedDict(kind=cfg.kind, reverse_time=t, error=str(e)),
        )
    mean, variance = metrics.moments(end)
    true_mean, true_variance = target.mean(), target.variance_diag()
    exponent = 1.0 if cfg.kind == "underdamped" else 0.5
    bias = bias_factor * cfg.step**exponent
    mean_error = np.abs(mean - true_mean) / np.sqrt(true_variance)
    variance_error = np.abs(variance / true_variance - 1)
    mean_tolerance = sigmas / math.sqrt(n_particles) + bias
    variance_tolerance = sigmas * math.sqrt(2 / n_particles) + bias
    logging.getLogger("pcflow").debug(
        f"Stationarity: mean error {mean_error.max()}, variance error {variance_error.max()}"
    )
    finite = bool(np.all(np.isfinite(end.particles)))
    passed = (
        finite
        and mean_error.max() <= mean_tolerance
        and variance_error.max() <= variance_tolerance
    )
    return CheckResult(
        name="corrector_stationarity",
        passed=bool(passed),
        value=float(max(mean_error.max() / mean_tolerance, variance_error.max() / variance_tolerance)),
        tolerance=1.0,
        details=OrderedDict(
            kind=cfg.kind,
            reverse_time=t,
            mean_error=mean_error.tolist(),
            variance_error=variance_error.tolist(),
            mean_tolerance=mean_tolerance,
            variance_tolerance=variance_tolerance,
        ),
    )
