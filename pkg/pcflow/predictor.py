"""The discretized probability flow ODE and its step-size schedules.

In reverse time the probability flow ODE reads dx/dt = x + grad log q_t(x).
The exponential integrator integrates the linear part exactly and freezes the
score at the left endpoint of each step:

    x_{t+h} = e^h x_t + (e^h - 1) s_t(x_t).
"""

import dataclasses
import logging
from typing import Callable, Tuple, Union

import numpy as np

from pcflow import utils
from pcflow.ensemble import Ensemble
from pcflow.numerics import check_finite
from pcflow.oracle import ScoreOracle

UNIFORM = "uniform"
GEOMETRIC = "geometric"


@dataclasses.dataclass(frozen=True)
class Schedule:
    steps: Tuple[float, ...]
    start_time: float = 0.0
    kind: str = UNIFORM

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(float(h) for h in self.steps))
        if any(h <= 0 for h in self.steps):
            raise ValueError(f"Schedule steps must be positive, got {self.steps}")
        if self.kind not in (UNIFORM, GEOMETRIC):
            raise ValueError(f"Unknown schedule kind {self.kind!r}")

    def __len__(self):
        return len(self.steps)

    @property
    def total(self) -> float:
        return float(sum(self.steps))

    @property
    def end_time(self) -> float:
        return self.start_time + self.total

    def times(self) -> np.ndarray:
        """Left endpoints of every step."""
        return self.start_time + np.concatenate([[0.0], np.cumsum(self.steps)[:-1]])


def predictor_step(x: np.ndarray, t: float, h: float, oracle: ScoreOracle) -> np.ndarray:
    """One exponential-integrator step from reverse time t to t + h."""
    if h < 0:
        raise ValueError(f"Predictor step must be nonnegative, got {h}")
    if t + h > oracle.horizon_T * (1 + 1e-12):
        raise ValueError(f"Step to {t + h} passes the horizon {oracle.horizon_T}")
    x = np.asarray(x, dtype=np.float64)
    if h == 0:
        return x.copy()
    growth = np.expm1(h)
    return check_finite(
        x + growth * x + growth * oracle.eval(t, x),
        "Non-finite predictor output",
        reverse_time=t,
        step_size=h,
    )


def uniform_schedule(t0: float, epoch_length: float, h_pred: float) -> Schedule:
    """Equal steps of size h_pred covering one predictor epoch."""
    if h_pred <= 0 or epoch_length <= 0:
        raise ValueError("Epoch length and step size must be positive")
    if not utils.is_multiple(epoch_length, h_pred):
        raise ValueError(
            f"Epoch length {epoch_length} is not a multiple of the step {h_pred}"
        )
    count = int(round(epoch_length / h_pred))
    return Schedule((epoch_length / count,) * count, start_time=t0, kind=UNIFORM)


def geometric_schedule(h_pred: float, delta: float, start_time: float = 0.0) -> Schedule:
    """Halving steps over the last h_pred of the horizon, stopping delta short.

    With gap the distance left to the horizon, each step is gap / 2, raised to
    delta if smaller, and cut so the run never passes horizon - delta. Every
    step therefore satisfies h <= gap / 2 and the steps sum to h_pred - delta.
    """
    if not 0 < delta <= h_pred / 2 * (1 + 1e-12):
        raise ValueError(f"Need 0 < delta <= h_pred / 2, got delta={delta}, h_pred={h_pred}")
    steps = []
    gap = h_pred
    while gap - delta > 1e-12 * h_pred:
        step = min(max(gap / 2, delta), gap - delta)
        steps.append(step)
        gap -= step
    return Schedule(tuple(steps), start_time=start_time, kind=GEOMETRIC)


def run_predictor(
    x: Union[np.ndarray, Ensemble], schedule: Schedule, oracle: ScoreOracle
) -> Union[np.ndarray, Ensemble]:
    """Fold predictor steps over a schedule."""
    if isinstance(x, Ensemble):
        if x.size == 0:
            return x.replace(x.particles, reverse_time=schedule.end_time)
        particles = run_predictor(x.particles, schedule, oracle)
        return x.replace(particles, reverse_time=schedule.end_time)
    logger = logging.getLogger("pcflow")
    logger.debug(
        f"Running {len(schedule)} {schedule.kind} predictor steps from t={schedule.start_time}"
    )
    x = np.asarray(x, dtype=np.float64)
    for t, h in zip(schedule.times(), schedule.steps):
        x = predictor_step(x, float(t), h, oracle)
    return x


def reference_flow(
    x: np.ndarray,
    t0: float,
    t1: float,
    score_fn: Callable[[float, np.ndarray], np.ndarray],
    step: float,
) -> np.ndarray:
    """Classical fourth-order Runge-Kutta on dx/dt = x + score(t, x)."""
    count = max(1, int(np.ceil((t1 - t0) / step - 1e-9)))
    h = (t1 - t0) / count

    def drift(t, y):
        return y + score_fn(t, y)

    x = np.asarray(x, dtype=np.float64)
    t = t0
    for _ in range(count):
        k1 = drift(t, x)
        k2 = drift(t + h / 2, x + h / 2 * k1)
        k3 = drift(t + h / 2, x + h / 2 * k2)
        k4 = drift(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (_ + 1) * h
    return x
