"""Predictor-corrector samplers built on the probability flow ODE.

A run starts from the standard Gaussian at reverse time 0, then alternates

  1. N_0 rounds of one predictor epoch followed by one corrector epoch,
  2. a geometric predictor stage over [T - h_pred, T - delta],
  3. a final corrector epoch at T - delta.

`dpom` uses the overdamped corrector, `dpum` the underdamped one.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from collections import OrderedDict
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pcflow import correctors, mixture, predictor, utils
from pcflow.correctors import CorrectorConfig
from pcflow.ensemble import Ensemble
from pcflow.evaluation import metrics
from pcflow.evaluation.report import TV_MARGINALS_NOTE, CheckpointRecord, RunReport
from pcflow.oracle import ScoreOracle
from pcflow.utils import ConfigError, EnvVarConstants

DPOM = "dpom"
DPUM = "dpum"
PREDICTOR_ONLY = "predictor_only"
MODES = (DPOM, DPUM, PREDICTOR_ONLY)

_CORRECTOR_FOR_MODE = {DPOM: "overdamped", DPUM: "underdamped"}

CheckpointCallback = Callable[[Ensemble, CheckpointRecord], Optional[str]]


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Every tunable of a sampler run.

    Optional fields are resolved by `RunPlan.resolve`: a missing Lipschitz
    constant is estimated from the mixture, a missing epoch length is 1/L and a
    missing delta follows `default_delta`.
    """

    mixture: mixture.GaussianMixture
    mode: str = DPOM
    horizon_T: float = 3.0
    h_pred: float = 0.01
    epoch_length: Optional[float] = None
    delta: Optional[float] = None
    epsilon_target: float = 0.1
    lipschitz: Optional[float] = None
    h_corr: float = 0.001
    corrector_time: Optional[float] = None
    c_over: float = 0.5
    c_under: float = 0.5
    friction: Optional[float] = None
    velocity_init_std: float = 1.0
    perturbation: str = "none"
    score_error: float = 0.0
    omega: float = 1.0
    direction: Optional[Tuple[float, ...]] = None
    direction_seed: int = 0
    ensemble_size: int = 1000
    seed: int = 0
    checkpoint_times: Tuple[float, ...] = ()
    dump_ensembles: bool = False
    w2_mode: str = metrics.SLICED
    evaluate: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError("corrector.kind", f"expected one of {MODES}, got {self.mode!r}")
        positive = {
            "predictor.horizon_T": self.horizon_T,
            "predictor.h_pred": self.h_pred,
            "predictor.epsilon_target": self.epsilon_target,
            "corrector.h_corr": self.h_corr,
            "corrector.c_over": self.c_over,
            "corrector.c_under": self.c_under,
        }
        optional_positive = {
            "predictor.epoch_length": self.epoch_length,
            "predictor.delta": self.delta,
            "predictor.lipschitz": self.lipschitz,
            "corrector.friction": self.friction,
        }
        for key, value in list(positive.items()) + list(optional_positive.items()):
            if value is not None and not (math.isfinite(value) and value > 0):
                raise ConfigError(key, f"must be positive, got {value}")
        if self.corrector_time is not None and self.corrector_time < 0:
            raise ConfigError("corrector.total_time", f"must be nonnegative, got {self.corrector_time}")
        if self.velocity_init_std < 0:
            raise ConfigError(
                "corrector.velocity_init_std", f"must be nonnegative, got {self.velocity_init_std}"
            )
        if self.score_error < 0:
            raise ConfigError("oracle.epsilon", f"must be nonnegative, got {self.score_error}")
        if self.ensemble_size < 0:
            raise ConfigError("run.ensemble_size", f"must be nonnegative, got {self.ensemble_size}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("run.seed", f"must be an unsigned 64-bit integer, got {self.seed}")
        if any(t < 0 for t in self.checkpoint_times):
            raise ConfigError("run.checkpoints", "checkpoint times must be nonnegative")
        if self.w2_mode not in (metrics.SLICED, metrics.EXACT):
            raise ConfigError("run.w2_mode", f"unknown W2 mode {self.w2_mode!r}")
        if self.direction is not None and len(self.direction) != self.dimension:
            raise ConfigError(
                "oracle.direction", f"needs {self.dimension} entries, got {len(self.direction)}"
            )

    @property
    def dimension(self) -> int:
        return self.mixture.dimension

    @property
    def corrector_kind(self) -> Optional[str]:
        return _CORRECTOR_FOR_MODE.get(self.mode)

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


def _dyadic_fraction(h_pred: float, target: float) -> float:
    """The largest h_pred / 2^k (k >= 1) not above `target`."""
    k = max(1, math.ceil(math.log2(h_pred / target) - 1e-12))
    return h_pred / 2**k


def default_delta(
    epsilon: float, L: float, d: int, m2: float, h_pred: Optional[float] = None
) -> float:
    """Early stopping time epsilon^2 / (L^2 max(d, m2^2)).

    With `h_pred` it is rounded down to h_pred / 2^k so the geometric stage is
    a pure halving sequence; the rounding loses at most a factor 2.
    """
    if min(epsilon, L, d, m2) <= 0:
        raise ValueError("default_delta needs positive epsilon, L, d and m2")
    delta = epsilon**2 / (L**2 * max(d, m2**2))
    if h_pred is not None:
        delta = _dyadic_fraction(h_pred, delta)
    return delta


@dataclasses.dataclass(frozen=True)
class RunPlan:
    """A RunConfig with every derived quantity pinned down."""

    config: RunConfig
    lipschitz: float
    second_moment: float
    epoch_length: float
    h_pred: float
    steps_per_epoch: int
    n_rounds: int
    horizon_T: float
    delta: float
    corrector: Optional[CorrectorConfig]
    oracle: ScoreOracle

    @classmethod
    def resolve(cls, cfg: RunConfig) -> RunPlan:
        logger = logging.getLogger("pcflow")
        oracle = ScoreOracle.build(
            cfg.mixture,
            cfg.horizon_T,
            kind=cfg.perturbation,
            epsilon=cfg.score_error,
            omega=cfg.omega,
            direction=None if cfg.direction is None else np.asarray(cfg.direction),
            direction_seed=cfg.direction_seed,
            base_lipschitz=cfg.lipschitz,
        )
        L = oracle.effective_lipschitz()
        epoch = cfg.epoch_length if cfg.epoch_length is not None else 1.0 / L

        h_pred, steps_per_epoch = utils.divisor_at_most(epoch, cfg.h_pred)
        if not math.isclose(h_pred, cfg.h_pred, rel_tol=1e-9):
            logger.info(
                f"Adjusted h_pred from {cfg.h_pred} to {h_pred} so it divides the epoch {epoch}"
            )
        n_rounds = max(1, int(round((cfg.horizon_T - h_pred) / epoch)))
        horizon_T = n_rounds * epoch + h_pred
        if not math.isclose(horizon_T, cfg.horizon_T, rel_tol=1e-9):
            logger.info(
                f"Horizon set to T = {n_rounds} * {epoch} + {h_pred} = {horizon_T}"
            )

        m2 = cfg.mixture.second_moment()
        if cfg.delta is None:
            delta = default_delta(cfg.epsilon_target, L, cfg.dimension, m2, h_pred)
            logger.info(f"Early stopping delta = {delta}")
        else:
            delta = cfg.delta
            if delta > h_pred / 2 * (1 + 1e-12):
                raise ConfigError(
                    "predictor.delta", f"must be at most h_pred / 2 = {h_pred / 2}, got {delta}"
                )

        corrector = None
        if cfg.corrector_kind is not None:
            corrector = cls._resolve_corrector(cfg, L)

        return cls(
            config=cfg,
            lipschitz=L,
            second_moment=m2,
            epoch_length=epoch,
            h_pred=h_pred,
            steps_per_epoch=steps_per_epoch,
            n_rounds=n_rounds,
            horizon_T=horizon_T,
            delta=delta,
            corrector=corrector,
            oracle=oracle.with_horizon(horizon_T),
        )

    @staticmethod
    def _resolve_corrector(cfg: RunConfig, L: float) -> CorrectorConfig:
        kind = cfg.corrector_kind
        if cfg.corrector_time is not None:
            total = cfg.corrector_time
        else:
            multiplier = cfg.c_over if kind == "overdamped" else cfg.c_under
            total = correctors.get_corrector(kind).default_total_time(L, multiplier)
        step = cfg.h_corr
        if total > 0:
            step, _ = utils.divisor_at_most(total, cfg.h_corr)
            if not math.isclose(step, cfg.h_corr, rel_tol=1e-9):
                logging.getLogger("pcflow").info(
                    f"Adjusted h_corr from {cfg.h_corr} to {step} so it divides {total}"
                )
        friction = None
        if kind == "underdamped":
            friction = cfg.friction if cfg.friction is not None else math.sqrt(L)
        return CorrectorConfig(
            kind=kind,
            total_time=total,
            step=step,
            friction=friction,
            velocity_init_std=cfg.velocity_init_std,
        )

    @property
    def stage_one_end(self) -> float:
        return self.n_rounds * self.epoch_length

    @property
    def final_time(self) -> float:
        return self.horizon_T - self.delta

    def boundaries(self) -> List[Tuple[float, int, str]]:
        """(reverse time, predictor iteration, stage) after every stage."""
        stages = [(0.0, 0, "init")]
        for n in range(self.n_rounds):
            stages.append(
                ((n + 1) * self.epoch_length, (n + 1) * self.steps_per_epoch, f"epoch-{n}")
            )
        stages.append((self.final_time, self.total_iterations, "final"))
        return stages

    @property
    def total_iterations(self) -> int:
        stage_two = predictor.geometric_schedule(self.h_pred, self.delta)
        return self.n_rounds * self.steps_per_epoch + len(stage_two)

    def checkpoint_indices(self) -> Dict[int, List[float]]:
        """Boundary index -> requested times snapped onto it."""
        boundaries = self.boundaries()
        snapped: Dict[int, List[float]] = OrderedDict()
        for requested in sorted(set(self.config.checkpoint_times)):
            index = next(
                (
                    i
                    for i, (t, _, _) in enumerate(boundaries)
                    if t >= requested - 1e-9 * max(1.0, requested)
                ),
                len(boundaries) - 1,
            )
            snapped.setdefault(index, []).append(requested)
        return snapped

    def serialize(self) -> Dict[str, Any]:
        return OrderedDict(
            mode=self.config.mode,
            lipschitz=self.lipschitz,
            second_moment=self.second_moment,
            epoch_length=self.epoch_length,
            h_pred=self.h_pred,
            steps_per_epoch=self.steps_per_epoch,
            n_rounds=self.n_rounds,
            horizon_T=self.horizon_T,
            delta=self.delta,
            corrector=None
            if self.corrector is None
            else dataclasses.asdict(self.corrector, dict_factory=OrderedDict),
        )


class _Checkpointer:
    """Evaluates and hands out snapshots at requested stage boundaries."""

    def __init__(self, plan: RunPlan, callback: Optional[CheckpointCallback]):
        self.plan = plan
        self.callback = callback
        self.requests = plan.checkpoint_indices()
        self.records: List[CheckpointRecord] = []
        self.started = time.perf_counter()

    def __call__(self, index: int, ensemble: Ensemble, iteration: int, stage: str):
        if index not in self.requests or ensemble.size == 0:
            return
        for requested in self.requests[index]:
            record = evaluate_checkpoint(
                self.plan, ensemble, len(self.records), requested, iteration, stage
            )
            record.runtime = time.perf_counter() - self.started
            if self.callback is not None:
                record.ensemble_file = self.callback(ensemble, record)
            self.records.append(record)


def evaluate_checkpoint(
    plan: RunPlan,
    ensemble: Ensemble,
    index: int,
    requested_time: float,
    iteration: int,
    stage: str,
) -> CheckpointRecord:
    """Summaries of an ensemble against the exact marginal at its time."""
    cfg = plan.config
    t = ensemble.reverse_time
    target = plan.oracle.marginal(min(t, plan.horizon_T))
    if ensemble.size > 1:
        mean, variance = metrics.moments(ensemble)
    else:
        mean, variance = ensemble.particles.mean(axis=0), np.zeros(ensemble.dimension)
    record = CheckpointRecord(
        index=index,
        requested_time=requested_time,
        reverse_time=t,
        iteration=iteration,
        stage=stage,
        n_particles=ensemble.size,
        mean=mean.tolist(),
        variance=variance.tolist(),
        target_mean=target.mean().tolist(),
        target_variance=target.variance_diag().tolist(),
        mode_weights=metrics.mode_weights(ensemble, cfg.mixture).tolist(),
    )
    if not cfg.evaluate:
        return record
    reference = metrics.target_samples(target, ensemble.size, cfg.seed, stream=index)
    mode = cfg.w2_mode
    if mode == metrics.EXACT and ensemble.size > EnvVarConstants.W2_EXACT_MAX:
        mode = metrics.SLICED
    record.w2_estimate = metrics.w2_estimate(ensemble, reference, mode=mode, seed=cfg.seed)
    record.w2_mode = mode
    if ensemble.dimension <= 3:
        record.tv_estimate = metrics.tv_histogram(ensemble, target)
    else:
        record.tv_marginals = metrics.tv_marginals(ensemble, target).tolist()
    return record


def run(
    cfg: RunConfig,
    initial: Optional[Ensemble] = None,
    on_checkpoint: Optional[CheckpointCallback] = None,
    plan: Optional[RunPlan] = None,
) -> Tuple[Ensemble, RunReport]:
    """Run the sampler selected by `cfg.mode`.

    `initial` replaces the standard Gaussian draw; `on_checkpoint` receives
    every snapshot and may return the name of a file it wrote.
    """
    logger = logging.getLogger("pcflow")
    plan = RunPlan.resolve(cfg) if plan is None else plan
    started = time.perf_counter()
    if initial is None:
        ensemble = Ensemble.standard(cfg.ensemble_size, cfg.dimension, cfg.seed)
    else:
        if initial.dimension != cfg.dimension:
            raise ValueError(
                f"Initial ensemble has dimension {initial.dimension}, expected {cfg.dimension}"
            )
        ensemble = initial.replace(initial.particles, reverse_time=0.0)
    checkpoint = _Checkpointer(plan, on_checkpoint)
    oracle = plan.oracle
    logger.info(
        f"Running {cfg.mode} on {ensemble.size} particles in d={cfg.dimension}: "
        f"{plan.n_rounds} rounds of {plan.steps_per_epoch} predictor steps, "
        f"T={plan.horizon_T}, delta={plan.delta}"
    )
    checkpoint(0, ensemble, 0, "init")

    with utils.logging_phase("stage-1"):
        for n in range(plan.n_rounds):
            t0 = n * plan.epoch_length
            schedule = predictor.uniform_schedule(t0, plan.epoch_length, plan.h_pred)
            ensemble = predictor.run_predictor(ensemble, schedule, oracle)
            # Pin the bookkeeping to the exact epoch boundary.
            t = (n + 1) * plan.epoch_length
            ensemble = ensemble.replace(ensemble.particles, reverse_time=t)
            if plan.corrector is not None:
                ensemble = correctors.run_corrector(ensemble, plan.corrector, oracle, t, epoch=n)
            logger.debug(f"Finished round {n + 1}/{plan.n_rounds} at t={t}")
            checkpoint(n + 1, ensemble, (n + 1) * plan.steps_per_epoch, f"epoch-{n}")

    with utils.logging_phase("stage-2"):
        schedule = predictor.geometric_schedule(
            plan.h_pred, plan.delta, start_time=plan.stage_one_end
        )
        ensemble = predictor.run_predictor(ensemble, schedule, oracle)
        ensemble = ensemble.replace(ensemble.particles, reverse_time=plan.final_time)
        if plan.corrector is not None:
            ensemble = correctors.run_corrector(
                ensemble, plan.corrector, oracle, plan.final_time, epoch=plan.n_rounds
            )
        checkpoint(plan.n_rounds + 1, ensemble, plan.total_iterations, "final")

    report = RunReport(
        algorithm=cfg.mode,
        seed=cfg.seed,
        dimension=cfg.dimension,
        plan=plan.serialize(),
        checkpoints=checkpoint.records,
        notes=[TV_MARGINALS_NOTE] if cfg.dimension > 3 else [],
        runtime=time.perf_counter() - started,
    )
    logger.info(f"Finished {cfg.mode} at t={ensemble.reverse_time} in {report.runtime:.2f}s")
    return ensemble, report


def _run_mode(mode: str, cfg: RunConfig, **kwargs) -> Tuple[Ensemble, RunReport]:
    if cfg.mode != mode:
        raise ConfigError("corrector.kind", f"{mode} needs mode {mode!r}, got {cfg.mode!r}")
    return run(cfg, **kwargs)


def dpom(cfg: RunConfig, **kwargs) -> Tuple[Ensemble, RunReport]:
    """Probability flow predictor with overdamped Langevin correctors."""
    return _run_mode(DPOM, cfg, **kwargs)


def dpum(cfg: RunConfig, **kwargs) -> Tuple[Ensemble, RunReport]:
    """Probability flow predictor with underdamped Langevin correctors."""
    return _run_mode(DPUM, cfg, **kwargs)
