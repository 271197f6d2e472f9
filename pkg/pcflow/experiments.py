"""Parameter sweeps with slope fits, and the verification suite."""

import dataclasses
import logging
from collections import OrderedDict
from typing import List, Optional, Tuple

import numpy as np

from pcflow import sampler, utils
from pcflow.correctors import CorrectorConfig
from pcflow.evaluation import diagnostics, discretization, metrics, regression
from pcflow.evaluation.report import SweepRecord, SweepSummary
from pcflow.sampler import RunConfig, RunPlan
from pcflow.utils import ConfigError

COUPLED = "coupled"
W2 = "w2"
GIRSANOV_TV = "girsanov_tv"

# Swept parameter -> (RunConfig field, default error metric).
SWEEP_PARAMETERS = OrderedDict(
    h_pred=("h_pred", COUPLED),
    h_corr=("h_corr", GIRSANOV_TV),
    score_error=("score_error", COUPLED),
)


@dataclasses.dataclass(frozen=True)
class SweepConfig:
    parameter: str
    values: Tuple[float, ...]
    metric: Optional[str] = None
    reference_factor: int = 4

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(
                "sweep.parameter",
                f"expected one of {list(SWEEP_PARAMETERS)}, got {self.parameter!r}",
            )
        if len(self.values) < regression.MIN_POINTS:
            raise ConfigError(
                "sweep.values",
                f"need at least {regression.MIN_POINTS} values, got {len(self.values)}",
            )
        if any(not v > 0 for v in self.values):
            raise ConfigError("sweep.values", "swept values must be positive")
        if self.metric not in (None, COUPLED, W2, GIRSANOV_TV):
            raise ConfigError("sweep.metric", f"unknown metric {self.metric!r}")
        if self.resolved_metric == GIRSANOV_TV and self.parameter != "h_corr":
            raise ConfigError("sweep.metric", "girsanov_tv only applies to h_corr sweeps")
        if self.parameter == "h_corr" and self.resolved_metric != GIRSANOV_TV:
            # Runs at different h_corr draw unrelated corrector noise.
            raise ConfigError("sweep.metric", "h_corr sweeps only support girsanov_tv")
        if self.reference_factor < 2:
            raise ConfigError(
                "sweep.reference_factor", f"must be at least 2, got {self.reference_factor}"
            )

    @property
    def resolved_metric(self) -> str:
        return self.metric or SWEEP_PARAMETERS[self.parameter][1]

    @property
    def field(self) -> str:
        return SWEEP_PARAMETERS[self.parameter][0]

    def reference_value(self) -> float:
        if self.parameter == "score_error":
            return 0.0
        return min(self.values) / self.reference_factor


def _pinned(cfg: RunConfig, sweep: SweepConfig) -> RunConfig:
    """Fix L, the epoch length and delta so only the swept value moves."""
    plan = RunPlan.resolve(cfg)
    pinned = cfg.replace(
        lipschitz=plan.oracle.base_lipschitz,
        epoch_length=plan.epoch_length,
        checkpoint_times=(),
        evaluate=False,
    )
    if cfg.delta is None:
        smallest_h = plan.h_pred
        if sweep.parameter == "h_pred":
            smallest_h = min(min(sweep.values), sweep.reference_value())
        delta = sampler.default_delta(
            cfg.epsilon_target, plan.lipschitz, cfg.dimension, plan.second_moment, smallest_h
        )
        pinned = pinned.replace(delta=delta)
        logging.getLogger("pcflow").info(f"Pinned delta = {delta} across the sweep")
    return pinned


def _resolved_value(plan: RunPlan, sweep: SweepConfig) -> float:
    if sweep.parameter == "h_pred":
        return plan.h_pred
    if sweep.parameter == "h_corr":
        return plan.corrector.step
    return plan.config.score_error


def _coupled_error(final, reference) -> Tuple[float, float]:
    squared = np.sum((final.particles - reference.particles) ** 2, axis=1)
    rms = float(np.sqrt(np.mean(squared)))
    if rms == 0 or squared.shape[0] < 2:
        return rms, 0.0
    return rms, float(np.std(squared, ddof=1) / np.sqrt(squared.shape[0]) / (2 * rms))


def run_sweep(cfg: RunConfig, sweep: SweepConfig) -> SweepSummary:
    """Run the sampler once per swept value and fit the log-log error slope."""
    logger = logging.getLogger("pcflow")
    if cfg.ensemble_size < 2:
        raise ConfigError("run.ensemble_size", "sweeps need at least two particles")
    if sweep.parameter == "h_corr" and cfg.corrector_kind is None:
        raise ConfigError("sweep.parameter", "h_corr sweeps need a corrector")
    metric = sweep.resolved_metric
    base = _pinned(cfg, sweep)

    reference = target = None
    if metric == COUPLED:
        reference_cfg = base.replace(**{sweep.field: sweep.reference_value()})
        reference, _ = sampler.run(reference_cfg)
        logger.info(f"Reference run at {sweep.parameter}={sweep.reference_value()}")
    elif metric == W2:
        plan = RunPlan.resolve(base)
        target = metrics.target_samples(
            plan.oracle.marginal(plan.final_time), cfg.ensemble_size, cfg.seed, stream=2**16
        )

    records: List[SweepRecord] = []
    for value in sweep.values:
        run_cfg = base.replace(**{sweep.field: value})
        plan = RunPlan.resolve(run_cfg)
        if metric == GIRSANOV_TV:
            estimate = discretization.girsanov_tv(
                plan.oracle,
                plan.corrector,
                plan.final_time,
                cfg.ensemble_size,
                seed=cfg.seed,
            )
            error, stderr = estimate.tv_bound, estimate.tv_stderr
        else:
            final, _ = sampler.run(run_cfg, plan=plan)
            if metric == COUPLED:
                error, stderr = _coupled_error(final, reference)
            else:
                error, stderr = metrics.sliced_w2_with_stderr(final, target, seed=cfg.seed)
        logger.info(f"{sweep.parameter}={value}: {metric} error {error} +/- {stderr}")
        records.append(
            SweepRecord(
                parameter=sweep.parameter,
                value=_resolved_value(plan, sweep),
                requested_value=float(value),
                error=error,
                stderr=stderr,
            )
        )

    fit = regression.slope_regression([(r.value, r.error) for r in records])
    logger.info(f"Fitted slope {fit.slope} +/- {fit.stderr} for {sweep.parameter}")
    return SweepSummary(
        parameter=sweep.parameter,
        metric=metric,
        records=records,
        slope=fit.slope,
        slope_stderr=fit.stderr,
    )


# ----- verification suite ----------------------------------------------------

REPARAM = "reparam"
SCORE_PERTURBATION = "score_perturbation"
FORWARD_CONVERGENCE = "forward_convergence"
UNDERDAMPED_MOMENTS = "underdamped_moments"
STATIONARITY = "corrector_stationarity"
CHECKS = (REPARAM, SCORE_PERTURBATION, FORWARD_CONVERGENCE, UNDERDAMPED_MOMENTS, STATIONARITY)


@dataclasses.dataclass(frozen=True)
class VerifyConfig:
    checks: Tuple[str, ...] = CHECKS
    particles: int = 1000
    reparam_times: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    reparam_particles: int = 100
    reparam_step: float = 1e-5
    perturbation_times: Tuple[float, ...] = (0.05, 0.1, 0.5, 1.0, 2.0)
    heat_flow: bool = True
    forward_times: Tuple[float, ...] = (1.0, 2.0, 3.0, 4.0)
    forward_particles: int = 4000
    moment_settings: Tuple[Tuple[float, float], ...] = ((2.0, 0.1), (0.01, 0.001), (10.0, 0.01))
    moment_inner_steps: int = 10**4
    stationarity_particles: int = 4000
    stationarity_time: float = 1.0

    def __post_init__(self):
        unknown = set(self.checks) - set(CHECKS)
        if unknown:
            raise ConfigError("verify.checks", f"unknown checks {sorted(unknown)}")
        for key in ("particles", "reparam_particles", "forward_particles", "stationarity_particles"):
            if getattr(self, key) < 2:
                raise ConfigError(f"verify.{key}", "need at least two particles")
        for key in ("reparam_step", "stationarity_time"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"verify.{key}", "must be positive")
        if self.moment_inner_steps < 1:
            raise ConfigError("verify.moment_inner_steps", "must be positive")
        if any(len(pair) != 2 or min(pair) <= 0 for pair in self.moment_settings):
            raise ConfigError("verify.moment_settings", "expected positive [gamma, h] pairs")


def _stationarity_corrector(cfg: RunConfig, plan: RunPlan, verify: VerifyConfig) -> CorrectorConfig:
    """The configured corrector run long enough for a corrupted score to show."""
    kind = cfg.corrector_kind or "overdamped"
    step = plan.corrector.step if plan.corrector is not None else cfg.h_corr
    step, _ = utils.divisor_at_most(verify.stationarity_time, step)
    friction = None
    if kind == "underdamped":
        friction = plan.corrector.friction
    return CorrectorConfig(
        kind=kind,
        total_time=verify.stationarity_time,
        step=step,
        friction=friction,
        velocity_init_std=1.0,
    )


def run_verify(cfg: RunConfig, verify: VerifyConfig) -> List[diagnostics.CheckResult]:
    """Run every configured diagnostic; the caller decides on the exit code."""
    logger = logging.getLogger("pcflow")
    plan = RunPlan.resolve(cfg)
    results = []
    for check in verify.checks:
        logger.info(f"Running check {check}")
        if check == REPARAM:
            times = [t for t in verify.reparam_times if t <= plan.horizon_T]
            results.append(
                diagnostics.reparam_check(
                    plan.oracle,
                    times,
                    verify.reparam_particles,
                    seed=cfg.seed,
                    inner_step=verify.reparam_step,
                )
            )
        elif check == SCORE_PERTURBATION:
            flows = [diagnostics.OU] + ([diagnostics.HEAT] if verify.heat_flow else [])
            for flow in flows:
                result, _ = diagnostics.score_perturbation_diagnostic(
                    cfg.mixture,
                    verify.perturbation_times,
                    verify.particles,
                    seed=cfg.seed,
                    flow=flow,
                )
                results.append(result)
        elif check == FORWARD_CONVERGENCE:
            results.append(
                diagnostics.forward_convergence_check(
                    cfg.mixture, verify.forward_times, verify.forward_particles, seed=cfg.seed
                )
            )
        elif check == UNDERDAMPED_MOMENTS:
            results.append(
                diagnostics.underdamped_moment_check(
                    verify.moment_settings, inner_steps=verify.moment_inner_steps
                )
            )
        elif check == STATIONARITY:
            results.append(
                diagnostics.corrector_stationarity_check(
                    plan.oracle,
                    _stationarity_corrector(cfg, plan, verify),
                    plan.final_time,
                    verify.stationarity_particles,
                    seed=cfg.seed,
                )
            )
        status = "passed" if results[-1].passed else "FAILED"
        logger.info(f"Check {results[-1].name} {status} (value {results[-1].value})")
    return results
