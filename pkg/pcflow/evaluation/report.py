"""Run reports and sweep tables."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from collections import OrderedDict
from typing import Any, Dict, List, Optional, TextIO

import numpy as np
from file_or_name import file_or_name

TV_MARGINALS_NOTE = "tv_marginals are per-axis histogram TVs, lower bounds on joint TV"


@dataclasses.dataclass(eq=True)
class ReportField:
    def serialize(self) -> Dict[str, Any]:
        return dataclasses.asdict(self, dict_factory=OrderedDict)


def _check_distance(name: str, value: Optional[float]):
    if value is not None and not value >= 0:
        raise ValueError(f"{name} must be a nonnegative distance, got {value}")


@dataclasses.dataclass(eq=True)
class CheckpointRecord(ReportField):
    index: int
    requested_time: float
    reverse_time: float
    iteration: int
    stage: str
    n_particles: int
    mean: List[float]
    variance: List[float]
    target_mean: List[float]
    target_variance: List[float]
    mode_weights: List[float]
    w2_estimate: Optional[float] = None
    w2_mode: Optional[str] = None
    tv_estimate: Optional[float] = None
    tv_marginals: Optional[List[float]] = None
    ensemble_file: Optional[str] = None
    runtime: Optional[float] = None

    def __post_init__(self):
        _check_distance("w2_estimate", self.w2_estimate)
        if self.tv_estimate is not None and not 0 <= self.tv_estimate <= 1:
            raise ValueError(f"TV estimate must be in [0, 1], got {self.tv_estimate}")
        for value in self.tv_marginals or ():
            if not 0 <= value <= 1:
                raise ValueError(f"Marginal TV must be in [0, 1], got {value}")


@dataclasses.dataclass(eq=True)
class SweepRecord(ReportField):
    parameter: str
    value: float
    requested_value: float
    error: float
    stderr: float

    def __post_init__(self):
        _check_distance("error", self.error)


@dataclasses.dataclass(eq=True)
class SweepSummary(ReportField):
    parameter: str
    metric: str
    records: List[SweepRecord]
    slope: float
    slope_stderr: float

    def __post_init__(self):
        if len(self.records) < 4:
            raise ValueError(f"Slope records need at least 4 sweep points, got {len(self.records)}")

    @file_or_name(file="w")
    def write_csv(self, file: TextIO):
        """parameter,error,stderr with one row per swept value."""
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["parameter", "error", "stderr"])
        for record in self.records:
            writer.writerow([_number(record.value), _number(record.error), _number(record.stderr)])


def _number(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.17g}"


@dataclasses.dataclass(eq=True)
class RunReport(ReportField):
    algorithm: str
    seed: int
    dimension: int
    plan: Dict[str, Any]
    checkpoints: List[CheckpointRecord] = dataclasses.field(default_factory=list)
    sweep: Optional[SweepSummary] = None
    notes: List[str] = dataclasses.field(default_factory=list)
    runtime: Optional[float] = None

    def serialize(self, include_runtime: bool = False) -> Dict[str, Any]:
        report = super().serialize()
        if not include_runtime:
            report.pop("runtime")
            for checkpoint in report["checkpoints"]:
                checkpoint.pop("runtime")
        if report["sweep"] is None:
            report.pop("sweep")
        return report

    def dumps(self, include_runtime: bool = False) -> str:
        return (
            json.dumps(self.serialize(include_runtime), indent=4, cls=ReportEncoder)
            + "\n"
        )

    @file_or_name(file="w")
    def write(self, file: TextIO, include_runtime: bool = False):
        file.write(self.dumps(include_runtime))


class ReportEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.generic):
            return obj.item()
        return json.JSONEncoder.default(self, obj)
