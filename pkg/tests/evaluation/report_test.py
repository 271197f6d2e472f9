"""Tests for evaluation/report.py"""

import json
import math

import numpy as np
import pytest

from pcflow.evaluation import report


def make_checkpoint(**changes):
    values = dict(
        index=0,
        requested_time=0.5,
        reverse_time=0.5,
        iteration=10,
        stage="epoch-1",
        n_particles=4,
        mean=[0.0],
        variance=[1.0],
        target_mean=[0.0],
        target_variance=[1.0],
        mode_weights=[1.0],
    )
    values.update(changes)
    return report.CheckpointRecord(**values)


def make_sweep(n=4):
    records = [
        report.SweepRecord("h_pred", 0.01 * 2**-i, 0.01 * 2**-i, 0.1 * 2**-i, 0.001)
        for i in range(n)
    ]
    return report.SweepSummary("h_pred", "coupled", records, slope=1.0, slope_stderr=0.0)


@pytest.mark.parametrize(
    "changes",
    [dict(w2_estimate=-1.0), dict(tv_estimate=1.5), dict(tv_marginals=[0.2, -0.1])],
)
def test_checkpoint_validation(changes):
    with pytest.raises(ValueError):
        make_checkpoint(**changes)


def test_sweep_needs_four_points():
    with pytest.raises(ValueError):
        make_sweep(3)


def test_sweep_error_is_nonnegative():
    with pytest.raises(ValueError):
        report.SweepRecord("h_pred", 0.01, 0.01, -0.1, 0.0)


def test_sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    make_sweep().write_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "parameter,error,stderr"
    assert len(lines) == 5
    assert [float(v) for v in lines[1].split(",")] == [0.01, 0.1, 0.001]


def test_runtime_is_left_out_by_default():
    run = report.RunReport(
        "dpom", 0, 1, {"mode": "dpom"}, checkpoints=[make_checkpoint(runtime=1.5)], runtime=3.0
    )
    data = json.loads(run.dumps())
    assert "runtime" not in data
    assert "runtime" not in data["checkpoints"][0]
    assert "sweep" not in data
    timed = json.loads(run.dumps(include_runtime=True))
    assert timed["runtime"] == 3.0
    assert timed["checkpoints"][0]["runtime"] == 1.5


def test_report_keeps_key_order():
    run = report.RunReport("dpum", 7, 2, {}, sweep=make_sweep())
    data = json.loads(run.dumps())
    assert list(data) == ["algorithm", "seed", "dimension", "plan", "checkpoints", "sweep", "notes"]
    assert data["sweep"]["records"][0]["parameter"] == "h_pred"


def test_encoder_handles_numpy():
    text = json.dumps({"a": np.arange(3), "b": np.float64(0.5)}, cls=report.ReportEncoder)
    assert json.loads(text) == {"a": [0, 1, 2], "b": 0.5}


def test_nan_sweep_values_are_written_as_nan(tmp_path):
    summary = make_sweep()
    summary.records[0].stderr = math.nan
    path = tmp_path / "sweep.csv"
    summary.write_csv(str(path))
    assert path.read_text().splitlines()[1].endswith(",nan")
