"""Tests for the pcflow command line."""

import json
import os

import helpers
import pytest

from pcflow import io
from pcflow.scripts import pcflow_cli
from pcflow.utils import NumericalError

FAST_VERIFY = {
    "checks": ["underdamped_moments", "corrector_stationarity"],
    "moment_settings": [[2.0, 0.1]],
    "moment_inner_steps": 1000,
    "stationarity_particles": 1000,
    "stationarity_time": 0.1,
}


def run_cli(tmp_path, command, data, *extra):
    path = helpers.utils.write_config(str(tmp_path), data)
    out = str(tmp_path / "out")
    return pcflow_cli.main([command, "--config", path, "--out", out, *extra]), out


def test_sample_writes_outputs(tmp_path):
    data = helpers.utils.small_config(run={"dump_ensembles": True})
    code, out = run_cli(tmp_path, "sample", data)
    assert code == pcflow_cli.EXIT_OK
    assert sorted(os.listdir(out)) == [
        "config.json",
        "ensemble_0_t0.csv",
        "ensemble_1_t0.5.csv",
        "ensemble_2_t1.csv",
        "pcflow.log",
        "report.json",
    ]
    with open(os.path.join(out, "report.json")) as f:
        report = json.load(f)
    assert report["algorithm"] == "dpom"
    assert [c["ensemble_file"] for c in report["checkpoints"]] == [
        "ensemble_0_t0.csv",
        "ensemble_1_t0.5.csv",
        "ensemble_2_t1.csv",
    ]
    particles, metadata = io.read_ensemble_csv(os.path.join(out, "ensemble_1_t0.5.csv"))
    assert particles.shape == (200, 2)
    assert metadata["stage"] == "epoch-1"
    assert metadata["requested_time"] == "0.5"
    with open(os.path.join(out, "pcflow.log")) as f:
        assert "pcflow: [" in f.read()


def test_sample_is_byte_identical_across_runs(tmp_path):
    data = helpers.utils.small_config(run={"dump_ensembles": True})
    outputs = []
    for _ in range(2):
        code, out = run_cli(tmp_path, "sample", data)
        assert code == pcflow_cli.EXIT_OK
        contents = {}
        for name in sorted(os.listdir(out)):
            if name != "pcflow.log":
                with open(os.path.join(out, name), "rb") as f:
                    contents[name] = f.read()
        outputs.append(contents)
    assert outputs[0] == outputs[1]


def test_seed_override_changes_the_output(tmp_path):
    data = helpers.utils.small_config(run={"checkpoints": [1.0]})
    _, out = run_cli(tmp_path, "sample", data)
    with open(os.path.join(out, "report.json")) as f:
        first = json.load(f)
    _, out = run_cli(tmp_path, "sample", data, "--seed", "11")
    with open(os.path.join(out, "report.json")) as f:
        second = json.load(f)
    assert second["seed"] == 11
    assert first["checkpoints"][0]["mean"] != second["checkpoints"][0]["mean"]


@pytest.mark.parametrize(
    "data",
    [
        helpers.utils.small_config(run={"colour": "red"}),
        helpers.utils.small_config(predictor={"delta": 0.5}),
    ],
)
def test_config_errors_exit_with_two(tmp_path, data):
    code, _ = run_cli(tmp_path, "sample", data)
    assert code == pcflow_cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    code = pcflow_cli.main(["sample", "--config", str(tmp_path / "missing.json")])
    assert code == pcflow_cli.EXIT_CONFIG


def test_bad_thread_count(tmp_path):
    code, _ = run_cli(tmp_path, "sample", helpers.utils.small_config(), "--threads", "0")
    assert code == pcflow_cli.EXIT_CONFIG


def test_numerical_errors_exit_with_three(tmp_path, monkeypatch):
    def explode(*args, **kwargs):
        raise NumericalError("Non-finite particle", reverse_time=0.5)

    monkeypatch.setattr(pcflow_cli.sampler, "run", explode)
    code, _ = run_cli(tmp_path, "sample", helpers.utils.small_config())
    assert code == pcflow_cli.EXIT_NUMERICAL


def test_config_source_is_required():
    with pytest.raises(SystemExit):
        pcflow_cli.main(["sample"])
    with pytest.raises(SystemExit):
        pcflow_cli.main(["sample", "--preset", "nope"])


def test_config_command_prints_the_resolved_config(capsys):
    assert pcflow_cli.main(["config", "--preset", "theory-dpom"]) == pcflow_cli.EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["corrector"]["kind"] == "overdamped"
    assert data["sweep"]["parameter"] == "h_pred"
    assert data["run"]["output_dir"] == "pcflow-theory-dpom"


def test_sweep_writes_the_table(tmp_path):
    data = helpers.utils.small_config(
        sweep={"parameter": "h_corr", "values": [0.01, 0.005, 0.0025, 0.00125]}
    )
    code, out = run_cli(tmp_path, "sweep", data)
    assert code == pcflow_cli.EXIT_OK
    with open(os.path.join(out, "sweep.csv")) as f:
        lines = f.read().splitlines()
    assert lines[0] == "parameter,error,stderr"
    assert len(lines) == 5
    with open(os.path.join(out, "report.json")) as f:
        report = json.load(f)
    assert report["sweep"]["metric"] == "girsanov_tv"
    assert report["checkpoints"] == []


def test_sweep_needs_a_sweep_section(tmp_path):
    code, _ = run_cli(tmp_path, "sweep", helpers.utils.small_config())
    assert code == pcflow_cli.EXIT_CONFIG


def test_verify_passes(tmp_path):
    code, out = run_cli(tmp_path, "verify", helpers.utils.small_config(verify=FAST_VERIFY))
    assert code == pcflow_cli.EXIT_OK
    with open(os.path.join(out, "verify.json")) as f:
        summary = json.load(f)
    assert summary["passed"] is True
    assert [c["name"] for c in summary["checks"]] == [
        "underdamped_moments",
        "corrector_stationarity",
    ]


def test_verify_failure_exits_with_four(tmp_path):
    data = helpers.utils.small_config(
        oracle={"perturbation": "sign_flip"},
        verify={"checks": ["corrector_stationarity"], "stationarity_time": 1.0},
    )
    code, out = run_cli(tmp_path, "verify", data)
    assert code == pcflow_cli.EXIT_VERIFY_FAILED
    with open(os.path.join(out, "verify.json")) as f:
        assert json.load(f)["passed"] is False
