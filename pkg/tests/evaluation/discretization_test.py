"""Tests for evaluation/discretization.py"""

import pytest

from pcflow.correctors import CorrectorConfig
from pcflow.evaluation import discretization
from pcflow.oracle import ScoreOracle


@pytest.fixture
def oracle(bimodal):
    return ScoreOracle.build(bimodal, 1.0)


@pytest.mark.parametrize(
    "coarse,fine",
    [
        (
            CorrectorConfig("overdamped", total_time=0.08, step=0.02),
            CorrectorConfig("overdamped", total_time=0.08, step=0.005),
        ),
        (
            CorrectorConfig("underdamped", total_time=0.08, step=0.02, friction=1.0),
            CorrectorConfig("underdamped", total_time=0.08, step=0.005, friction=1.0),
        ),
    ],
)
def test_girsanov_tv_shrinks_with_the_step(oracle, coarse, fine):
    large = discretization.girsanov_tv(oracle, coarse, 0.5, 500, seed=1)
    small = discretization.girsanov_tv(oracle, fine, 0.5, 500, seed=1)
    assert 0 < small.kl < large.kl
    assert 0 < small.tv_bound < large.tv_bound <= 1
    assert large.kl_stderr > 0 and large.tv_stderr > 0


def test_girsanov_tv_is_reproducible(oracle):
    cfg = CorrectorConfig("overdamped", total_time=0.04, step=0.02)
    assert discretization.girsanov_tv(oracle, cfg, 0.5, 50, seed=3) == discretization.girsanov_tv(
        oracle, cfg, 0.5, 50, seed=3
    )


def test_girsanov_tv_arguments(oracle):
    cfg = CorrectorConfig("overdamped", total_time=0.04, step=0.02)
    with pytest.raises(ValueError):
        discretization.girsanov_tv(oracle, cfg, 0.5, 50, substeps=1)
    with pytest.raises(ValueError):
        discretization.girsanov_tv(oracle, cfg, 0.5, 1)
