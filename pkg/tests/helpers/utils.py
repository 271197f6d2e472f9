"""Helper utilities for unittests."""

import json
import os

from pcflow import mixture, sampler


def write_config(directory, data, name="config.json"):
    """Write a JSON config dict into `directory` and return its path."""
    path = os.path.join(directory, name)
    with open(path, "w") as f:
        json.dump(data, f, indent=4)
    return path


def small_config(**sections):
    """A quick two dimensional run config as a dict, sections overridable."""
    data = {
        "mixture": {
            "components": [
                {"weight": 0.5, "mean": [1.5, 0.0], "variance": 0.5},
                {"weight": 0.5, "mean": [-1.5, 0.5], "variance": 0.5},
            ]
        },
        "oracle": {"lipschitz": 2.0},
        "predictor": {"horizon_T": 1.05, "h_pred": 0.05, "epoch_length": 0.25, "delta": 0.0125},
        "corrector": {"kind": "overdamped", "h_corr": 0.01, "total_time": 0.05},
        "run": {"ensemble_size": 200, "seed": 3, "checkpoints": [0.0, 0.5, 1.0]},
    }
    for section, values in sections.items():
        data.setdefault(section, {}).update(values)
    return data


def quick_run_config(target: mixture.GaussianMixture, **changes) -> sampler.RunConfig:
    """Coarse settings so a full run takes well under a second."""
    settings = dict(
        mixture=target,
        horizon_T=1.05,
        h_pred=0.05,
        epoch_length=0.25,
        delta=0.0125,
        lipschitz=2.0,
        h_corr=0.01,
        corrector_time=0.05,
        ensemble_size=200,
        seed=3,
    )
    settings.update(changes)
    return sampler.RunConfig(**settings)
