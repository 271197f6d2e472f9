"""JSON run configurations, their canonical form, and bundled presets."""

from __future__ import annotations

import dataclasses
import json
import logging
import sys
from collections import OrderedDict
from typing import Any, Dict, Optional, TextIO, Tuple

from file_or_name import file_or_name

if sys.version_info < (3, 9):
    import importlib_resources
else:
    import importlib.resources as importlib_resources

from pcflow import experiments, mixture, sampler
from pcflow.utils import ConfigError

# Config "corrector.kind" -> sampler mode.
KIND_TO_MODE = OrderedDict(
    overdamped=sampler.DPOM, underdamped=sampler.DPUM, none=sampler.PREDICTOR_ONLY
)
MODE_TO_KIND = OrderedDict((mode, kind) for kind, mode in KIND_TO_MODE.items())

# Value kinds understood by `_coerce`.
FLOAT, OPT_FLOAT, INT, BOOL, STR, OPT_STR, FLOATS, OPT_FLOATS, STRS, PAIRS = (
    "float",
    "float?",
    "int",
    "bool",
    "str",
    "str?",
    "floats",
    "floats?",
    "strs",
    "pairs",
)

# section -> key -> (RunConfig field, value kind).
RUN_KEYS = OrderedDict(
    oracle=OrderedDict(
        perturbation=("perturbation", STR),
        epsilon=("score_error", FLOAT),
        omega=("omega", FLOAT),
        direction=("direction", OPT_FLOATS),
        direction_seed=("direction_seed", INT),
        lipschitz=("lipschitz", OPT_FLOAT),
    ),
    predictor=OrderedDict(
        horizon_T=("horizon_T", FLOAT),
        h_pred=("h_pred", FLOAT),
        epoch_length=("epoch_length", OPT_FLOAT),
        delta=("delta", OPT_FLOAT),
        epsilon=("epsilon_target", FLOAT),
    ),
    corrector=OrderedDict(
        kind=("mode", STR),
        h_corr=("h_corr", FLOAT),
        total_time=("corrector_time", OPT_FLOAT),
        c_over=("c_over", FLOAT),
        c_under=("c_under", FLOAT),
        friction=("friction", OPT_FLOAT),
        velocity_init_std=("velocity_init_std", FLOAT),
    ),
    run=OrderedDict(
        ensemble_size=("ensemble_size", INT),
        seed=("seed", INT),
        checkpoints=("checkpoint_times", FLOATS),
        dump_ensembles=("dump_ensembles", BOOL),
        w2_mode=("w2_mode", STR),
        evaluate=("evaluate", BOOL),
    ),
)
# Run keys that configure the command rather than the sampler.
RUN_EXTRA_KEYS = OrderedDict(
    output_dir=("pcflow-out", STR),
    record_runtime=(False, BOOL),
)
MIXTURE_KEYS = ("components", "standard_dimension")
SWEEP_KEYS = OrderedDict(
    parameter=("parameter", OPT_STR),
    values=("values", FLOATS),
    metric=("metric", OPT_STR),
    reference_factor=("reference_factor", INT),
)
VERIFY_KINDS = OrderedDict(
    checks=STRS,
    particles=INT,
    reparam_times=FLOATS,
    reparam_particles=INT,
    reparam_step=FLOAT,
    perturbation_times=FLOATS,
    heat_flow=BOOL,
    forward_times=FLOATS,
    forward_particles=INT,
    moment_settings=PAIRS,
    moment_inner_steps=INT,
    stationarity_particles=INT,
    stationarity_time=FLOAT,
)
SECTIONS = ("mixture", "oracle", "predictor", "corrector", "run", "sweep", "verify")


def _defaults(cls) -> Dict[str, Any]:
    return {
        f.name: f.default
        for f in dataclasses.fields(cls)
        if f.default is not dataclasses.MISSING
    }


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _coerce(key: str, value: Any, kind: str) -> Any:
    """Check a JSON value against its kind and normalize it."""
    if value is None and kind.endswith("?"):
        return None
    kind = kind.rstrip("?")
    if kind == FLOAT and _is_number(value):
        return float(value)
    if kind == INT and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind == BOOL and isinstance(value, bool):
        return value
    if kind == STR and isinstance(value, str):
        return value
    if kind == FLOATS and isinstance(value, list) and all(map(_is_number, value)):
        return tuple(float(v) for v in value)
    if kind == STRS and isinstance(value, list) and all(isinstance(v, str) for v in value):
        return tuple(value)
    if kind == PAIRS and isinstance(value, list):
        if all(isinstance(p, list) and len(p) == 2 and all(map(_is_number, p)) for p in value):
            return tuple((float(a), float(b)) for a, b in value)
    raise ConfigError(key, f"expected a value of kind {kind}, got {value!r}")


def _to_json(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_to_json(v) for v in value]
    return value


def _check_keys(section: str, given: Dict[str, Any], allowed):
    if not isinstance(given, dict):
        raise ConfigError(section or "config", f"expected an object, got {given!r}")
    for key in given:
        if key not in allowed:
            raise ConfigError(f"{section}.{key}" if section else key, "unknown key")


def _load_mixture(section: Dict[str, Any]) -> mixture.GaussianMixture:
    _check_keys("mixture", section, MIXTURE_KEYS)
    given = [key for key in MIXTURE_KEYS if section.get(key) is not None]
    if len(given) != 1:
        raise ConfigError("mixture", "give exactly one of components or standard_dimension")
    if given[0] == "standard_dimension":
        d = _coerce("mixture.standard_dimension", section["standard_dimension"], INT)
        if d < 1:
            raise ConfigError("mixture.standard_dimension", f"must be at least 1, got {d}")
        return mixture.GaussianMixture.standard(d)
    components = section["components"]
    if not isinstance(components, list) or not components:
        raise ConfigError("mixture.components", "expected a nonempty list of components")
    for i, component in enumerate(components):
        _check_keys(f"mixture.components.{i}", component, ("weight", "mean", "variance"))
        for key in ("weight", "mean", "variance"):
            if key not in component:
                raise ConfigError(f"mixture.components.{i}.{key}", "missing")
    try:
        return mixture.GaussianMixture.from_components(components)
    except (ValueError, TypeError) as e:
        raise ConfigError("mixture.components", str(e)) from e


@dataclasses.dataclass(frozen=True)
class ConfigFile:
    """A validated configuration with every default filled in."""

    run: sampler.RunConfig
    output_dir: str = "pcflow-out"
    record_runtime: bool = False
    sweep: Optional[experiments.SweepConfig] = None
    verify: experiments.VerifyConfig = dataclasses.field(
        default_factory=experiments.VerifyConfig
    )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> ConfigFile:
        _check_keys("", data, SECTIONS)
        if "mixture" not in data:
            raise ConfigError("mixture", "missing")
        fields: Dict[str, Any] = {"mixture": _load_mixture(data["mixture"])}
        for section, keys in RUN_KEYS.items():
            given = data.get(section, {})
            allowed = list(keys) + (list(RUN_EXTRA_KEYS) if section == "run" else [])
            _check_keys(section, given, allowed)
            for key, (field, kind) in keys.items():
                if key in given:
                    fields[field] = _coerce(f"{section}.{key}", given[key], kind)
        if "mode" in fields:
            if fields["mode"] not in KIND_TO_MODE:
                raise ConfigError(
                    "corrector.kind",
                    f"expected one of {list(KIND_TO_MODE)}, got {fields['mode']!r}",
                )
            fields["mode"] = KIND_TO_MODE[fields["mode"]]
        run_section = data.get("run", {})
        extras = {
            key: _coerce(f"run.{key}", run_section.get(key, default), kind)
            for key, (default, kind) in RUN_EXTRA_KEYS.items()
        }
        return cls(
            run=sampler.RunConfig(**fields),
            sweep=cls._load_sweep(data.get("sweep")),
            verify=cls._load_verify(data.get("verify", {})),
            **extras,
        )

    @staticmethod
    def _load_sweep(section: Optional[Dict[str, Any]]) -> Optional[experiments.SweepConfig]:
        if section is None:
            return None
        _check_keys("sweep", section, SWEEP_KEYS)
        if section.get("parameter") is None:
            return None
        values = {
            field: _coerce(f"sweep.{key}", section[key], kind)
            for key, (field, kind) in SWEEP_KEYS.items()
            if key in section
        }
        return experiments.SweepConfig(**values)

    @staticmethod
    def _load_verify(section: Dict[str, Any]) -> experiments.VerifyConfig:
        _check_keys("verify", section, VERIFY_KINDS)
        return experiments.VerifyConfig(
            **{
                key: _coerce(f"verify.{key}", value, VERIFY_KINDS[key])
                for key, value in section.items()
            }
        )

    @classmethod
    @file_or_name(file="r")
    def load(cls, file: TextIO) -> ConfigFile:
        try:
            data = json.load(file, object_pairs_hook=OrderedDict)
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON: {e}") from e
        return cls.from_dict(data)

    def replace(self, **changes) -> ConfigFile:
        return dataclasses.replace(self, **changes)

    def with_run(self, **changes) -> ConfigFile:
        return self.replace(run=self.run.replace(**changes))

    def require_sweep(self) -> experiments.SweepConfig:
        if self.sweep is None:
            raise ConfigError("sweep.parameter", "a sweep needs a parameter and values")
        return self.sweep

    def serialize(self) -> Dict[str, Any]:
        """Every section and key in canonical order."""
        run = self.run
        config = OrderedDict(mixture=OrderedDict(components=run.mixture.serialize()))
        for section, keys in RUN_KEYS.items():
            config[section] = OrderedDict(
                (key, _to_json(getattr(run, field))) for key, (field, _) in keys.items()
            )
        config["corrector"]["kind"] = MODE_TO_KIND[run.mode]
        config["run"]["output_dir"] = self.output_dir
        config["run"]["record_runtime"] = self.record_runtime
        sweep_defaults = _defaults(experiments.SweepConfig)
        config["sweep"] = OrderedDict(
            (
                key,
                _to_json(
                    getattr(self.sweep, field)
                    if self.sweep is not None
                    else sweep_defaults.get(field, [] if kind == FLOATS else None)
                ),
            )
            for key, (field, kind) in SWEEP_KEYS.items()
        )
        config["verify"] = OrderedDict(
            (key, _to_json(getattr(self.verify, key))) for key in VERIFY_KINDS
        )
        return config

    def dumps(self) -> str:
        return json.dumps(self.serialize(), indent=4) + "\n"

    @file_or_name(file="w")
    def write(self, file: TextIO):
        file.write(self.dumps())


def available_presets() -> Tuple[str, ...]:
    presets = importlib_resources.files("pcflow").joinpath("presets")
    return tuple(
        sorted(p.name[: -len(".json")] for p in presets.iterdir() if p.name.endswith(".json"))
    )


def load_preset(name: str) -> ConfigFile:
    """Load one of the configurations bundled with pcflow."""
    if name not in available_presets():
        raise ConfigError(
            "preset", f"unknown preset {name!r}, expected one of {list(available_presets())}"
        )
    logging.getLogger("pcflow").debug(f"Loading preset {name}")
    resource = importlib_resources.files("pcflow").joinpath("presets").joinpath(f"{name}.json")
    with resource.open("r") as f:
        return ConfigFile.load(f)
