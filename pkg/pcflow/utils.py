"""Utilities for pcflow."""

import contextlib
import contextvars
import dataclasses
import functools
import importlib
import inspect
import math
import os
import sys
from dataclasses import dataclass
from types import MethodType
from typing import Any, Dict, Optional, Tuple

if sys.version_info < (3, 10):
    from importlib_metadata import entry_points
else:
    from importlib.metadata import entry_points


def _format(self, value, tag):
    """Wrap `value` in HTML like <tag>s."""
    return f"<{getattr(self, tag)}>{value}</{getattr(self, tag)}>"


@dataclasses.dataclass
class TextStyle:
    check: str = "cyan"
    value: str = "Salmon"
    passed: str = "green"
    failed: str = "red"

    def __post_init__(self):
        # Add format_field() methods to the object for each field.
        for field in dataclasses.fields(self):
            field = field.name
            method = MethodType(functools.partial(_format, tag=field), self)
            setattr(self, f"format_{field}", method)


TEXT_STYLE = TextStyle()


class ConfigError(ValueError):
    """A configuration value is missing, unknown, or violates an invariant."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class NumericalError(ArithmeticError):
    """A particle left the finite floats; carries where it happened."""

    def __init__(self, message: str, **provenance):
        details = ", ".join(f"{k}={v}" for k, v in provenance.items())
        super().__init__(f"{message} ({details})" if details else message)
        self.provenance = provenance


@dataclass
class EnvVar:
    name: str
    default: Any

    def __get__(self, obj, objtype=None):
        value = os.environ.get(self.name)
        return type(self.default)(value) if value else self.default


class EnvVarConstants:
    LOG_LEVEL = EnvVar(name="PCFLOW_LOG_LEVEL", default="INFO")
    NUM_THREADS = EnvVar(name="PCFLOW_NUM_THREADS", default=-1)
    W2_EXACT_MAX = EnvVar(name="PCFLOW_W2_EXACT_MAX", default=4096)
    SLICES = EnvVar(name="PCFLOW_SLICES", default=64)
    LIPSCHITZ_TIMES = EnvVar(name="PCFLOW_LIPSCHITZ_TIMES", default=20)
    LIPSCHITZ_POINTS = EnvVar(name="PCFLOW_LIPSCHITZ_POINTS", default=2000)


def is_multiple(total: float, step: float, rtol: float = 1e-9) -> bool:
    """Check that `total` is an integer multiple of `step` up to `rtol`."""
    if step <= 0:
        return False
    ratio = total / step
    return abs(ratio - round(ratio)) <= rtol * max(1.0, abs(ratio))


def divisor_at_most(total: float, step: float) -> Tuple[float, int]:
    """The largest step <= `step` that divides `total` exactly, and the count."""
    count = max(1, math.ceil(total / step - 1e-9))
    return total / count, count


def abstract_classattributes(*attributes):
    """Force subclasses to define some class attributes."""

    # Note, we are modifying the class with the decorator, not wrapping it so we
    # don't need @functools.wraps to maintain information about our class.
    def inner(base_cls):
        # First set all attributes (on the base class) to NotImplemented
        # so the subclasses will inherit them and give us something to compare to.
        for attribute in attributes:
            setattr(base_cls, attribute, NotImplemented)

        og_init_subclass = base_cls.__init_subclass__

        def enforcing_init_subclass(cls, **kwargs):
            # Call the original one, if they didn't override the implementation it
            # doesn't take cls as an argument. Just try each version to see what works.
            try:
                og_init_subclass(cls, **kwargs)
            except TypeError:
                og_init_subclass(**kwargs)

            missing_attributes = []
            for attribute in attributes:
                if getattr(cls, attribute, NotImplemented) is NotImplemented:
                    missing_attributes.append(attribute)

            # Error out if they are a concrete class and missing things.
            if missing_attributes and not inspect.isabstract(cls):
                missing = [f'"{attr}"' for attr in missing_attributes]
                plural = ""
                if len(missing) > 1:
                    missing[-1] = f"and {missing[-1]}"
                    plural = "s"
                missing = ", ".join(missing)
                raise NotImplementedError(
                    f"Abstract Attribute{plural} {missing} missing "
                    f"on class {cls.__name__}"
                )

            return cls

        base_cls.__init_subclass__ = classmethod(enforcing_init_subclass)
        return base_cls

    return inner


def load_plugin(group: str, name: Optional[str], builtins: Dict[str, str]):
    """Load a plugin class by name from an entry point group.

    Falls back to the `builtins` table (name -> "module:attr") when the
    distribution metadata is not installed.
    """
    discovered = {ep.name: ep for ep in entry_points(group=group)}
    if name in discovered:
        return discovered[name].load()
    if name in builtins:
        module, attr = builtins[name].split(":")
        return getattr(importlib.import_module(module), attr)
    available = sorted(set(discovered) | set(builtins))
    raise ValueError(f"Unknown {group} plugin {name!r}, expected one of {available}")


# The sampler stage currently running, attached to log records by the scripts.
CURRENT_PHASE = contextvars.ContextVar("pcflow_phase", default="-")


@contextlib.contextmanager
def logging_phase(name: str):
    """Label log records emitted inside the block with `name`."""
    token = CURRENT_PHASE.set(name)
    try:
        yield
    finally:
        CURRENT_PHASE.reset(token)
