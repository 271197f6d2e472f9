"""Dense vector arithmetic with finiteness guarantees."""

import numpy as np

from pcflow.utils import NumericalError


def check_finite(x: np.ndarray, message: str = "Non-finite value", **provenance):
    """Raise NumericalError naming the first offending row of `x`."""
    finite = np.isfinite(x)
    if finite.all():
        return x
    bad = np.argwhere(~finite)[0]
    raise NumericalError(message, index=tuple(int(i) for i in bad), **provenance)


def axpby(a: float, x: np.ndarray, b: float, y: np.ndarray) -> np.ndarray:
    """Return a * x + b * y, refusing mismatched shapes and overflow."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"Shape mismatch in axpby: {x.shape} vs {y.shape}")
    try:
        with np.errstate(over="raise", invalid="raise"):
            result = a * x + b * y
    except FloatingPointError as e:
        raise NumericalError(f"Overflow in axpby: {e}") from e
    return check_finite(result, "Non-finite result in axpby")
