"""Distance estimates, slope fits, diagnostics and reports."""

from pcflow.evaluation.metrics import (
    coupled_deviation,
    mode_weights,
    moments,
    tv_histogram,
    tv_marginals,
    w2_estimate,
)
from pcflow.evaluation.regression import SlopeFit, slope_regression
