import logging
import math

import numpy as np

from relifit.exceptions import DegreesOfFreedomError, DomainError, InfeasibleError
from relifit.model import ModelKind, hazard_coefficient, remaining_fault_term

logger = logging.getLogger(__name__)


def _expected_lengths(spec, coefficients):
    if spec.kind.time_linear:
        # mean of the Rayleigh law with hazard c t
        return np.sqrt(math.pi / (2.0 * coefficients))
    return 1.0 / coefficients


def predicted_intervals(spec, series):
    """
    Expected length of every observed interval under the model.

    Args:
        spec: Feasible ModelSpec
        series: FailureSeries

    Returns:
        Array of E[t_i]
    """
    brackets = np.asarray(remaining_fault_term(spec, series.index, series.cum_prev), dtype=float)
    if np.any(brackets <= 0):
        first = int(np.argmax(brackets <= 0)) + 1
        raise InfeasibleError(f"{spec.kind.label} model exhausted at interval {first}", index=first)
    coefficients = np.asarray(hazard_coefficient(spec, series.index, series.cum_prev), dtype=float)
    return _expected_lengths(spec, coefficients)


def next_expected_interval(spec, series):
    """Expected time to the next, not yet observed, failure; None when no faults remain."""
    index, cum_prev = len(series) + 1, series.total_failures
    if not remaining_fault_term(spec, index, cum_prev) > 0:
        return None
    coefficient = np.asarray([hazard_coefficient(spec, index, cum_prev)], dtype=float)
    return float(_expected_lengths(spec, coefficient)[0])


def residuals(spec, series):
    """
    Observed minus expected interval lengths.

    Args:
        spec: Fitted model specification
        series: FailureSeries the model was fitted to

    Returns:
        numpy array t_i - E[t_i], one entry per interval
    """
    return series.t - predicted_intervals(spec, series)


def sse(spec, series):
    """Sum of squared differences between observed and expected interval lengths."""
    if len(series) == 0:
        raise DomainError(f"release {series.release_id} has no intervals")
    r = residuals(spec, series)
    return float(np.dot(r, r))


def mse(spec, series, k_params):
    """
    SSE divided by the residual degrees of freedom.

    Args:
        spec: Feasible ModelSpec
        series: FailureSeries
        k_params: Number of estimated parameters

    Returns:
        SSE / (#intervals - k_params)
    """
    dof = len(series) - int(k_params)
    if dof <= 0:
        raise DegreesOfFreedomError(
            f"MSE needs more intervals than parameters ({len(series)} interval(s), {k_params} parameter(s))")
    return sse(spec, series) / dof


def k_params(kind, gamma_estimated=False):
    """
    Number of freely estimated parameters.

    p and r are always fixed, so every model estimates phi and N; the Proposed
    model adds gamma when it is estimated.
    """
    kind = ModelKind.parse(kind)
    if kind is ModelKind.PROPOSED and gamma_estimated:
        return 3
    return 2
