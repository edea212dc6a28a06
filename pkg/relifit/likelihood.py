import logging
import math
from dataclasses import dataclass, replace
from typing import Mapping, NamedTuple, Optional, Tuple

import numpy as np

from relifit.exceptions import DomainError, InfeasibleError, UnsupportedModelError
from relifit.model import (ModelKind, Modulation, fault_correction, log_density_terms,
                           remaining_fault_term)
from relifit.optimizer import Bound

logger = logging.getLogger(__name__)

PENALTY_BASE = 1e9
PENALTY_SCALE = 1e6
FREE_PARAMS = ('phi', 'N', 'gamma')

# largest value a feasible point may report, keeping every penalty strictly above it
_FEASIBLE_CAP = float(np.nextafter(PENALTY_BASE, 0.0))


class LLFGradient(NamedTuple):
    """
    Partial derivatives of the log-likelihood.

    Args:
        phi: dLLF/dphi
        n_initial: dLLF/dN
        gamma: dLLF/dgamma, only for the Proposed model
    """

    phi: float
    n_initial: float
    gamma: Optional[float] = None


def interval_brackets(spec, series):
    """Remaining-fault term of every observed interval."""
    return np.asarray(remaining_fault_term(spec, series.index, series.cum_prev), dtype=float)


def _require_nonempty(series):
    if len(series) == 0:
        raise DomainError(f"release {series.release_id} has no intervals")


def log_likelihood(spec, series):
    """
    Log-likelihood of a failure series, the sum of log densities of its intervals.

    Args:
        spec: ModelSpec
        series: FailureSeries

    Returns:
        LLF in nats, or None when the model is infeasible on some interval
    """
    _require_nonempty(series)
    if np.any(interval_brackets(spec, series) <= 0):
        return None
    return float(np.sum(log_density_terms(spec, series.index, series.cum_prev, series.t)))


def log_likelihood_closed_form(spec, series):
    """
    LLF of a constant-hazard model in its expanded form:
    n ln(phi) + sum ln(bracket) - phi sum(bracket t).
    """
    _require_nonempty(series)
    if spec.kind.time_linear:
        raise UnsupportedModelError(f"closed-form LLF is defined for constant-hazard models, not {spec.kind.label}")
    brackets = interval_brackets(spec, series)
    if np.any(brackets <= 0):
        return None
    n = len(series)
    return float(n * math.log(spec.phi) + np.sum(np.log(brackets)) - spec.phi * np.sum(brackets * series.t))


def _gamma_slopes(spec, series):
    # correction per unit gamma: (n_{i-1}/(i-1))(p-r), zero at i = 1
    unit = replace(spec, modulation=Modulation(1.0))
    return np.asarray(fault_correction(unit, series.index, series.cum_prev), dtype=float)


def _partials(spec, series):
    _require_nonempty(series)
    if spec.kind.time_linear:
        raise UnsupportedModelError(
            f"analytic LLF derivatives are only defined for constant-hazard models, not {spec.kind.label}")
    brackets = interval_brackets(spec, series)
    if np.any(brackets <= 0):
        first = int(np.argmax(brackets <= 0)) + 1
        raise InfeasibleError(f"{spec.kind.label} model is infeasible at interval {first}", index=first)
    t = series.t
    d_phi = len(series) / spec.phi - float(np.sum(brackets * t))
    d_n = float(np.sum(1.0 / brackets)) - spec.phi * float(np.sum(t))
    d_gamma = None
    if spec.kind is ModelKind.PROPOSED and spec.gamma_override is None:
        slopes = _gamma_slopes(spec, series)
        d_gamma = float(np.sum(-slopes / brackets)) + spec.phi * float(np.sum(slopes * t))
    return d_phi, d_n, d_gamma


def llf_gradient(spec, series):
    """
    Analytic partial derivatives of the LLF of a constant-hazard model.

    Args:
        spec: Strictly feasible ModelSpec (JM, GOI, GS Mahapatra or Proposed)
        series: FailureSeries

    Returns:
        LLFGradient(phi, n_initial, gamma); gamma is None except for Proposed
    """
    d_phi, d_n, d_gamma = _partials(spec, series)
    return LLFGradient(d_phi, d_n, d_gamma)


def stationarity_residuals(spec, series):
    """
    Residuals of the MLE stationarity conditions.

    r_phi = n/phi - sum(bracket t) and r_N = sum(1/bracket) - phi sum(t);
    both vanish at an interior maximum.

    Returns:
        (r_phi, r_N)
    """
    d_phi, d_n, _ = _partials(spec, series)
    return d_phi, d_n


@dataclass(frozen=True)
class Objective:
    """
    Negative log-likelihood of a series as a function of the free parameters.

    Args:
        spec_template: ModelSpec holding the fixed values (p, r and pinned parameters)
        series: FailureSeries being fitted
        free_params: Ordered names of the estimated parameters, from ('phi', 'N', 'gamma')
        bounds: Search bound of every free parameter
    """

    spec_template: object
    series: object
    free_params: Tuple[str, ...]
    bounds: Mapping[str, Bound]

    def __post_init__(self):
        free = tuple(self.free_params)
        if not free:
            raise DomainError("at least one free parameter is required")
        unknown = [name for name in free if name not in FREE_PARAMS]
        if unknown:
            raise DomainError(f"parameters {unknown} cannot be estimated (free parameters: {FREE_PARAMS})")
        if len(set(free)) != len(free):
            raise DomainError("free parameters must be distinct")
        if 'gamma' in free and self.spec_template.kind is not ModelKind.PROPOSED:
            raise DomainError("gamma is only estimated for the Proposed model")
        for name in free:
            bound = self.bounds.get(name)
            if bound is None:
                raise DomainError(f"missing bound for free parameter '{name}'")
            if name in ('phi', 'N') and bound.lo <= 0:
                raise DomainError(f"lower bound of {name} must be positive")
            if name == 'gamma' and bound.lo < 1:
                raise DomainError("lower bound of gamma must be >= 1")
        _require_nonempty(self.series)
        object.__setattr__(self, 'free_params', free)

    @property
    def bound_list(self):
        return [self.bounds[name] for name in self.free_params]

    def spec_at(self, x):
        """ModelSpec with the free parameters set to x."""
        values = dict(zip(self.free_params, (float(v) for v in x)))
        return self.spec_template.with_params(
            phi=values.get('phi'),
            n_initial=values.get('N'),
            gamma=values.get('gamma'),
        )

    def __call__(self, x):
        return penalized_objective(self, x)


def penalized_objective(obj, x):
    """
    Value handed to the minimizer.

    Args:
        obj: Objective
        x: Free-parameter vector inside the bounds

    Returns:
        -LLF when feasible; otherwise PENALTY_BASE plus PENALTY_SCALE times the
        largest bracket violation, which always exceeds every feasible value.
    """
    spec = obj.spec_at(x)
    series = obj.series
    brackets = interval_brackets(spec, series)
    worst = float(np.min(brackets))
    if worst <= 0:
        return PENALTY_BASE + PENALTY_SCALE * (-worst)
    value = -float(np.sum(log_density_terms(spec, series.index, series.cum_prev, series.t)))
    if not math.isfinite(value):
        return PENALTY_BASE
    return min(value, _FEASIBLE_CAP)


def conditional_phi(spec, series):
    """
    phi maximizing the LLF with N (and gamma) held fixed.

    n / sum(bracket t) for constant-hazard kinds, 2n / sum(bracket t^2) for
    SW and MSW.
    """
    _require_nonempty(series)
    brackets = interval_brackets(spec, series)
    if np.any(brackets <= 0):
        first = int(np.argmax(brackets <= 0)) + 1
        raise InfeasibleError(f"{spec.kind.label} model is infeasible at interval {first}", index=first)
    t = series.t
    if spec.kind.time_linear:
        return 2.0 * len(series) / float(np.sum(brackets * t * t))
    return len(series) / float(np.sum(brackets * t))
