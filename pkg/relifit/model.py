import math
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from relifit.exceptions import DomainError, InfeasibleError

logger = logging.getLogger(__name__)


class ModelKind(Enum):
    """The six failure-rate models that can be fitted."""

    JM = 'jm'
    SW = 'sw'
    GOI = 'goi'
    MAHAPATRA = 'mahapatra'
    MSW = 'msw'
    PROPOSED = 'proposed'

    @classmethod
    def parse(cls, name):
        """
        Resolve a model kind from a user-supplied name.

        Args:
            name: Kind value or label, case-insensitive (e.g. 'jm', 'GS Mahapatra')

        Returns:
            Matching ModelKind
        """
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace(' ', '').replace('-', '').replace('_', '')
        for kind in cls:
            if key in (kind.value, _LABELS[kind].lower().replace(' ', '')):
                return kind
        valid = ', '.join(k.value for k in cls)
        raise DomainError(f"unknown model kind '{name}' (expected one of: {valid})")

    @property
    def label(self):
        """Display name used in reports and log messages, e.g. 'GS Mahapatra'."""
        return _LABELS[self]

    @property
    def time_linear(self):
        """True when the hazard grows linearly with time inside an interval."""
        return self in (ModelKind.SW, ModelKind.MSW)

    @property
    def uses_debug(self):
        """True when the remaining-fault term depends on the debugging probabilities p and r."""
        return self in (ModelKind.GOI, ModelKind.MAHAPATRA, ModelKind.PROPOSED)


_LABELS = {
    ModelKind.JM: 'JM',
    ModelKind.SW: 'SW',
    ModelKind.GOI: 'GOI',
    ModelKind.MAHAPATRA: 'GS Mahapatra',
    ModelKind.MSW: 'MSW',
    ModelKind.PROPOSED: 'Proposed',
}


@dataclass(frozen=True)
class DebugProbs:
    """
    Imperfect-debugging probabilities.

    A detected fault is removed with probability p, left in place with
    probability q and replaced by a new fault with probability r. q is always
    derived as 1 - p - r.
    """

    p: float
    r: float

    def __post_init__(self):
        p, r = float(self.p), float(self.r)
        if not (0.0 <= p <= 1.0) or not (0.0 <= r <= 1.0):
            raise DomainError(f"p and r must lie in [0, 1] (got p={p}, r={r})")
        if p + r > 1.0:
            raise DomainError(f"p + r must not exceed 1 (got p={p}, r={r})")
        if not p > r:
            raise DomainError(f"fault removal probability p must exceed introduction probability r (got p={p}, r={r})")
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'r', r)

    @property
    def q(self):
        return 1.0 - self.p - self.r

    @property
    def net_removal(self):
        """p - r, the expected net number of faults removed per correction."""
        return self.p - self.r


def gamma_from_mu(mu):
    """
    Modulation factor for a modulation parameter.

    Args:
        mu: Modulation parameter in (0, 1]

    Returns:
        gamma = mu + (1 - mu) / mu, always >= 1
    """
    mu = float(mu)
    if not (0.0 < mu <= 1.0) or math.isnan(mu):
        raise DomainError(f"modulation parameter mu must lie in (0, 1] (got {mu})")
    gamma = mu + (1.0 - mu) / mu
    if not math.isfinite(gamma):
        raise DomainError(f"modulation parameter mu={mu} is too small; gamma overflows")
    return max(1.0, gamma)


def mu_from_gamma(gamma):
    """
    Inverse of gamma_from_mu on the (0, 1] branch.

    mu solves mu^2 - (gamma + 1) mu + 1 = 0. The two roots multiply to 1, so
    the small root is computed as 2 / (larger root sum) to avoid cancellation.

    Args:
        gamma: Modulation factor, >= 1

    Returns:
        Modulation parameter in (0, 1]
    """
    gamma = float(gamma)
    if not (gamma >= 1.0 and math.isfinite(gamma)):
        raise DomainError(f"modulation factor gamma must be finite and >= 1 (got {gamma})")
    root = math.sqrt(gamma - 1.0) * math.sqrt(gamma + 3.0)
    mu = 2.0 / ((gamma + 1.0) + root)
    if not mu > 0.0:
        raise DomainError(f"modulation factor gamma={gamma} is too large; mu underflows")
    return min(1.0, mu)


@dataclass(frozen=True)
class Modulation:
    """Modulation factor of the proposed model. gamma is canonical; mu is derived."""

    gamma: float

    def __post_init__(self):
        gamma = float(self.gamma)
        if not (gamma >= 1.0 and math.isfinite(gamma)):
            raise DomainError(f"modulation factor gamma must be finite and >= 1 (got {gamma})")
        object.__setattr__(self, 'gamma', gamma)

    @classmethod
    def from_mu(cls, mu):
        return cls(gamma_from_mu(mu))

    @property
    def mu(self):
        return mu_from_gamma(self.gamma)


@dataclass(frozen=True)
class ModelSpec:
    """
    A model kind together with its parameter values.

    Args:
        kind: Which failure-rate model
        phi: Proportionality constant (1/time, or 1/time^2 for SW and MSW)
        n_initial: Initial fault count N, a positive real during computation
        debug: Imperfect-debugging probabilities (GOI, GS Mahapatra, Proposed)
        modulation: Modulation factor (Proposed only)
        gamma_override: Per-interval gamma sequence replacing modulation (Proposed only)
    """

    kind: ModelKind
    phi: float
    n_initial: float
    debug: Optional[DebugProbs] = None
    modulation: Optional[Modulation] = None
    gamma_override: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', ModelKind.parse(self.kind))
        phi, n_initial = float(self.phi), float(self.n_initial)
        if not (phi > 0.0 and math.isfinite(phi)):
            raise DomainError(f"phi must be positive and finite (got {phi})")
        if not (n_initial > 0.0 and math.isfinite(n_initial)):
            raise DomainError(f"initial fault count N must be positive and finite (got {n_initial})")
        object.__setattr__(self, 'phi', phi)
        object.__setattr__(self, 'n_initial', n_initial)

        if self.kind.uses_debug and self.debug is None:
            raise DomainError(f"{self.kind.label} model requires debug probabilities (p, r)")
        if self.gamma_override is not None:
            if self.kind is not ModelKind.PROPOSED:
                raise DomainError("gamma_override only applies to the Proposed model")
            override = tuple(float(g) for g in self.gamma_override)
            if any(not (g > 0.0 and math.isfinite(g)) for g in override):
                raise DomainError("gamma_override values must be positive and finite")
            object.__setattr__(self, 'gamma_override', override)
        elif self.kind is ModelKind.PROPOSED and self.modulation is None:
            raise DomainError("Proposed model requires a modulation factor")

    @property
    def gamma(self):
        """Scalar modulation factor, or None when not applicable."""
        if self.kind is not ModelKind.PROPOSED or self.modulation is None:
            return None
        return self.modulation.gamma

    def with_params(self, phi=None, n_initial=None, gamma=None):
        """Copy of this spec with some parameters replaced."""
        changes = {}
        if phi is not None:
            changes['phi'] = phi
        if n_initial is not None:
            changes['n_initial'] = n_initial
        if gamma is not None:
            changes['modulation'] = Modulation(gamma)
        return replace(self, **changes)


@dataclass(frozen=True)
class IntervalContext:
    """Position inside a failure series: interval i, n_{i-1} and time t into the interval."""

    index: int
    cum_prev: float = 0
    elapsed: float = 0.0

    def __post_init__(self):
        if int(self.index) != self.index or self.index < 1:
            raise DomainError(f"interval index must be an integer >= 1 (got {self.index})")
        if self.cum_prev < 0:
            raise DomainError(f"cumulative failures must be >= 0 (got {self.cum_prev})")
        if self.index == 1 and self.cum_prev != 0:
            raise DomainError("cumulative failures before the first interval must be 0")
        if not self.elapsed >= 0:
            raise DomainError(f"elapsed time must be >= 0 (got {self.elapsed})")
        object.__setattr__(self, 'index', int(self.index))


def _gamma_values(spec, index):
    if spec.gamma_override is None:
        return spec.modulation.gamma
    override = np.asarray(spec.gamma_override, dtype=float)
    idx = np.asarray(index, dtype=int)
    if np.any(idx > len(override)):
        raise DomainError(
            f"gamma_override has {len(override)} values but interval {int(np.max(idx))} was requested")
    return override[idx - 1]


def fault_correction(spec, index, cum_prev):
    """
    Faults considered corrected before interval i, the term subtracted from N.

    Works element-wise on scalars or arrays of interval indices and
    cumulative counts n_{i-1}.
    """
    prev = np.asarray(index, dtype=float) - 1.0
    kind = spec.kind
    if kind in (ModelKind.JM, ModelKind.SW):
        correction = prev
    elif kind is ModelKind.GOI:
        correction = spec.debug.p * prev
    elif kind is ModelKind.MAHAPATRA:
        correction = spec.debug.net_removal * prev
    elif kind is ModelKind.MSW:
        correction = np.asarray(cum_prev, dtype=float)
    else:
        # 0/0 at i = 1 is defined as no correction
        gamma = _gamma_values(spec, index)
        n_prev = np.asarray(cum_prev, dtype=float)
        safe_prev = np.where(prev > 0, prev, 1.0)
        correction = np.where(prev > 0, (n_prev * gamma / safe_prev) * spec.debug.net_removal, 0.0)
    if np.ndim(correction) == 0:
        return float(correction)
    return correction


def remaining_fault_term(spec, index, cum_prev):
    """The bracketed term N - correction; the model is exhausted when it is <= 0."""
    return spec.n_initial - fault_correction(spec, index, cum_prev)


def hazard_coefficient(spec, index, cum_prev):
    """
    phi times the remaining-fault term.

    This is the constant failure intensity for JM, GOI, GS Mahapatra and
    Proposed, and the slope of the linear intensity for SW and MSW.
    """
    return spec.phi * remaining_fault_term(spec, index, cum_prev)


def _feasible_coefficient(spec, ctx):
    bracket = remaining_fault_term(spec, ctx.index, ctx.cum_prev)
    if not bracket > 0:
        raise InfeasibleError(
            f"{spec.kind.label} model exhausted at interval {ctx.index}: "
            f"remaining-fault term {bracket:.6g} <= 0",
            index=ctx.index, bracket=bracket)
    return spec.phi * bracket


def hazard(spec, ctx):
    """
    Failure intensity at time ctx.elapsed into interval ctx.index.

    Args:
        spec: Model specification
        ctx: Interval context

    Returns:
        Failure intensity (1/time)
    """
    coefficient = _feasible_coefficient(spec, ctx)
    if spec.kind.time_linear:
        return coefficient * ctx.elapsed
    return coefficient


def cumulative_hazard(spec, ctx):
    """Integrated intensity over [0, ctx.elapsed]."""
    coefficient = _feasible_coefficient(spec, ctx)
    t = float(ctx.elapsed)
    if spec.kind.time_linear:
        return coefficient * t * t / 2.0
    return coefficient * t


def reliability(spec, ctx):
    """Probability of surviving ctx.elapsed time units into the interval."""
    return math.exp(-cumulative_hazard(spec, ctx))


def cdf(spec, ctx):
    """
    Probability that the interval ends before the elapsed time.

    Args:
        spec: Model specification
        ctx: Interval position; ctx.elapsed is the time into the interval

    Returns:
        1 - R(t)
    """
    return 1.0 - reliability(spec, ctx)


def density(spec, ctx):
    """Probability density of the interval length, hazard times survival."""
    return hazard(spec, ctx) * reliability(spec, ctx)


def log_density(spec, ctx):
    """Natural log of density(), computed without forming the exponential."""
    return math.log(hazard(spec, ctx)) - cumulative_hazard(spec, ctx)


def log_density_terms(spec, index, cum_prev, t):
    """
    Element-wise log densities for arrays of intervals.

    No feasibility check is made; callers must reject non-positive brackets
    first.
    """
    coefficient = hazard_coefficient(spec, index, cum_prev)
    t = np.asarray(t, dtype=float)
    if spec.kind.time_linear:
        return np.log(coefficient * t) - coefficient * t * t / 2.0
    return np.log(coefficient) - coefficient * t


def jm_equivalent_gamma_sequence(series, debug):
    """
    Per-interval gamma values that turn the Proposed intensity into GS Mahapatra's.

    With gamma_i = (i-1)^2 / n_{i-1} the correction term n_{i-1} gamma_i / (i-1)
    collapses to (i-1), so the Proposed hazard equals phi[N - (p-r)(i-1)]; with
    p=1, r=0 that is the JM hazard.

    Args:
        series: FailureSeries with at least two intervals
        debug: DebugProbs (validated, so p > r holds)

    Returns:
        Tuple of gamma values, one per interval (gamma_1 is 1.0)
    """
    if not isinstance(debug, DebugProbs):
        raise DomainError("debug must be a DebugProbs instance")
    if len(series) < 2:
        raise DomainError("the gamma sequence needs at least two intervals")
    cum_prev = series.cum_prev
    gammas = [1.0]
    for i in range(2, len(series) + 1):
        n_prev = cum_prev[i - 1]
        if n_prev == 0:
            raise DomainError(f"cumulative failures before interval {i} is zero")
        gammas.append((i - 1) ** 2 / n_prev)
    return tuple(gammas)


def remaining_faults(spec, series):
    """
    Remaining-fault term for the interval following the last observed one.

    Args:
        spec: Fitted model specification
        series: The FailureSeries it was fitted to

    Returns:
        N minus the faults considered corrected after all observed failures
    """
    return remaining_fault_term(spec, len(series) + 1, series.total_failures)


def next_interval_hazard(spec, series):
    """Hazard coefficient of the next interval; the intensity for constant kinds, the slope for SW/MSW."""
    return float(spec.phi * remaining_faults(spec, series))


def reliability_curve(spec, series, times):
    """
    Survival probability over the next (unobserved) interval.

    Args:
        spec: Fitted model specification
        series: FailureSeries the spec was fitted to
        times: Mission times measured from the last failure

    Returns:
        List of reliabilities, one per time
    """
    curve = []
    for t in times:
        ctx = IntervalContext(len(series) + 1, series.total_failures, float(t))
        curve.append(reliability(spec, ctx))
    return curve


def model_from_names(kind, phi, n_initial, p=None, r=None, gamma=None, mu=None):
    """
    Build a ModelSpec from loose keyword values, as given on the command line.

    Debug probabilities are attached only to kinds that use them, and the
    modulation only to the Proposed model.
    """
    kind = ModelKind.parse(kind)
    debug = None
    if kind.uses_debug:
        if p is None or r is None:
            raise DomainError(f"{kind.label} model requires p and r")
        debug = DebugProbs(p, r)
    modulation = None
    if kind is ModelKind.PROPOSED:
        if gamma is not None and mu is not None:
            raise DomainError("give either gamma or mu, not both")
        if mu is not None:
            modulation = Modulation.from_mu(mu)
        elif gamma is not None:
            modulation = Modulation(gamma)
        else:
            raise DomainError("Proposed model requires gamma or mu")
    return ModelSpec(kind, phi, n_initial, debug=debug, modulation=modulation)
