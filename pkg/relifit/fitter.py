import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from relifit import evaluation
from relifit.exceptions import DomainError, FitError, InfeasibleError
from relifit.likelihood import (PENALTY_BASE, Objective, conditional_phi, log_likelihood,
                                stationarity_residuals)
from relifit.model import (DebugProbs, ModelKind, ModelSpec, Modulation, gamma_from_mu,
                           mu_from_gamma, next_interval_hazard, reliability_curve, remaining_faults)
from relifit.optimizer import Bound, SwarmConfig, SwarmOptimizer

logger = logging.getLogger(__name__)

SCHEMA_TAG = 'relifit/1'


class GammaMode(Enum):
    FIXED = 'fixed'
    ESTIMATE = 'estimate'
    PROFILE = 'profile'


@dataclass(frozen=True)
class FitOptions:
    """
    Settings of one fit.

    At most one of gamma, mu, estimate_gamma and profile_gamma may be given;
    with none of them the Proposed model estimates gamma jointly with phi and N.

    Args:
        p: Fault removal probability (fixed)
        r: Fault introduction probability (fixed)
        gamma: Fixed modulation factor
        mu: Fixed modulation parameter, converted to gamma
        estimate_gamma: Estimate gamma jointly
        profile_gamma: (lo, hi, step) grid; phi and N are fitted at each gamma
        swarm: Optimizer configuration
        phi_bounds: Search range of phi (log scale)
        n_bounds: Search range of N; default [n, factor * n + offset]
        gamma_bounds: Search range of gamma when estimated
        workers: Concurrent objective evaluations
        mission_times: Times at which next-interval reliability is reported
        trace_tail: How many final optimizer trace values are kept
    """

    p: float = 0.95
    r: float = 0.03
    gamma: Optional[float] = None
    mu: Optional[float] = None
    estimate_gamma: bool = False
    profile_gamma: Optional[Tuple[float, float, float]] = None
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    phi_bounds: Tuple[float, float] = (1e-8, 1e-1)
    n_bounds: Optional[Tuple[float, float]] = None
    gamma_bounds: Tuple[float, float] = (1.0, 50.0)
    n_upper_factor: float = 10
    n_upper_offset: float = 10
    workers: int = 1
    mission_times: Tuple[float, ...] = ()
    trace_tail: int = 10

    def __post_init__(self):
        DebugProbs(self.p, self.r)
        modes = [self.gamma is not None, self.mu is not None, bool(self.estimate_gamma),
                 self.profile_gamma is not None]
        if sum(modes) > 1:
            raise DomainError("choose at most one of gamma, mu, estimate_gamma and profile_gamma")
        if self.gamma is not None:
            Modulation(self.gamma)
        if self.mu is not None:
            gamma_from_mu(self.mu)
        if self.profile_gamma is not None:
            self.profile_grid()
        if any(not t >= 0 for t in self.mission_times):
            raise DomainError("mission times must be >= 0")

    @classmethod
    def from_config(cls, config, **overrides):
        """Options from the 'fitting', 'swarm' and 'output' config sections, with keyword overrides."""
        fitting = config['fitting']
        values = {
            'p': fitting['p'],
            'r': fitting['r'],
            'phi_bounds': tuple(fitting['phi_bounds']),
            'gamma_bounds': tuple(fitting['gamma_bounds']),
            'n_upper_factor': fitting['n_upper_factor'],
            'n_upper_offset': fitting['n_upper_offset'],
            'workers': fitting['workers'],
            'swarm': SwarmConfig.from_dict(config['swarm']),
            'trace_tail': config['output']['trace_tail'],
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def gamma_mode(self):
        if self.gamma is not None or self.mu is not None:
            return GammaMode.FIXED
        if self.profile_gamma is not None:
            return GammaMode.PROFILE
        return GammaMode.ESTIMATE

    @property
    def fixed_gamma(self):
        if self.gamma is not None:
            return float(self.gamma)
        if self.mu is not None:
            return gamma_from_mu(self.mu)
        return None

    @property
    def debug(self):
        return DebugProbs(self.p, self.r)

    def profile_grid(self):
        """Gamma values of the profile grid, lo to hi inclusive."""
        lo, hi, step = (float(v) for v in self.profile_gamma)
        if lo < 1 or hi < lo or not step > 0:
            raise DomainError(f"profile grid needs 1 <= lo <= hi and step > 0 (got {lo}:{hi}:{step})")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [lo + step * k for k in range(count)]


def default_bounds(series, options, free_params):
    """
    Search bounds for the free parameters of a fit.

    phi is searched on a log scale; N from the observed failure count upward;
    gamma linearly.
    """
    total = series.total_failures
    n_bounds = options.n_bounds or (total, options.n_upper_factor * total + options.n_upper_offset)
    bounds = {
        'phi': Bound(options.phi_bounds[0], options.phi_bounds[1], 'log'),
        'N': Bound(n_bounds[0], n_bounds[1], 'linear'),
        'gamma': Bound(options.gamma_bounds[0], options.gamma_bounds[1], 'linear'),
    }
    return {name: bounds[name] for name in free_params}


@dataclass
class FitResult:
    """Outcome of fitting one model to one release."""

    release_id: str
    model: str
    status: str = 'ok'
    error: Optional[str] = None
    error_code: Optional[str] = None
    phi: Optional[float] = None
    n_initial: Optional[float] = None
    n_rounded: Optional[int] = None
    gamma: Optional[float] = None
    mu: Optional[float] = None
    p: Optional[float] = None
    r: Optional[float] = None
    gamma_mode: Optional[str] = None
    k_params: Optional[int] = None
    n_intervals: int = 0
    total_failures: int = 0
    total_time: float = 0.0
    time_unit: Optional[str] = None
    llf: Optional[float] = None
    llf_rounded: Optional[float] = None
    sse: Optional[float] = None
    mse: Optional[float] = None
    r_phi: Optional[float] = None
    r_n: Optional[float] = None
    remaining_faults: Optional[float] = None
    next_expected_interval: Optional[float] = None
    next_interval_hazard: Optional[float] = None
    mission_reliability: List[dict] = field(default_factory=list)
    seed: Optional[int] = None
    pop_size: Optional[int] = None
    iters: Optional[int] = None
    evaluations: Optional[int] = None
    trace_tail: List[float] = field(default_factory=list)
    profile: Optional[List[dict]] = None
    feasible: bool = True

    @property
    def kind(self):
        return ModelKind.parse(self.model)

    @property
    def ok(self):
        return self.status == 'ok'

    @classmethod
    def failed(cls, series, kind, error):
        """Result row for a fit that raised."""
        kind = ModelKind.parse(kind)
        return cls(
            release_id=series.release_id,
            model=kind.value,
            status='failed',
            error=' '.join(str(error).split()),
            error_code=getattr(error, 'code', 'E_RELIFIT'),
            n_intervals=len(series),
            total_failures=series.total_failures,
            total_time=series.total_time if len(series) else 0.0,
            time_unit=series.time_unit,
            feasible=False,
        )

    def to_spec(self):
        """ModelSpec at the continuous optimum."""
        if not self.ok:
            raise FitError(f"fit of {self.model} on release {self.release_id} failed")
        kind = self.kind
        debug = DebugProbs(self.p, self.r) if kind.uses_debug else None
        modulation = Modulation(self.gamma) if kind is ModelKind.PROPOSED else None
        return ModelSpec(kind, self.phi, self.n_initial, debug=debug, modulation=modulation)

    def to_dict(self):
        """JSON-ready form following the relifit/1 schema."""
        return {
            'schema': SCHEMA_TAG,
            'release_id': self.release_id,
            'model': self.model,
            'model_label': self.kind.label,
            'status': self.status,
            'error': None if self.ok else {'code': self.error_code, 'message': self.error},
            'params': {
                'phi': self.phi,
                'N': self.n_initial,
                'N_rounded': self.n_rounded,
                'gamma': self.gamma,
                'mu': self.mu,
            },
            'fixed': {'p': self.p, 'r': self.r},
            'gamma_mode': self.gamma_mode,
            'data': {
                'n_intervals': self.n_intervals,
                'total_failures': self.total_failures,
                'total_time': self.total_time,
                'time_unit': self.time_unit,
            },
            'fit': {
                'k_params': self.k_params,
                'llf': self.llf,
                'llf_rounded_N': self.llf_rounded,
                'sse': self.sse,
                'mse': self.mse,
                'feasible': self.feasible,
            },
            'stationarity': None if self.r_phi is None else {'r_phi': self.r_phi, 'r_N': self.r_n},
            'prediction': {
                'remaining_faults': self.remaining_faults,
                'next_expected_interval': self.next_expected_interval,
                'next_interval_hazard': self.next_interval_hazard,
                'mission_reliability': self.mission_reliability,
            },
            'optimizer': {
                'seed': self.seed,
                'pop_size': self.pop_size,
                'iters': self.iters,
                'evaluations': self.evaluations,
                'trace_tail': self.trace_tail,
            },
            'profile': self.profile,
        }

    @classmethod
    def from_dict(cls, data):
        """Rebuild a FitResult from its to_dict() form."""
        if data.get('schema') != SCHEMA_TAG:
            raise DomainError(f"unsupported result schema '{data.get('schema')}' (expected {SCHEMA_TAG})")
        params, fit, stationarity = data['params'], data['fit'], data.get('stationarity') or {}
        prediction, optimizer, source = data['prediction'], data['optimizer'], data['data']
        error = data.get('error') or {}
        return cls(
            release_id=data['release_id'],
            model=data['model'],
            status=data['status'],
            error=error.get('message'),
            error_code=error.get('code'),
            phi=params['phi'],
            n_initial=params['N'],
            n_rounded=params['N_rounded'],
            gamma=params['gamma'],
            mu=params['mu'],
            p=data['fixed']['p'],
            r=data['fixed']['r'],
            gamma_mode=data.get('gamma_mode'),
            k_params=fit['k_params'],
            n_intervals=source['n_intervals'],
            total_failures=source['total_failures'],
            total_time=source['total_time'],
            time_unit=source['time_unit'],
            llf=fit['llf'],
            llf_rounded=fit['llf_rounded_N'],
            sse=fit['sse'],
            mse=fit['mse'],
            r_phi=stationarity.get('r_phi'),
            r_n=stationarity.get('r_N'),
            remaining_faults=prediction['remaining_faults'],
            next_expected_interval=prediction['next_expected_interval'],
            next_interval_hazard=prediction.get('next_interval_hazard'),
            mission_reliability=prediction['mission_reliability'],
            seed=optimizer['seed'],
            pop_size=optimizer['pop_size'],
            iters=optimizer['iters'],
            evaluations=optimizer['evaluations'],
            trace_tail=optimizer['trace_tail'],
            profile=data.get('profile'),
            feasible=fit['feasible'],
        )


def round_half_up(value):
    return int(math.floor(value + 0.5))


class ModelFitter:
    def __init__(self, options=None):
        """
        Fits failure-rate models to failure series by maximum likelihood.

        Args:
            options: FitOptions shared by every fit made with this fitter
        """
        self.options = options or FitOptions()

    def template_spec(self, series, kind, gamma=None):
        """ModelSpec carrying the fixed values; phi and N are placeholders."""
        kind = ModelKind.parse(kind)
        debug = self.options.debug if kind.uses_debug else None
        modulation = None
        if kind is ModelKind.PROPOSED:
            modulation = Modulation(1.0 if gamma is None else gamma)
        return ModelSpec(kind, 1.0, max(series.total_failures, 1), debug=debug, modulation=modulation)

    def build_objective(self, series, kind, gamma=None, estimate_gamma=False):
        """
        Objective for one model and release.

        Args:
            series: FailureSeries
            kind: ModelKind
            gamma: Fixed gamma for the Proposed model
            estimate_gamma: Make gamma a free parameter

        Returns:
            Objective over (phi, N) or (phi, N, gamma)
        """
        free = ('phi', 'N', 'gamma') if estimate_gamma else ('phi', 'N')
        template = self.template_spec(series, kind, gamma)
        return Objective(template, series, free, default_bounds(series, self.options, free))

    def _optimize(self, objective):
        optimizer = SwarmOptimizer(objective.bound_list, self.options.swarm, self.options.workers)
        return optimizer.minimize(objective)

    def _fit_proposed(self, series):
        mode = self.options.gamma_mode
        if mode is GammaMode.FIXED:
            objective = self.build_objective(series, ModelKind.PROPOSED, gamma=self.options.fixed_gamma)
            return objective, self._optimize(objective), None
        if mode is GammaMode.ESTIMATE:
            objective = self.build_objective(series, ModelKind.PROPOSED, estimate_gamma=True)
            return objective, self._optimize(objective), None

        best = None
        profile = []
        for gamma in self.options.profile_grid():
            objective = self.build_objective(series, ModelKind.PROPOSED, gamma=gamma)
            outcome = self._optimize(objective)
            feasible = outcome.best_f < PENALTY_BASE
            profile.append({'gamma': gamma, 'llf': -outcome.best_f if feasible else None})
            logger.debug(f"Profile gamma={gamma:.6g}: best {outcome.best_f:.6g}")
            if best is None or outcome.best_f < best[1].best_f:
                best = (objective, outcome)
        return best[0], best[1], profile

    def fit(self, series, kind):
        """
        Fit one model to one release.

        Args:
            series: FailureSeries
            kind: ModelKind or its name

        Returns:
            FitResult

        Raises:
            FitError: when no feasible parameter vector is found
        """
        kind = ModelKind.parse(kind)
        if len(series) == 0:
            raise DomainError(f"release {series.release_id} has no intervals to fit")
        logger.info(f"Fitting {kind.label} to release {series.release_id} "
                    f"({len(series)} intervals, {series.total_failures} failures)")

        profile = None
        gamma_estimated = False
        if kind is ModelKind.PROPOSED:
            objective, outcome, profile = self._fit_proposed(series)
            gamma_estimated = self.options.gamma_mode is not GammaMode.FIXED
        else:
            objective = self.build_objective(series, kind)
            outcome = self._optimize(objective)

        if not outcome.best_f < PENALTY_BASE:
            logger.error(f"Swarm found no feasible {kind.label} point on release {series.release_id} "
                         f"after {outcome.evaluations} evaluations")
            raise FitError(f"no feasible {kind.label} parameters found for release {series.release_id}")

        spec = self.polish_phi(objective, objective.spec_at(outcome.best_x))
        result = self.evaluate(spec, series, gamma_estimated)
        result.seed = outcome.seed
        result.pop_size = self.options.swarm.pop_size
        result.iters = self.options.swarm.max_iters
        result.evaluations = outcome.evaluations
        result.trace_tail = list(outcome.trace[-self.options.trace_tail:]) if self.options.trace_tail > 0 else []
        result.profile = profile
        if kind is ModelKind.PROPOSED:
            result.gamma_mode = self.options.gamma_mode.value

        logger.info(f"{kind.label} on {series.release_id}: LLF={result.llf:.6g}, SSE={result.sse:.6g}, "
                    f"MSE={'n/a' if result.mse is None else format(result.mse, '.6g')}")
        return result

    def polish_phi(self, objective, spec):
        """
        Replace phi by its conditional maximizer when that stays inside the bounds.

        The swarm locates N and gamma; phi has a closed-form optimum given them,
        and moving to it never lowers the likelihood.
        """
        if 'phi' not in objective.free_params:
            return spec
        phi = conditional_phi(spec, objective.series)
        bound = objective.bounds['phi']
        if not bound.lo <= phi <= bound.hi:
            logger.debug(f"Conditional phi {phi:.6g} outside [{bound.lo:g}, {bound.hi:g}]; keeping swarm value")
            return spec
        polished = spec.with_params(phi=phi)
        before, after = log_likelihood(spec, objective.series), log_likelihood(polished, objective.series)
        if after is None or after < before:
            return spec
        logger.debug(f"Polished phi {spec.phi:.6g} -> {phi:.6g} (LLF {before:.6g} -> {after:.6g})")
        return polished

    def evaluate(self, spec, series, gamma_estimated=False):
        """
        Goodness-of-fit and derived quantities of a parameterized model.

        Args:
            spec: Feasible ModelSpec
            series: FailureSeries
            gamma_estimated: Whether gamma counts as an estimated parameter

        Returns:
            FitResult without optimizer metadata
        """
        kind = spec.kind
        k = evaluation.k_params(kind, gamma_estimated)
        llf = log_likelihood(spec, series)
        if llf is None:
            raise InfeasibleError(f"{kind.label} parameters are infeasible on release {series.release_id}")

        n_rounded = round_half_up(spec.n_initial)
        llf_rounded = None
        if n_rounded > 0:
            llf_rounded = log_likelihood(spec.with_params(n_initial=n_rounded), series)

        result = FitResult(
            release_id=series.release_id,
            model=kind.value,
            phi=spec.phi,
            n_initial=spec.n_initial,
            n_rounded=n_rounded,
            k_params=k,
            n_intervals=len(series),
            total_failures=series.total_failures,
            total_time=series.total_time,
            time_unit=series.time_unit,
            llf=llf,
            llf_rounded=llf_rounded,
            sse=evaluation.sse(spec, series),
            mse=evaluation.mse(spec, series, k) if len(series) > k else None,
        )
        if kind.uses_debug:
            result.p, result.r = spec.debug.p, spec.debug.r
        if kind is ModelKind.PROPOSED:
            result.gamma = spec.gamma
            result.mu = mu_from_gamma(spec.gamma)
        if not kind.time_linear:
            result.r_phi, result.r_n = stationarity_residuals(spec, series)

        result.remaining_faults = float(remaining_faults(spec, series))
        result.next_expected_interval = evaluation.next_expected_interval(spec, series)
        result.next_interval_hazard = max(next_interval_hazard(spec, series), 0.0)
        if self.options.mission_times and result.remaining_faults > 0:
            curve = reliability_curve(spec, series, self.options.mission_times)
            result.mission_reliability = [
                {'t': float(t), 'reliability': float(R)} for t, R in zip(self.options.mission_times, curve)
            ]
        return result


def fit_model(series, kind, options=None):
    """Fit one model to one series with the given options."""
    return ModelFitter(options).fit(series, kind)


def summary_line(result):
    """One-line human summary of a FitResult."""
    if not result.ok:
        return f"{result.release_id} {result.kind.label}: FAILED ({result.error})"
    parts = [f"phi={result.phi:.4E}", f"N={result.n_initial:.4f} (rounded {result.n_rounded})"]
    if result.gamma is not None:
        parts.append(f"gamma={result.gamma:.4f} (mu={result.mu:.4f})")
    mse = 'n/a' if result.mse is None else f"{result.mse:.6g}"
    parts += [f"LLF={result.llf:.6g}", f"SSE={result.sse:.6g}", f"MSE={mse}"]
    return f"{result.release_id} {result.kind.label}: " + ', '.join(parts)
