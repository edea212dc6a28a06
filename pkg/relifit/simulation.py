import logging
import math

import numpy as np

from relifit.data_processor import FailureSeries
from relifit.exceptions import DomainError, InfeasibleError
from relifit.model import hazard_coefficient, remaining_fault_term

logger = logging.getLogger(__name__)


class FailureProcessSimulation:
    def __init__(self, spec, seed=None, uniforms=None, max_failures=None):
        """
        Step-wise failure process driven by a model's intensity.

        Every step produces one failure; interval lengths are drawn by
        inversion of the model's survival function.

        Args:
            spec: ModelSpec generating the failures
            seed: Seed for the random generator
            uniforms: Optional fixed sequence of uniforms in (0, 1) used instead of the generator
            max_failures: Episode length; None runs until the model is exhausted
        """
        self.spec = spec
        self.seed = seed
        self.uniforms = None if uniforms is None else [float(u) for u in uniforms]
        self.max_failures = max_failures
        self.reset()

    def reset(self):
        """
        Start a new episode.

        Returns:
            Initial state (interval index, cumulative failures)
        """
        self.rng = np.random.default_rng(self.seed)
        self.index = 1
        self.cum_prev = 0
        self.elapsed = 0.0
        self.intervals = []
        return self._get_observation()

    def _next_uniform(self):
        if self.uniforms is not None:
            position = self.index - 1
            if position >= len(self.uniforms):
                raise DomainError(f"only {len(self.uniforms)} uniform(s) supplied")
            u = self.uniforms[position]
            if not 0.0 < u < 1.0:
                raise DomainError(f"supplied uniforms must lie in (0, 1) (got {u})")
            return u
        u = self.rng.random()
        while u == 0.0:
            u = self.rng.random()
        return u

    def step(self):
        """
        Advance to the next failure.

        Returns:
            (next_state, interval, done, info)
        """
        bracket = remaining_fault_term(self.spec, self.index, self.cum_prev)
        if not bracket > 0:
            raise InfeasibleError(
                f"{self.spec.kind.label} model exhausted at interval {self.index}",
                index=self.index, bracket=bracket)
        coefficient = hazard_coefficient(self.spec, self.index, self.cum_prev)
        u = self._next_uniform()
        if self.spec.kind.time_linear:
            interval = math.sqrt(-2.0 * math.log(u) / coefficient)
        else:
            interval = -math.log(u) / coefficient

        info = {
            'index': self.index,
            'coefficient': coefficient,
            'remaining_faults': bracket,
        }
        self.intervals.append(interval)
        self.elapsed += interval
        self.index += 1
        self.cum_prev += 1

        done = self.max_failures is not None and len(self.intervals) >= self.max_failures
        return self._get_observation(), interval, done, info

    def _get_observation(self):
        return self.index, self.cum_prev


def simulate_series(spec, n_failures, seed=None, release_id='sim', uniforms=None):
    """
    Draw a synthetic failure series with one failure per interval.

    Args:
        spec: Generating ModelSpec
        n_failures: Number of failures to draw
        seed: Random seed
        release_id: Label of the emitted series
        uniforms: Optional uniforms replacing the generator (inverse-CDF checks)

    Returns:
        FailureSeries
    """
    n_failures = int(n_failures)
    if n_failures < 1:
        raise DomainError(f"n_failures must be >= 1 (got {n_failures})")
    if n_failures >= spec.n_initial:
        raise InfeasibleError(
            f"cannot draw {n_failures} failures from a model with N = {spec.n_initial:g} initial faults")
    index = np.arange(1, n_failures + 1)
    brackets = remaining_fault_term(spec, index, index - 1)
    if np.any(brackets <= 0):
        first = int(index[np.argmax(brackets <= 0)])
        raise InfeasibleError(f"{spec.kind.label} model exhausted at interval {first}", index=first)

    sim = FailureProcessSimulation(spec, seed=seed, uniforms=uniforms, max_failures=n_failures)
    done = False
    while not done:
        _, _, done, _ = sim.step()
    logger.debug(f"Simulated {n_failures} failure(s) from {spec.kind.label} (seed={seed})")
    return FailureSeries(release_id, tuple(sim.intervals), (1,) * n_failures)
