"""
Hybrid particle-swarm / gravitational-search minimizer.

Agents move in the unit box. Each generation the gravitational term pulls
every agent toward heavier (fitter) agents while the swarm term pulls it
toward the best position found so far; the gravitational constant decays so
that exploration gives way to exploitation.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import List, Tuple

import numpy as np

from relifit.exceptions import DomainError

logger = logging.getLogger(__name__)

SCALES = ('linear', 'log')


@dataclass(frozen=True)
class Bound:
    """Search interval of one parameter, searched on a linear or log scale."""

    lo: float
    hi: float
    scale: str = 'linear'

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
            raise DomainError(f"bounds must be finite with lo < hi (got [{lo}, {hi}])")
        if self.scale not in SCALES:
            raise DomainError(f"bound scale must be one of {SCALES} (got '{self.scale}')")
        if self.scale == 'log' and lo <= 0:
            raise DomainError(f"log-scale bounds must be positive (got lo={lo})")
        object.__setattr__(self, 'lo', lo)
        object.__setattr__(self, 'hi', hi)

    def to_natural(self, u):
        if self.scale == 'log':
            x = math.exp(math.log(self.lo) + u * (math.log(self.hi) - math.log(self.lo)))
        else:
            x = self.lo + u * (self.hi - self.lo)
        return min(max(x, self.lo), self.hi)

    def to_unit(self, x):
        if self.scale == 'log':
            return (math.log(x) - math.log(self.lo)) / (math.log(self.hi) - math.log(self.lo))
        return (x - self.lo) / (self.hi - self.lo)


@dataclass(frozen=True)
class SwarmConfig:
    """
    Hyperparameters of the hybrid swarm.

    Args:
        pop_size: Number of agents
        max_iters: Number of generations
        c1: Weight of the gravitational acceleration term
        c2: Weight of the pull toward the global best
        w_start: Inertia weight at the first generation
        w_end: Inertia weight at the last generation
        g0: Initial gravitational constant
        alpha: Decay rate of the gravitational constant
        eps: Regularizer for distances and zero masses
        seed: Master seed; per-agent streams are spawned from it
        vmax_frac: Velocity clamp as a fraction of the box width
    """

    pop_size: int = 30
    max_iters: int = 1000
    c1: float = 0.5
    c2: float = 1.5
    w_start: float = 0.9
    w_end: float = 0.4
    g0: float = 100.0
    alpha: float = 20.0
    eps: float = 1e-9
    seed: int = 0
    vmax_frac: float = 0.2

    def __post_init__(self):
        if int(self.pop_size) < 2:
            raise DomainError(f"pop_size must be >= 2 (got {self.pop_size})")
        if int(self.max_iters) < 1:
            raise DomainError(f"max_iters must be >= 1 (got {self.max_iters})")
        for name in ('c1', 'c2', 'w_start', 'w_end', 'g0', 'alpha', 'eps'):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be >= 0 (got {getattr(self, name)})")
        if not 0 < self.vmax_frac <= 1:
            raise DomainError(f"vmax_frac must lie in (0, 1] (got {self.vmax_frac})")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer (got {self.seed})")
        object.__setattr__(self, 'pop_size', int(self.pop_size))
        object.__setattr__(self, 'max_iters', int(self.max_iters))
        object.__setattr__(self, 'seed', int(self.seed))

    @classmethod
    def from_dict(cls, values):
        """Build from a config mapping, ignoring unrelated keys."""
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names and v is not None})

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SwarmState:
    """Population state of one generation, in unit-box coordinates."""

    positions: np.ndarray
    velocities: np.ndarray
    fitness: np.ndarray
    gbest_x: np.ndarray
    gbest_f: float = math.inf
    iter: int = 0


@dataclass(frozen=True)
class OptimizeResult:
    best_x: Tuple[float, ...]
    best_f: float
    trace: Tuple[float, ...]
    evaluations: int
    seed: int
    state: SwarmState = field(repr=False, compare=False, default=None)


def mass_distribution(fitness):
    """
    Normalized gravitational masses for a minimization problem.

    Args:
        fitness: Objective values of the agents (lower is better)

    Returns:
        Masses summing to 1; the best agent is heaviest, the worst weighs 0,
        and all masses are equal when every agent has the same fitness.
    """
    fitness = np.asarray(fitness, dtype=float)
    if fitness.ndim != 1 or fitness.size < 2:
        raise DomainError("mass_distribution needs a vector of at least two fitness values")
    finite = np.isfinite(fitness)
    if not finite.any():
        return np.full(fitness.size, 1.0 / fitness.size)
    # non-finite agents are as bad as the worst finite one
    fitness = np.where(finite, fitness, np.max(fitness[finite]))
    best, worst = fitness.min(), fitness.max()
    if best == worst:
        return np.full(fitness.size, 1.0 / fitness.size)
    masses = (fitness - worst) / (best - worst)
    return masses / masses.sum()


def gravitational_acceleration(positions, masses, gravity, rngs, eps):
    """
    Acceleration of every agent under the pull of all others.

    Args:
        positions: pop_size x dim positions
        masses: Normalized masses
        gravity: Current gravitational constant
        rngs: One generator per agent, used for the pair weights
        eps: Distance and zero-mass regularizer

    Returns:
        pop_size x dim accelerations
    """
    n = positions.shape[0]
    diff = positions[np.newaxis, :, :] - positions[:, np.newaxis, :]
    distance = np.sqrt(np.sum(diff * diff, axis=2))
    weights = np.stack([rng.random(n) for rng in rngs])
    coefficient = gravity * weights * masses[:, np.newaxis] * masses[np.newaxis, :] / (distance + eps)
    np.fill_diagonal(coefficient, 0.0)
    force = np.einsum('ij,ijd->id', coefficient, diff)
    inertial = np.where(masses > 0, masses, eps)
    return force / inertial[:, np.newaxis]


class SwarmOptimizer:
    def __init__(self, bounds, config=None, workers=1):
        """
        Bounded derivative-free minimizer.

        Args:
            bounds: Sequence of Bound, one per dimension
            config: SwarmConfig
            workers: Threads used to evaluate a generation's fitness
        """
        if not bounds:
            raise DomainError("at least one bound is required")
        self.bounds = [b if isinstance(b, Bound) else Bound(*b) for b in bounds]
        self.config = config or SwarmConfig()
        self.workers = max(1, int(workers))
        self.dim = len(self.bounds)

    def to_natural(self, u):
        return np.array([b.to_natural(float(x)) for b, x in zip(self.bounds, u)])

    def _evaluate(self, objective, positions, executor):
        points = [self.to_natural(u) for u in positions]
        if executor is not None:
            values = list(executor.map(objective, points))
        else:
            values = [objective(x) for x in points]
        fitness = np.array([float(v) for v in values], dtype=float)
        return np.where(np.isnan(fitness), np.inf, fitness)

    def _initial_state(self, rngs):
        cfg = self.config
        positions = np.stack([rng.random(self.dim) for rng in rngs])
        velocities = np.zeros((cfg.pop_size, self.dim))
        return SwarmState(
            positions=positions,
            velocities=velocities,
            fitness=np.full(cfg.pop_size, np.inf),
            gbest_x=positions[0].copy(),
        )

    def _move(self, state, rngs):
        cfg = self.config
        progress = state.iter / cfg.max_iters
        gravity = cfg.g0 * math.exp(-cfg.alpha * progress)
        inertia = cfg.w_start - (cfg.w_start - cfg.w_end) * state.iter / max(cfg.max_iters - 1, 1)

        masses = mass_distribution(state.fitness)
        acceleration = gravitational_acceleration(state.positions, masses, gravity, rngs, cfg.eps)
        r1 = np.stack([rng.random(self.dim) for rng in rngs])
        r2 = np.stack([rng.random(self.dim) for rng in rngs])

        velocities = (inertia * state.velocities
                      + cfg.c1 * r1 * acceleration
                      + cfg.c2 * r2 * (state.gbest_x[np.newaxis, :] - state.positions))
        state.velocities = np.clip(velocities, -cfg.vmax_frac, cfg.vmax_frac)
        state.positions = np.clip(state.positions + state.velocities, 0.0, 1.0)

    def minimize(self, objective):
        """
        Minimize objective over the box.

        Args:
            objective: Callable taking a natural-scale parameter vector

        Returns:
            OptimizeResult with the best-ever point and the per-generation trace
        """
        cfg = self.config
        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.pop_size)]
        state = self._initial_state(rngs)
        trace: List[float] = []
        evaluations = 0

        executor = ThreadPoolExecutor(max_workers=self.workers) if self.workers > 1 else None
        try:
            for generation in range(cfg.max_iters):
                state.iter = generation
                state.fitness = self._evaluate(objective, state.positions, executor)
                evaluations += cfg.pop_size

                leader = int(np.argmin(state.fitness))
                if state.fitness[leader] < state.gbest_f:
                    state.gbest_f = float(state.fitness[leader])
                    state.gbest_x = state.positions[leader].copy()
                trace.append(state.gbest_f)

                if generation % 100 == 0:
                    logger.debug(f"Generation {generation}/{cfg.max_iters}: best {state.gbest_f:.6g}")
                if generation < cfg.max_iters - 1:
                    self._move(state, rngs)
        finally:
            if executor is not None:
                executor.shutdown(wait=True)

        best_x = tuple(float(x) for x in self.to_natural(state.gbest_x))
        return OptimizeResult(best_x, float(state.gbest_f), tuple(trace), evaluations, cfg.seed, state)


def minimize(objective, bounds, config=None, workers=1):
    """
    Minimize a function over a box with the hybrid swarm.

    Args:
        objective: Callable on a natural-scale parameter vector
        bounds: Sequence of Bound (or (lo, hi, scale) tuples)
        config: SwarmConfig (defaults when None)
        workers: Concurrent fitness evaluations per generation

    Returns:
        OptimizeResult (best_x, best_f, trace, ...)
    """
    return SwarmOptimizer(bounds, config, workers).minimize(objective)
