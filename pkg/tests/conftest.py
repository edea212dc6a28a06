import os

import numpy as np
import pytest

from relifit.config import reset_config
from relifit.data_processor import FailureSeries
from relifit.model import DebugProbs, ModelKind, ModelSpec, Modulation
from relifit.optimizer import SwarmConfig
from relifit.simulation import simulate_series

FIXTURES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'fixtures')

# generator of the optimizer and recovery checks: N=50, phi=0.001, 40 failures
REFERENCE_N = 50
REFERENCE_PHI = 0.001
REFERENCE_FAILURES = 40


@pytest.fixture(autouse=True)
def clean_config(monkeypatch):
    for variable in ('RELIFIT_LOG_LEVEL', 'RELIFIT_WORKERS', 'RELIFIT_SEED'):
        monkeypatch.delenv(variable, raising=False)
    reset_config()
    yield
    reset_config()


@pytest.fixture
def fixtures_dir():
    return FIXTURES_DIR


@pytest.fixture
def fast_swarm():
    return SwarmConfig(pop_size=20, max_iters=150, seed=7)


@pytest.fixture
def debug():
    return DebugProbs(0.95, 0.03)


@pytest.fixture
def jm_spec():
    return ModelSpec(ModelKind.JM, 0.01, 10)


@pytest.fixture
def proposed_spec(debug):
    return ModelSpec(ModelKind.PROPOSED, 0.002, 60, debug=debug, modulation=Modulation(1.5))


@pytest.fixture
def small_series():
    return FailureSeries('r1', (4.0, 6.0, 5.0, 9.0, 12.0, 10.0, 17.0, 25.0), (1, 1, 2, 1, 1, 2, 1, 1), 'hours')


def reference_series(seed):
    spec = ModelSpec(ModelKind.JM, REFERENCE_PHI, REFERENCE_N)
    return simulate_series(spec, REFERENCE_FAILURES, seed=seed, release_id=f'sim-{seed}')


@pytest.fixture
def synthetic_jm_series():
    return reference_series(2024)


def random_series(rng, n_intervals, max_failures=3, release_id='rand'):
    """Series with random interval lengths and 1..max_failures failures per interval."""
    intervals = rng.uniform(0.5, 20.0, size=n_intervals)
    failures = rng.integers(1, max_failures + 1, size=n_intervals)
    return FailureSeries(release_id, tuple(intervals), tuple(int(k) for k in failures))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_file(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return str(path)
    return _write
