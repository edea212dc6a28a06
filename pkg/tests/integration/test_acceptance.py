"""
End-to-end checks of the fitter on synthetic JM data with known parameters.

These run the full default swarm and take tens of seconds; deselect with
``-m "not slow"``.
"""

import numpy as np
import pytest

from relifit.fitter import FitOptions, ModelFitter, default_bounds
from relifit.likelihood import log_likelihood
from relifit.model import ModelKind, ModelSpec
from relifit.reports import to_json
from tests.conftest import REFERENCE_FAILURES, REFERENCE_N, REFERENCE_PHI, reference_series

pytestmark = [pytest.mark.integration, pytest.mark.slow]

GRID_SIZE = 100


def grid_minimum(series, bounds):
    """Smallest -LLF over a GRID_SIZE x GRID_SIZE grid of log(phi) x N."""
    phis = np.geomspace(bounds['phi'].lo, bounds['phi'].hi, GRID_SIZE)
    ns = np.linspace(bounds['N'].lo, bounds['N'].hi, GRID_SIZE)
    best = np.inf
    for n_initial in ns:
        for phi in phis:
            llf = log_likelihood(ModelSpec(ModelKind.JM, float(phi), float(n_initial)), series)
            if llf is not None:
                best = min(best, -llf)
    return best


def test_swarm_beats_exhaustive_grid(synthetic_jm_series):
    options = FitOptions()
    result = ModelFitter(options).fit(synthetic_jm_series, 'jm')
    bounds = default_bounds(synthetic_jm_series, options, ('phi', 'N'))

    assert -result.llf <= grid_minimum(synthetic_jm_series, bounds) + 1e-6
    assert abs(result.r_phi) < 1e-3 * len(synthetic_jm_series)
    assert abs(result.r_n) < 1e-3 * synthetic_jm_series.total_time


def test_parameter_recovery():
    fitter = ModelFitter(FitOptions())
    results = [fitter.fit(reference_series(seed), 'jm') for seed in range(20)]
    assert all(r.n_intervals == REFERENCE_FAILURES for r in results)

    median_n = float(np.median([r.n_initial for r in results]))
    median_phi = float(np.median([r.phi for r in results]))
    assert median_n == pytest.approx(REFERENCE_N, rel=0.15)
    assert median_phi == pytest.approx(REFERENCE_PHI, rel=0.30)


def test_same_seed_same_bytes(synthetic_jm_series):
    options = FitOptions()
    first = to_json(ModelFitter(options).fit(synthetic_jm_series, 'jm').to_dict())
    second = to_json(ModelFitter(options).fit(synthetic_jm_series, 'jm').to_dict())
    assert first == second
