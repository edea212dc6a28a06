import json
import math

import pytest

from relifit.config import get_config
from relifit.exceptions import DomainError, FitError
from relifit.fitter import (FitOptions, FitResult, GammaMode, ModelFitter, default_bounds, fit_model,
                            round_half_up, summary_line)
from relifit.likelihood import log_likelihood
from relifit.model import ModelKind
from relifit.reports import to_json, validate_document


@pytest.fixture
def options(fast_swarm):
    return FitOptions(swarm=fast_swarm)


class TestFitOptions:
    def test_defaults(self):
        options = FitOptions()
        assert (options.p, options.r) == (0.95, 0.03)
        assert options.gamma_mode is GammaMode.ESTIMATE

    def test_one_gamma_mode(self):
        with pytest.raises(DomainError, match='at most one'):
            FitOptions(gamma=2.0, mu=0.5)
        with pytest.raises(DomainError):
            FitOptions(estimate_gamma=True, profile_gamma=(1.0, 2.0, 0.5))

    def test_p_greater_than_r(self):
        with pytest.raises(DomainError, match='p must exceed'):
            FitOptions(p=0.03, r=0.95)

    def test_fixed_gamma_from_mu(self):
        options = FitOptions(mu=0.5)
        assert options.gamma_mode is GammaMode.FIXED
        assert options.fixed_gamma == pytest.approx(1.5)

    def test_gamma_domain(self):
        with pytest.raises(DomainError):
            FitOptions(gamma=0.5)
        with pytest.raises(DomainError):
            FitOptions(mu=1.5)

    def test_profile_grid(self):
        options = FitOptions(profile_gamma=(1.0, 2.0, 0.25))
        assert options.gamma_mode is GammaMode.PROFILE
        assert options.profile_grid() == pytest.approx([1.0, 1.25, 1.5, 1.75, 2.0])

    @pytest.mark.parametrize('grid', [(0.5, 2.0, 0.5), (2.0, 1.0, 0.5), (1.0, 2.0, 0.0)])
    def test_invalid_profile_grid(self, grid):
        with pytest.raises(DomainError):
            FitOptions(profile_gamma=grid)

    def test_mission_times(self):
        with pytest.raises(DomainError):
            FitOptions(mission_times=(-1.0,))

    def test_from_config(self):
        config = get_config()
        config['swarm']['max_iters'] = 77
        options = FitOptions.from_config(config, p=0.9, gamma=None)
        assert options.p == 0.9
        assert options.swarm.max_iters == 77
        assert options.gamma is None


def test_default_bounds(small_series):
    bounds = default_bounds(small_series, FitOptions(), ('phi', 'N', 'gamma'))
    assert (bounds['phi'].lo, bounds['phi'].hi, bounds['phi'].scale) == (1e-8, 1e-1, 'log')
    assert (bounds['N'].lo, bounds['N'].hi) == (10, 110)
    assert (bounds['gamma'].lo, bounds['gamma'].hi) == (1.0, 50.0)
    assert list(default_bounds(small_series, FitOptions(), ('phi', 'N'))) == ['phi', 'N']


def test_round_half_up():
    assert round_half_up(2.5) == 3
    assert round_half_up(3.4999) == 3
    assert round_half_up(41.5) == 42


class TestModelFitter:
    def test_jm_fit(self, small_series, options):
        result = ModelFitter(options).fit(small_series, 'jm')
        assert result.ok and result.feasible
        assert result.model == 'jm'
        assert result.n_initial >= small_series.total_failures
        assert result.n_rounded == math.floor(result.n_initial + 0.5)
        assert result.k_params == 2
        assert result.sse >= 0
        assert result.mse == pytest.approx(result.sse / (len(small_series) - 2))
        assert result.p is None and result.gamma is None
        assert result.remaining_faults == pytest.approx(result.n_initial - len(small_series))
        assert abs(result.r_phi) < 1e-6 * len(small_series) / result.phi
        assert result.evaluations == options.swarm.pop_size * options.swarm.max_iters
        assert len(result.trace_tail) == 10

    def test_llf_at_rounded_n(self, small_series, options):
        result = ModelFitter(options).fit(small_series, 'goi')
        spec = result.to_spec().with_params(n_initial=result.n_rounded)
        assert result.llf_rounded == pytest.approx(log_likelihood(spec, small_series))

    def test_time_linear_has_no_stationarity(self, small_series, options):
        result = ModelFitter(options).fit(small_series, ModelKind.MSW)
        assert result.ok
        assert result.r_phi is None and result.r_n is None

    def test_proposed_fixed_mu(self, small_series, fast_swarm):
        result = ModelFitter(FitOptions(mu=0.5, swarm=fast_swarm)).fit(small_series, 'proposed')
        assert result.gamma == pytest.approx(1.5)
        assert result.mu == pytest.approx(0.5)
        assert result.k_params == 2
        assert result.gamma_mode == 'fixed'
        assert (result.p, result.r) == (0.95, 0.03)

    def test_proposed_estimated_gamma(self, small_series, options):
        result = ModelFitter(options).fit(small_series, 'proposed')
        assert result.k_params == 3
        assert result.gamma_mode == 'estimate'
        assert 1.0 <= result.gamma <= 50.0
        assert 0.0 < result.mu <= 1.0

    def test_proposed_profile(self, small_series, fast_swarm):
        options = FitOptions(profile_gamma=(1.0, 3.0, 1.0), swarm=fast_swarm)
        result = ModelFitter(options).fit(small_series, 'proposed')
        assert [entry['gamma'] for entry in result.profile] == [1.0, 2.0, 3.0]
        assert result.gamma in (1.0, 2.0, 3.0)
        assert result.k_params == 3
        best = max(entry['llf'] for entry in result.profile if entry['llf'] is not None)
        assert result.llf >= best - 1e-9

    def test_no_feasible_point(self, small_series, fast_swarm):
        options = FitOptions(gamma=50.0, n_bounds=(1.0, 5.0), swarm=fast_swarm)
        with pytest.raises(FitError, match='no feasible'):
            ModelFitter(options).fit(small_series, 'proposed')

    def test_empty_series(self, fast_swarm):
        from relifit.data_processor import FailureSeries
        with pytest.raises(DomainError):
            ModelFitter(FitOptions(swarm=fast_swarm)).fit(FailureSeries('e', (), ()), 'jm')

    def test_mission_reliability(self, small_series, fast_swarm):
        options = FitOptions(swarm=fast_swarm, mission_times=(0.0, 5.0, 50.0))
        result = fit_model(small_series, 'jm', options)
        values = [entry['reliability'] for entry in result.mission_reliability]
        assert values[0] == 1.0
        assert values[0] > values[1] > values[2] > 0.0

    def test_deterministic(self, small_series, options):
        first = to_json(ModelFitter(options).fit(small_series, 'mahapatra').to_dict())
        second = to_json(ModelFitter(options).fit(small_series, 'mahapatra').to_dict())
        assert first == second


class TestFitResult:
    def test_dict_round_trip(self, small_series, options):
        result = ModelFitter(options).fit(small_series, 'proposed')
        document = json.loads(to_json(result.to_dict()))
        assert FitResult.from_dict(document) == result

    def test_schema(self, small_series, options):
        document = ModelFitter(options).fit(small_series, 'sw').to_dict()
        assert document['schema'] == 'relifit/1'
        validate_document(document, 'fit')

    def test_failed_result(self, small_series):
        result = FitResult.failed(small_series, 'jm', FitError('no feasible JM parameters'))
        document = result.to_dict()
        assert document['status'] == 'failed'
        assert document['error'] == {'code': 'E_FIT', 'message': 'no feasible JM parameters'}
        validate_document(document, 'fit')
        with pytest.raises(FitError):
            result.to_spec()

    def test_unknown_schema_tag(self):
        with pytest.raises(DomainError):
            FitResult.from_dict({'schema': 'other/2'})

    def test_summary_line(self, small_series, options):
        result = ModelFitter(options).fit(small_series, 'jm')
        line = summary_line(result)
        assert line.startswith('r1 JM: phi=')
        assert 'LLF=' in line and 'SSE=' in line and 'MSE=' in line
