import numpy as np
import pytest
from numpy.testing import assert_allclose

from relifit.data_processor import FailureSeries
from relifit.exceptions import DomainError, InfeasibleError, UnsupportedModelError
from relifit.likelihood import (PENALTY_BASE, Objective, conditional_phi, llf_gradient, log_likelihood,
                                log_likelihood_closed_form, penalized_objective, stationarity_residuals)
from relifit.model import DebugProbs, ModelKind, ModelSpec, Modulation, fault_correction
from relifit.optimizer import Bound
from tests.conftest import random_series

CONSTANT_KINDS = [ModelKind.JM, ModelKind.GOI, ModelKind.MAHAPATRA, ModelKind.PROPOSED]


def random_feasible_spec(rng, kind, series):
    """Random parameters with every bracket comfortably positive."""
    debug = DebugProbs(0.95, 0.03) if kind.uses_debug else None
    modulation = Modulation(rng.uniform(1.0, 3.0)) if kind is ModelKind.PROPOSED else None
    template = ModelSpec(kind, 1.0, 1.0, debug=debug, modulation=modulation)
    largest = float(np.max(fault_correction(template, series.index, series.cum_prev)))
    phi = float(np.exp(rng.uniform(np.log(1e-3), np.log(1e-1))))
    return template.with_params(phi=phi, n_initial=largest + rng.uniform(1.0, 20.0))


def central_difference(f, x, step):
    return (f(x + step) - f(x - step)) / (2.0 * step)


class TestLogLikelihood:
    def test_jm_by_hand(self, jm_spec):
        series = FailureSeries('r', (2.0, 3.0), (1, 1))
        expected = (np.log(0.1) - 0.1 * 2.0) + (np.log(0.09) - 0.09 * 3.0)
        assert log_likelihood(jm_spec, series) == pytest.approx(expected, abs=1e-12)

    def test_sw_by_hand(self):
        spec = ModelSpec(ModelKind.SW, 0.01, 10)
        series = FailureSeries('r', (2.0,), (1,))
        expected = np.log(0.1 * 2.0) - 0.1 * 4.0 / 2.0
        assert log_likelihood(spec, series) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize('kind', CONSTANT_KINDS)
    def test_two_routes_agree(self, kind):
        rng = np.random.default_rng(11)
        for _ in range(50):
            series = random_series(rng, int(rng.integers(2, 40)))
            spec = random_feasible_spec(rng, kind, series)
            assert abs(log_likelihood(spec, series) - log_likelihood_closed_form(spec, series)) < 1e-10

    def test_infeasible_returns_none(self):
        spec = ModelSpec(ModelKind.JM, 0.01, 2)
        series = FailureSeries('r', (1.0, 1.0, 1.0), (1, 1, 1))
        assert log_likelihood(spec, series) is None

    def test_empty_series(self, jm_spec):
        with pytest.raises(DomainError):
            log_likelihood(jm_spec, FailureSeries('empty', (), ()))

    def test_closed_form_rejects_time_linear(self, small_series):
        with pytest.raises(UnsupportedModelError):
            log_likelihood_closed_form(ModelSpec(ModelKind.SW, 0.01, 50), small_series)


class TestGradient:
    @pytest.mark.parametrize('kind', CONSTANT_KINDS)
    def test_matches_finite_differences(self, kind):
        rng = np.random.default_rng(23)
        for _ in range(50):
            series = random_series(rng, int(rng.integers(2, 30)))
            spec = random_feasible_spec(rng, kind, series)
            gradient = llf_gradient(spec, series)

            d_phi = central_difference(
                lambda v: log_likelihood(spec.with_params(phi=v), series), spec.phi, 1e-5 * spec.phi)
            d_n = central_difference(
                lambda v: log_likelihood(spec.with_params(n_initial=v), series), spec.n_initial, 1e-5)
            assert_allclose(gradient.phi, d_phi, rtol=1e-5, atol=1e-6 * len(series) / spec.phi)
            assert_allclose(gradient.n_initial, d_n, rtol=1e-5, atol=1e-6)

            if kind is ModelKind.PROPOSED:
                d_gamma = central_difference(
                    lambda v: log_likelihood(spec.with_params(gamma=v), series), spec.gamma, 1e-6)
                assert_allclose(gradient.gamma, d_gamma, rtol=1e-5, atol=1e-6)
            else:
                assert gradient.gamma is None

    def test_stationarity_at_conditional_phi(self, small_series, jm_spec):
        spec = jm_spec.with_params(n_initial=40.0)
        spec = spec.with_params(phi=conditional_phi(spec, small_series))
        r_phi, _ = stationarity_residuals(spec, small_series)
        assert abs(r_phi) < 1e-9 * len(small_series) / spec.phi

    def test_time_linear_unsupported(self, small_series):
        with pytest.raises(UnsupportedModelError):
            llf_gradient(ModelSpec(ModelKind.MSW, 0.001, 50), small_series)

    def test_infeasible(self):
        series = FailureSeries('r', (1.0, 1.0, 1.0), (1, 1, 1))
        with pytest.raises(InfeasibleError):
            stationarity_residuals(ModelSpec(ModelKind.JM, 0.01, 2), series)


class TestConditionalPhi:
    @pytest.mark.parametrize('kind', [ModelKind.JM, ModelKind.SW])
    def test_is_a_maximum(self, kind, small_series):
        spec = ModelSpec(kind, 0.01, 40)
        best = spec.with_params(phi=conditional_phi(spec, small_series))
        for factor in (0.9, 0.99, 1.01, 1.1):
            assert log_likelihood(best, small_series) > log_likelihood(
                best.with_params(phi=best.phi * factor), small_series)


class TestObjective:
    def _objective(self, series, free=('phi', 'N')):
        bounds = {'phi': Bound(1e-6, 1.0, 'log'), 'N': Bound(1.0, 200.0), 'gamma': Bound(1.0, 10.0)}
        template = ModelSpec(ModelKind.JM, 1.0, 10)
        return Objective(template, series, free, {k: bounds[k] for k in free})

    def test_value_is_negative_llf(self, small_series):
        objective = self._objective(small_series)
        spec = ModelSpec(ModelKind.JM, 0.01, 50)
        assert objective([0.01, 50.0]) == pytest.approx(-log_likelihood(spec, small_series))

    def test_penalty_exceeds_feasible_values(self, small_series):
        objective = self._objective(small_series)
        infeasible = penalized_objective(objective, [0.01, 2.0])
        worse = penalized_objective(objective, [0.01, 1.0])
        assert infeasible > PENALTY_BASE
        assert worse > infeasible
        assert objective([1e-6, 200.0]) < PENALTY_BASE

    def test_gamma_only_for_proposed(self, small_series):
        with pytest.raises(DomainError, match='only estimated for the Proposed'):
            self._objective(small_series, free=('phi', 'N', 'gamma'))

    def test_unknown_parameter(self, small_series):
        with pytest.raises(DomainError):
            Objective(ModelSpec(ModelKind.JM, 1.0, 10), small_series, ('p',), {'p': Bound(0.1, 0.9)})

    def test_missing_bound(self, small_series):
        with pytest.raises(DomainError, match='missing bound'):
            Objective(ModelSpec(ModelKind.JM, 1.0, 10), small_series, ('phi', 'N'),
                      {'phi': Bound(1e-6, 1.0, 'log')})

    def test_spec_at(self, small_series):
        objective = self._objective(small_series)
        spec = objective.spec_at([0.02, 33.0])
        assert spec.phi == 0.02 and spec.n_initial == 33.0
