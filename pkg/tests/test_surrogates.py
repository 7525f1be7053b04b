"""Gaussian process and forest surrogates plus the acquisition rule.

The expected-improvement closed form is checked against direct numerical
integration of the improvement integrand, which is the definition.
"""

import math
from types import SimpleNamespace

import numpy as np
import pytest
import scipy.integrate

from reqforge.errors import ContractError, FitError
from reqforge.hpo.space import encode, encode_batch, sample_batch, space_for_task
from reqforge.hpo.surrogates import (
    GP_SIGNAL_FLOOR,
    RF_VARIANCE_FLOOR,
    GPModel,
    expected_improvement,
    fit_surrogate,
    predict,
    propose_next,
)
from reqforge.schema import Task

SPACE = space_for_task(Task.CLASSIFICATION)


def _history(n, seed, fn):
    """n trials whose metric is fn(encoded setting)."""
    batch = sample_batch(SPACE, np.random.default_rng(seed), n)
    out = []
    for i in range(n):
        setting = batch.setting(i)
        out.append(
            SimpleNamespace(setting=setting, metric_value=fn(encode(SPACE, setting)))
        )
    return out


def _smooth(x):
    return float(np.exp(-np.sum((x[8:] - 0.4) ** 2)))


class TestGP:
    def test_needs_two_observations(self):
        with pytest.raises(ContractError, match="at least 2"):
            fit_surrogate("gp", _history(1, 0, _smooth), SPACE)

    def test_interpolates_training_targets(self):
        hist = _history(20, 11, _smooth)
        model = fit_surrogate("gp", hist, SPACE)
        xs = np.stack([encode(SPACE, t.setting) for t in hist])
        mean, var = model.predict_batch(xs)
        targets = np.array([t.metric_value for t in hist])
        assert np.max(np.abs(mean - targets)) < 1e-6
        assert np.all(var < 1e-4)

    def test_reverts_to_prior_far_from_data(self):
        hist = _history(12, 3, _smooth)
        model = fit_surrogate("gp", hist, SPACE)
        targets = np.array([t.metric_value for t in hist])
        # 40 length scales away along one axis kills every correlation
        far = np.zeros((1, 12))
        far[0, 8] = 20.0
        mean, var = model.predict_batch(far)
        assert mean[0] == pytest.approx(np.mean(targets), rel=1e-6)
        assert var[0] == pytest.approx(np.var(targets, ddof=1), rel=0.01)

    def test_constant_targets_floor_the_signal_variance(self):
        hist = _history(6, 5, lambda x: 0.7)
        model = fit_surrogate("gp", hist, SPACE)
        far = np.full((1, 12), 30.0)
        mean, var = model.predict_batch(far)
        assert mean[0] == pytest.approx(0.7)
        assert var[0] == pytest.approx(GP_SIGNAL_FLOOR, rel=1e-6)

    def test_duplicate_points_average_instead_of_failing(self):
        x = np.tile(np.linspace(0.1, 0.9, 12), (4, 1))
        model = GPModel.fit(x, np.array([0.4, 0.5, 0.6, 0.5]))
        mean, _ = model.predict_batch(x[:1])
        assert mean[0] == pytest.approx(0.5, abs=0.01)

    def test_jitter_escalates_past_transient_failures(self, monkeypatch):
        real = np.linalg.cholesky
        failures = iter([True, True])

        def flaky(mat):
            if next(failures, False):
                raise np.linalg.LinAlgError("singular")
            return real(mat)

        monkeypatch.setattr(np.linalg, "cholesky", flaky)
        model = fit_surrogate("gp", _history(6, 2, _smooth), SPACE)
        assert model.jitter == pytest.approx(1e-4)

    def test_unrecoverable_kernel_raises_fit_error(self, monkeypatch):
        def always_singular(_):
            raise np.linalg.LinAlgError("singular")

        monkeypatch.setattr(np.linalg, "cholesky", always_singular)
        with pytest.raises(FitError, match="stayed singular"):
            fit_surrogate("gp", _history(4, 2, _smooth), SPACE)

    def test_scalar_predict_matches_batch(self):
        hist = _history(10, 7, _smooth)
        model = fit_surrogate("gp", hist, SPACE)
        point = encode(SPACE, sample_batch(SPACE, np.random.default_rng(99), 1).setting(0))
        mean, var = predict(model, point)
        bm, bv = model.predict_batch(point[None, :])
        assert isinstance(mean, float) and isinstance(var, float)
        assert mean == bm[0] and var == bv[0]


class TestForest:
    def test_constant_targets_predict_the_constant(self):
        hist = _history(8, 4, lambda x: 0.55)
        model = fit_surrogate("rf", hist, SPACE)
        pool = encode_batch(sample_batch(SPACE, np.random.default_rng(0), 64))
        mean, var = model.predict_batch(pool)
        assert np.allclose(mean, 0.55)
        assert np.allclose(var, RF_VARIANCE_FLOOR)

    def test_predictions_stay_within_target_range(self):
        hist = _history(40, 6, _smooth)
        model = fit_surrogate("rf", hist, SPACE)
        pool = encode_batch(sample_batch(SPACE, np.random.default_rng(1), 512))
        mean, _ = model.predict_batch(pool)
        targets = [t.metric_value for t in hist]
        assert np.all(mean >= min(targets) - 1e-12)
        assert np.all(mean <= max(targets) + 1e-12)

    def test_fit_is_deterministic_per_seed(self):
        hist = _history(30, 8, _smooth)
        pool = encode_batch(sample_batch(SPACE, np.random.default_rng(2), 128))
        a, _ = fit_surrogate("rf", hist, SPACE, rng_seed=5).predict_batch(pool)
        b, _ = fit_surrogate("rf", hist, SPACE, rng_seed=5).predict_batch(pool)
        c, _ = fit_surrogate("rf", hist, SPACE, rng_seed=6).predict_batch(pool)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown surrogate kind"):
            fit_surrogate("boost", _history(4, 0, _smooth), SPACE)


def _ei_by_quadrature(mean, sigma, best, xi):
    lo = best + xi

    def integrand(y):
        pdf = math.exp(-0.5 * ((y - mean) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        return (y - lo) * pdf

    hi = max(mean, lo) + 15 * sigma
    value, _ = scipy.integrate.quad(integrand, lo, hi, limit=200)
    return value


class TestExpectedImprovement:
    def test_no_variance_no_edge_means_zero(self):
        assert expected_improvement(0.5, 0.0, 0.5) == 0.0
        assert expected_improvement(0.4, 0.0, 0.5) == 0.0

    def test_no_variance_with_edge_is_the_edge(self):
        assert expected_improvement(0.9, 0.0, 0.5, xi=0.0) == pytest.approx(0.4)
        assert expected_improvement(0.9, 0.0, 0.5, xi=0.01) == pytest.approx(0.39)

    def test_negative_variance_rejected(self):
        with pytest.raises(ContractError, match="non-negative"):
            expected_improvement(0.5, -1e-9, 0.4)

    def test_matches_numerical_integration(self):
        rng = np.random.default_rng(314)
        for _ in range(100):
            mean = rng.uniform(-1, 1)
            sigma = rng.uniform(0.01, 1.0)
            best = rng.uniform(-1, 1)
            xi = rng.choice([0.0, 0.01, 0.1])
            closed = expected_improvement(mean, sigma**2, best, xi=xi)
            assert closed == pytest.approx(
                _ei_by_quadrature(mean, sigma, best, xi), abs=1e-6
            )

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(9)
        means = rng.uniform(0, 1, 50)
        variances = rng.uniform(0, 0.2, 50)
        out = expected_improvement(means, variances, 0.6)
        assert out.shape == (50,)
        for i in range(50):
            assert out[i] == expected_improvement(means[i], variances[i], 0.6)

    def test_monotone_in_mean_at_fixed_variance(self):
        means = np.linspace(0.0, 1.0, 200)
        ei = expected_improvement(means, 0.05, 0.5)
        assert np.all(np.diff(ei) >= 0)
        assert np.all(ei >= 0)


class _StubModel:
    """Constant posterior, so every candidate ties on EI."""

    def predict_batch(self, points):
        n = len(points)
        return np.full(n, 0.5), np.full(n, 0.04)


class TestProposeNext:
    def test_requires_history(self):
        with pytest.raises(ContractError, match="non-empty history"):
            propose_next(_StubModel(), SPACE, [], rng_seed=0)

    def test_ties_resolve_to_the_first_pool_candidate(self):
        hist = _history(3, 0, _smooth)
        chosen = propose_next(_StubModel(), SPACE, hist, rng_seed=123, pool_size=64)
        pool = sample_batch(SPACE, np.random.default_rng(123), 64)
        assert chosen == pool.setting(0)

    def test_choice_is_the_pool_argmax_of_ei(self):
        hist = _history(16, 10, _smooth)
        model = fit_surrogate("gp", hist, SPACE)
        chosen = propose_next(model, SPACE, hist, rng_seed=77, pool_size=256)
        pool = sample_batch(SPACE, np.random.default_rng(77), 256)
        mean, var = model.predict_batch(encode_batch(pool))
        ei = expected_improvement(mean, var, max(t.metric_value for t in hist))
        assert chosen == pool.setting(int(np.argmax(ei)))

    def test_deterministic_per_seed_and_in_space(self):
        from reqforge.hpo.space import setting_in_space

        hist = _history(12, 1, _smooth)
        model = fit_surrogate("gp", hist, SPACE)
        a = propose_next(model, SPACE, hist, rng_seed=5)
        b = propose_next(model, SPACE, hist, rng_seed=5)
        assert a == b
        assert setting_in_space(a, SPACE)

    def test_pool_of_one_returns_that_candidate(self):
        hist = _history(4, 2, _smooth)
        model = fit_surrogate("gp", hist, SPACE)
        chosen = propose_next(model, SPACE, hist, rng_seed=8, pool_size=1)
        assert chosen == sample_batch(SPACE, np.random.default_rng(8), 1).setting(0)
