import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from conftest import random_dataset
from spliceglm import newton
from spliceglm.exceptions import InvalidInputError, NumericalFailure
from spliceglm.family import FAMILIES
from spliceglm.glm import Coefficients, Dataset, gradient, neg_log_likelihood
from spliceglm.newton import NewtonConfig, restricted_mle, should_continue_newton


def test_config_validation():
    with pytest.raises(InvalidInputError):
        NewtonConfig(epsilon=0)
    with pytest.raises(InvalidInputError):
        NewtonConfig(max_iters=0)


def test_should_continue_examples():
    assert should_continue_newton(10, 10, 30, 10, 5.0, 0.0) is False
    assert should_continue_newton(10, 9, 30, 10, 5.0, 0.0) is True
    assert should_continue_newton(10, 4.9, 30, 29, 5.0, 0.0) is True
    assert should_continue_newton(10, 9.99, 30, 29, 5.0, 0.0) is False
    # tau shifts the target
    assert should_continue_newton(10, 9, 30, 25, 5.0, 0.0) is True
    assert should_continue_newton(10, 9, 30, 25, 4.5, 1.0) is False


def test_gaussian_exactly_determined_system():
    rng = np.random.default_rng(0)
    raw = rng.normal(size=(5, 5))
    data0 = Dataset.from_raw(raw, np.zeros(5), "gaussian")
    beta_star = rng.normal(size=5)
    data = Dataset(data0.X, data0.X @ beta_star, "gaussian")
    fit = restricted_mle(data, range(5))
    assert np.linalg.norm(fit.coef.beta - beta_star) < 1e-8
    assert fit.converged


def test_empty_active_set_is_the_null_model():
    rng = np.random.default_rng(1)
    data, _ = random_dataset(rng, "logistic", 30, 4)
    fit = restricted_mle(data, [])
    np.testing.assert_array_equal(fit.coef.beta, 0.0)
    assert fit.loss == pytest.approx(30 * math.log(2), rel=1e-14)
    assert fit.converged and fit.n_iter == 0


def test_logistic_matches_long_run_reference():
    rng = np.random.default_rng(2)
    data, _ = random_dataset(rng, "logistic", 100, 5, signal=1.5)
    active = [0, 1]
    fit = restricted_mle(data, active)

    Z = data.X[:, active]

    def f(b):
        eta = Z @ b
        return np.sum(np.logaddexp(0, eta) - data.y * eta)

    def g(b):
        eta = Z @ b
        return Z.T @ (1 / (1 + np.exp(-eta)) - data.y)

    ref = minimize(f, np.zeros(2), jac=g, method="BFGS", options={"gtol": 1e-12, "maxiter": 10000})
    assert abs(fit.loss - ref.fun) < 1e-6
    np.testing.assert_allclose(fit.coef.beta[active], ref.x, atol=1e-5)


def test_intercept_is_estimated():
    rng = np.random.default_rng(3)
    raw = rng.normal(size=(200, 2))
    y = 3.0 + raw @ [1.0, 0.0] + 0.1 * rng.normal(size=200)
    data = Dataset.from_raw(raw, y, "gaussian", fit_intercept=True)
    fit = restricted_mle(data, [0])
    ref, *_ = np.linalg.lstsq(np.column_stack([np.ones(200), data.X[:, 0]]), y, rcond=None)
    assert fit.coef.intercept == pytest.approx(ref[0], abs=1e-8)
    assert fit.coef.beta[0] == pytest.approx(ref[1], abs=1e-8)
    assert fit.coef.beta[1] == 0.0


def test_invalid_active_index():
    data = Dataset.from_raw(np.eye(3), np.ones(3), "gaussian")
    with pytest.raises(InvalidInputError):
        restricted_mle(data, [3])


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(FAMILIES), st.integers(0, 2**32 - 1))
def test_support_preservation_and_stationarity(kind, seed):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(20, 60)), int(rng.integers(2, 9))
    data, _ = random_dataset(rng, kind, n, p)
    k = int(rng.integers(1, min(p, 4) + 1))
    active = np.sort(rng.choice(p, size=k, replace=False))
    fit = restricted_mle(data, active)
    outside = np.setdiff1d(np.arange(p), active)
    assert np.all(fit.coef.beta[outside] == 0.0)
    assert fit.loss == pytest.approx(neg_log_likelihood(data, fit.coef), rel=1e-12, abs=1e-12)
    if fit.converged:
        assert np.max(np.abs(gradient(data, fit.coef)[active])) <= 1e-4 * n


@pytest.mark.parametrize("kind", FAMILIES)
def test_monotone_descent(kind):
    rng = np.random.default_rng(4)
    for _ in range(10):
        data, _ = random_dataset(rng, kind, 50, 6, signal=2.0, k=3)
        active = [0, 1, 2, 3]
        init = Coefficients(rng.normal(scale=2.0, size=6))
        losses = [neg_log_likelihood(data, Coefficients(np.where(np.isin(np.arange(6), active), init.beta, 0.0)))]
        for m in range(1, 12):
            losses.append(restricted_mle(data, active, init, NewtonConfig(max_iters=m)).loss)
        assert np.all(np.diff(losses) <= 1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gaussian_one_step_exactness(seed):
    rng = np.random.default_rng(seed)
    data, _ = random_dataset(rng, "gaussian", 40, 6)
    active = np.sort(rng.choice(6, size=3, replace=False))
    init = Coefficients(rng.normal(scale=10, size=6))
    fit = restricted_mle(data, active, init, NewtonConfig(max_iters=1))
    ref, *_ = np.linalg.lstsq(data.X[:, active], data.y, rcond=None)
    np.testing.assert_allclose(fit.coef.beta[active], ref, atol=1e-8)


def test_duplicate_columns_are_handled_by_ridge():
    rng = np.random.default_rng(5)
    x = rng.normal(size=40)
    raw = np.column_stack([x, x, rng.normal(size=40)])
    y = rng.binomial(1, 1 / (1 + np.exp(-x))).astype(float)
    data = Dataset.from_raw(raw, y, "logistic")
    fit = restricted_mle(data, [0, 1])
    assert np.all(np.isfinite(fit.coef.beta))
    # the ridge splits the weight evenly between the twins
    assert fit.coef.beta[0] == pytest.approx(fit.coef.beta[1], rel=1e-6)


def test_separable_logistic_terminates_quickly():
    x = np.linspace(-1, 1, 40)
    data = Dataset.from_raw(x[:, None], (x > 0).astype(float), "logistic")
    fit = restricted_mle(data, [0])
    assert fit.n_iter < 80
    assert fit.loss < 1e-3


def test_numerical_failure_carries_active_set(monkeypatch):
    rng = np.random.default_rng(6)
    data, _ = random_dataset(rng, "poisson", 30, 4)

    def broken(_):
        raise np.linalg.LinAlgError("forced")

    monkeypatch.setattr(newton.np.linalg, "cholesky", broken)
    with pytest.raises(NumericalFailure) as err:
        restricted_mle(data, [1, 3])
    assert err.value.active == (1, 3)


def test_early_stop_abandons_hopeless_candidates():
    rng = np.random.default_rng(7)
    data, _ = random_dataset(rng, "poisson", 80, 5, signal=1.0)
    full = restricted_mle(data, [0, 1, 2])
    # an incumbent far below what this support can reach
    cfg = NewtonConfig(budget_loss=full.loss - 1e3, tau=0.0)
    stopped = restricted_mle(data, [0, 1, 2], None, cfg)
    assert stopped.n_iter < full.n_iter
    assert stopped.loss >= full.loss - 1e-10
    off = restricted_mle(data, [0, 1, 2], None, NewtonConfig(budget_loss=full.loss - 1e3, early_stop=False))
    assert off.loss == pytest.approx(full.loss, abs=1e-10)
