import logging
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import multivariate_normal

from envs.dataset import Dataset
from models.copula import GaussianMixtureCopula, IndependenceCopula, KdeCopula
from models.marginal import marginal_forward, marginal_init, marginal_logpdf, pit
from models.policy import (
    CopulaPolicy, conditional_means, joint_log_likelihood, predict_action, predict_actions, train_policy,
    transform_to_actions,
)
from tests.helpers import correlated_dataset, gaussian_policy
from utils.errors import DomainError, NotFittedError, ShapeError


def random_policy(seed: int = 0, dim: int = 3, state_dim: int = 2) -> CopulaPolicy:
    marginal = replace(marginal_init(state_dim, [1] * dim, n_components=2, hidden=6, seed=seed),
                       log_spread=np.linspace(-1.0, 0.0, dim), fitted=True)
    return CopulaPolicy(marginal=marginal, copula=IndependenceCopula(dim=dim))


def test_independence_reduces_to_marginal_sum():
    p = random_policy()
    rng = np.random.default_rng(0)
    s, a = rng.normal(size=(100, 2)), rng.normal(size=(100, 3))
    assert np.array_equal(joint_log_likelihood(p, s, a), marginal_logpdf(p.marginal, s, a).sum(axis=-1))


@pytest.mark.parametrize("rho", [0.0, 0.5, 0.8])
def test_gaussian_construction_matches_bivariate_normal(rho):
    cov = np.array([[1.0, rho], [rho, 1.0]])
    a = np.random.default_rng(1).multivariate_normal([0.0, 0.0], cov, size=1000)
    s = np.zeros((1000, 1))
    expected = multivariate_normal(mean=[0.0, 0.0], cov=cov).logpdf(a)
    np.testing.assert_allclose(joint_log_likelihood(gaussian_policy(rho), s, a), expected, atol=1e-4)


def test_joint_density_integrates_to_one():
    grid = np.linspace(-6, 6, 481)
    a1, a2 = np.meshgrid(grid, grid, indexing="ij")
    a = np.column_stack([a1.ravel(), a2.ravel()])
    density = np.exp(joint_log_likelihood(gaussian_policy(0.5), np.zeros((a.shape[0], 1)), a)).reshape(a1.shape)
    total = trapezoid(trapezoid(density, grid, axis=1), grid)
    assert total == pytest.approx(1.0, abs=1e-2)


def test_translation_invariance():
    a = np.random.default_rng(2).normal(size=(50, 2))
    s = np.zeros((50, 1))
    base = joint_log_likelihood(gaussian_policy(0.5), s, a)
    shifted = joint_log_likelihood(gaussian_policy(0.5, shift=0.7), s, a + 0.7)
    np.testing.assert_allclose(shifted, base, atol=1e-9)


def test_untrained_components_are_rejected():
    p = random_policy()
    untrained = replace(p, marginal=replace(p.marginal, fitted=False))
    with pytest.raises(NotFittedError):
        joint_log_likelihood(untrained, np.zeros(2), np.zeros(3))


def test_dimension_checks():
    p = random_policy()
    with pytest.raises(ShapeError):
        CopulaPolicy(marginal=p.marginal, copula=IndependenceCopula(dim=2))
    with pytest.raises(ShapeError):
        joint_log_likelihood(p, np.zeros(2), np.zeros(4))


def test_transform_median_round_trip_and_monotone():
    p = random_policy(seed=3)
    s = np.array([0.3, -0.2])
    medians = transform_to_actions(p, s, np.full(3, 0.5))
    np.testing.assert_allclose(pit(p.marginal, s, medians), 0.5, atol=1e-6)

    a = np.array([0.1, -0.4, 0.9])
    np.testing.assert_allclose(transform_to_actions(p, s, pit(p.marginal, s, a)), a, atol=1e-5)

    lo = transform_to_actions(p, s, np.array([0.2, 0.5, 0.5]))
    hi = transform_to_actions(p, s, np.array([0.8, 0.5, 0.5]))
    assert hi[0] > lo[0]
    np.testing.assert_array_equal(hi[1:], lo[1:])


def test_prediction_converges_to_conditional_mean():
    p = random_policy(seed=4)
    s = np.array([0.5, 0.1])
    n = 10_000
    pred = predict_action(p, s, n, np.random.default_rng(5))
    mixtures = marginal_forward(p.marginal, s)
    sd = np.array([math.sqrt(np.mean(g.stds ** 2 + g.means ** 2) - g.mean ** 2) for g in mixtures])
    mean = conditional_means(p, s)
    assert np.all(np.abs(pred - mean) < 3 * sd / math.sqrt(n))


def test_single_gaussian_prediction_matches_mean():
    p = gaussian_policy(0.0, shift=0.25)
    n = 10_000
    pred = predict_action(p, np.zeros(1), n, np.random.default_rng(6))
    assert np.all(np.abs(pred - 0.25) < 3 / math.sqrt(n))


def test_prediction_is_seeded_and_validates_samples():
    p = random_policy(seed=5)
    states = np.random.default_rng(7).normal(size=(20, 2))
    a = predict_actions(p, states, 10, np.random.default_rng(8))
    b = predict_actions(p, states, 10, np.random.default_rng(8))
    assert a.shape == (20, 3)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(DomainError):
        predict_action(p, states[0], 0, np.random.default_rng(0))


def test_uniform_copula_skips_second_stage(fast_train_config, caplog):
    ds = correlated_dataset(500, 0.5, seed=0)
    with caplog.at_level(logging.INFO):
        p, log = train_policy(ds, fast_train_config("uniform", epochs=5))
    assert isinstance(p.copula, IndependenceCopula)
    assert log.copula.skipped
    assert "skipped" in caplog.text
    s, a = ds.normalized_arrays()
    assert np.array_equal(joint_log_likelihood(p, s, a), marginal_logpdf(p.marginal, s, a).sum(axis=-1))


def test_recovers_independent_generator(fast_train_config):
    rng = np.random.default_rng(9)
    sd = 0.3
    train = Dataset.from_arrays(rng.uniform(-1, 1, (2000, 1)), rng.normal(0, sd, (2000, 2)), [1, 1])
    test_a = rng.normal(0, sd, (1000, 2))
    test = Dataset.from_arrays(rng.uniform(-1, 1, (1000, 1)), test_a, [1, 1])
    p, _ = train_policy(train, fast_train_config("uniform", epochs=40))
    s, a = test.normalized_arrays()
    learned = -joint_log_likelihood(p, s, a).mean()
    generator = -multivariate_normal(mean=[0, 0], cov=sd ** 2 * np.eye(2)).logpdf(test_a).mean()
    assert learned == pytest.approx(generator, abs=0.1)


def test_kde_copula_beats_uniform_on_correlated_pair(fast_train_config):
    # Scott 대역폭 ∝ n^(-1/6)
    train = correlated_dataset(10_000, 0.9, seed=1)
    test = correlated_dataset(1000, 0.9, seed=2).with_normalization(train.meta.normalization)
    uniform, _ = train_policy(train, fast_train_config("uniform", epochs=40))
    kde, log = train_policy(train, fast_train_config("kde"), marginal=uniform.marginal)
    assert log.marginal.skipped
    assert isinstance(kde.copula, KdeCopula)
    s, a = test.normalized_arrays()
    nll_uniform = -joint_log_likelihood(uniform, s, a).mean()
    nll_kde = -joint_log_likelihood(kde, s, a).mean()
    assert nll_kde < nll_uniform - 0.5


def test_gmm_copula_training_runs(fast_train_config):
    train = correlated_dataset(500, 0.7, seed=3)
    p, log = train_policy(train, fast_train_config("gmm", epochs=5, copula_components=2), val_dataset=train)
    assert isinstance(p.copula, GaussianMixtureCopula) and p.copula.fitted
    assert log.copula.epochs_run >= 1
    s, a = train.normalized_arrays()
    assert np.all(np.isfinite(joint_log_likelihood(p, s, a)))
