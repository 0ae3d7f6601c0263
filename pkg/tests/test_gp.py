import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rgpe.gp import (
    FitConfig,
    GpModel,
    KernelHyperparams,
    LooUndefinedError,
    StandardizationStats,
    fit_gp,
    kernel_matern52_ard,
    log_marginal_likelihood,
    matern52,
    predict,
    predict_loo,
    psd_repair,
    sample_joint,
    standardize,
)

from conftest import dense_matern52, dense_posterior, random_hypers


def make_model(X, y_std, hypers):
    return GpModel.from_hypers(X, y_std, StandardizationStats(0.0, 1.0), hypers)


@pytest.mark.parametrize(
    "ys, expected, mean",
    [([1, 2, 3], [-1, 0, 1], 2.0), ([5], [0], 5.0), ([2, 2, 2], [0, 0, 0], 2.0)],
)
def test_standardize_examples(ys, expected, mean):
    z, stats = standardize(ys)
    np.testing.assert_allclose(z, expected, atol=1e-15)
    assert stats.mean == mean
    assert stats.std == 1.0


def test_standardize_empty():
    with pytest.raises(ValueError):
        standardize([])


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=30))
def test_standardize_round_trip(ys):
    z, stats = standardize(ys)
    np.testing.assert_allclose(stats.invert(z), ys, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(ys).max()))
    if len(ys) > 1 and np.std(ys) > 1e-3:
        assert abs(np.mean(z)) < 1e-9
        assert abs(np.std(z, ddof=1) - 1) < 1e-9


def test_kernel_examples():
    h = KernelHyperparams([1.0], 1.0)
    # (1 + sqrt5 + 5/3) exp(-sqrt5), evaluated with mpmath at 30 digits
    assert kernel_matern52_ard([0.0], [1.0], h) == pytest.approx(0.523994108831820310592713250761, abs=1e-14)
    h2 = KernelHyperparams([0.3, 2.0], 1.7)
    assert kernel_matern52_ard([0.4, 0.1], [0.4, 0.1], h2) == pytest.approx(1.7)
    assert kernel_matern52_ard([0.0, 0.0], [1e4, 0.0], h2) == pytest.approx(0.0, abs=1e-300)


def test_kernel_matrix_matches_loops(rng):
    h = random_hypers(rng, 3)
    A, B = rng.random((5, 3)), rng.random((4, 3))
    np.testing.assert_allclose(matern52(A, B, h), dense_matern52(A, B, h), atol=1e-12)


def test_predict_matches_dense_oracle(rng):
    h = random_hypers(rng, 2, noise=1e-3)
    X = rng.random((3, 2))
    y = rng.standard_normal(3)
    xs = rng.random((2, 2))
    mean, cov = predict(make_model(X, y, h), xs)
    m_ref, c_ref = dense_posterior(X, y, h, xs)
    np.testing.assert_allclose(mean, m_ref, atol=1e-8)
    np.testing.assert_allclose(cov, c_ref, atol=1e-8)


def test_interpolates_at_jitter_noise(rng):
    # well separated inputs keep |alpha| <= 1, so the residual is below 1e-6
    X = np.array([[0.1, 0.1], [0.9, 0.1], [0.5, 0.5], [0.1, 0.9], [0.9, 0.9]])
    y = rng.uniform(-0.9, 0.9, 5)
    model = make_model(X, y, KernelHyperparams([0.1, 0.1], 1.0))
    mean, cov = predict(model, X)
    assert np.abs(model.alpha).max() <= 1.0
    np.testing.assert_allclose(mean, y, atol=1e-6)
    assert np.all(np.diag(cov) >= -1e-12)


def test_interpolation_residual_is_noise_times_alpha(rng):
    X = rng.random((6, 2))
    y = rng.standard_normal(6)
    model = make_model(X, y, random_hypers(rng, 2))
    mean, _ = predict(model, X)
    np.testing.assert_allclose(y - mean, model.noise_diag() * model.alpha, atol=1e-7)


def test_prior_reversion_far_away(rng):
    model = fit_gp(rng.random((1, 2)), [3.0])
    mean, cov = predict(model, [[1e3, 1e3]])
    assert mean[0] == pytest.approx(0.0, abs=1e-9)
    assert cov[0, 0] == pytest.approx(model.hypers.signal_variance, rel=1e-9)


def test_cached_factor_reproduces_kernel(rng):
    X = rng.random((8, 3))
    model = fit_gp(X, np.sin(X.sum(1) * 3))
    K = matern52(X, X, model.hypers) + model.noise_diag() * np.eye(8)
    np.testing.assert_allclose(model.chol @ model.chol.T, K, atol=1e-8)


def test_fit_linear_function_held_out():
    X = np.linspace(0, 1, 5)[:, None]
    y = 2.0 * X[:, 0] - 1.0
    model = fit_gp(X, y)
    xq = np.array([[0.6]])
    mean, _ = predict(model, xq)
    truth = model.stats.apply(2.0 * 0.6 - 1.0)
    assert abs(mean[0] - truth) < 0.05
    m_ref, _ = dense_posterior(X, model.y, model.hypers, xq)
    # same hypers, independent linear algebra (modulo any extra jitter)
    assert model.jitter == 0.0
    np.testing.assert_allclose(mean, m_ref, atol=1e-8)


def test_fit_deterministic(rng):
    X = rng.random((7, 2))
    y = np.cos(4 * X[:, 0]) + X[:, 1]
    a = fit_gp(X, y, FitConfig(seed=3))
    b = fit_gp(X, y, FitConfig(seed=3))
    assert a.hypers == b.hypers


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 9), st.integers(1, 3), st.integers(0, 10_000))
def test_fit_beats_every_start(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    y = rng.standard_normal(n)
    model = fit_gp(X, y, FitConfig(seed=seed))
    best = log_marginal_likelihood(X, model.y, model.hypers)
    for h in model.meta["starts"]:
        start = log_marginal_likelihood(X, model.y, h)
        assert not (best < start - 1e-9)
    lo, hi = FitConfig().lengthscale_bounds
    assert np.all(model.hypers.lengthscales >= lo * (1 - 1e-12))
    assert np.all(model.hypers.lengthscales <= hi * (1 + 1e-12))
    assert model.hypers.noise_variance >= 1e-6 * (1 - 1e-12)


def test_sample_joint_zero_variance(rng):
    X = rng.random((4, 1))
    y = rng.standard_normal(4)
    model = make_model(X, y, KernelHyperparams([0.3], 1.0, 0.0 + 1e-12))
    draws = sample_joint(model, X, 5, rng)
    np.testing.assert_allclose(draws, np.tile(predict(model, X)[0], (5, 1)), atol=1e-5)


def test_sample_joint_moments(rng):
    X = rng.random((3, 1))
    model = make_model(X, rng.standard_normal(3), KernelHyperparams([0.2], 1.3))
    xs = np.array([[0.05], [0.9]])
    mean, cov = predict(model, xs)
    draws = sample_joint(model, xs, 100_000, np.random.default_rng(1))
    sd = np.sqrt(np.diag(cov))
    assert np.all(np.abs(draws.mean(0) - mean) < 4 * sd / np.sqrt(1e5))
    emp = np.cov(draws.T)
    np.testing.assert_allclose(emp, cov, rtol=0.05, atol=0.05 * np.abs(cov).max())


def test_sample_joint_reproducible(rng):
    model = make_model(rng.random((3, 2)), rng.standard_normal(3), random_hypers(rng, 2))
    xs = rng.random((4, 2))
    a = sample_joint(model, xs, 10, np.random.default_rng(5))
    b = sample_joint(model, xs, 10, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_psd_repair():
    cov = np.array([[1.0, 1.0], [1.0, 1.0 - 1e-13]])
    fixed, F = psd_repair(cov)
    np.testing.assert_allclose(F @ F.T, fixed, atol=1e-12)
    assert np.linalg.eigvalsh(fixed).min() >= -1e-15
    with pytest.raises(np.linalg.LinAlgError):
        psd_repair(np.array([[1.0, 0.0], [0.0, -1e-3]]))


def naive_loo(X, y, hypers):
    """Refit-without-point by dense solves, no rgpe.gp involved."""
    n = len(y)
    means = np.empty((n, n))
    covs = np.empty((n, n, n))
    for j in range(n):
        keep = np.arange(n) != j
        means[j], covs[j] = dense_posterior(X[keep], y[keep], hypers, X)
    return means, covs


@pytest.mark.parametrize("seed", range(5))
def test_loo_matches_naive_refit(seed):
    rng = np.random.default_rng(seed)
    n, d = rng.integers(3, 9), rng.integers(1, 4)
    X = rng.random((n, d))
    y = rng.standard_normal(n)
    h = random_hypers(rng, d, noise=1e-4)
    loo = predict_loo(make_model(X, y, h))
    m_ref, c_ref = naive_loo(X, y, h)
    np.testing.assert_allclose(loo.means, m_ref, atol=1e-8)
    np.testing.assert_allclose(loo.covs, c_ref, atol=1e-8)


def test_loo_three_points_equals_two_point_gp(rng):
    X = rng.random((3, 1))
    y = rng.standard_normal(3)
    h = KernelHyperparams([0.4], 1.0, 1e-4)
    loo = predict_loo(make_model(X, y, h))
    for j in range(3):
        keep = [k for k in range(3) if k != j]
        m, c = dense_posterior(X[keep], y[keep], h, X[j : j + 1])
        assert loo.held_out_mean[j] == pytest.approx(m[0], abs=1e-8)
        assert loo.held_out_var[j] == pytest.approx(c[0, 0], abs=1e-8)


def test_loo_duplicate_point_keeps_value():
    X = np.array([[0.1], [0.5], [0.5], [0.9]])
    y = np.array([0.3, -1.2, -1.2, 0.8])
    loo = predict_loo(make_model(X, y, KernelHyperparams([0.3], 1.0)))
    assert loo.held_out_mean[1] == pytest.approx(-1.2, abs=1e-3)
    assert loo.held_out_mean[2] == pytest.approx(-1.2, abs=1e-3)


def test_loo_two_points_more_uncertain():
    X = np.array([[0.2], [0.7]])
    model = make_model(X, np.array([1.0, -1.0]), KernelHyperparams([0.3], 1.0))
    loo = predict_loo(model)
    _, full_var = predict(model, X, full_cov=False)
    assert np.all(loo.held_out_var > full_var)


def test_loo_needs_two_points():
    with pytest.raises(LooUndefinedError):
        predict_loo(make_model(np.array([[0.5]]), np.array([0.0]), KernelHyperparams([0.3], 1.0)))


def test_singular_kernel_gets_jitter():
    X = np.zeros((4, 1))
    model = GpModel.from_hypers(X, np.zeros(4), StandardizationStats(0, 1), KernelHyperparams([0.3], 1.0, 0.0))
    assert model.jitter > 0
    assert model.meta["extra_jitter"] == model.jitter
