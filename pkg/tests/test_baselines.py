import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from rgpe.baselines import (
    TstrModel,
    discordant_fraction,
    fit_tstr,
    random_suggest,
    random_unit,
    sobol_suggest,
    sobol_unit,
    tstr_distance,
    tstr_predict,
    tstr_weights,
)
from rgpe.gp import GpModel, KernelHyperparams, StandardizationStats, predict
from rgpe.space import Dim, ParamSpace


def make_model(X, y, hypers):
    return GpModel.from_hypers(np.atleast_2d(X), np.asarray(y, float), StandardizationStats(0.0, 1.0), hypers)


def test_distance_examples():
    y = np.array([0.0, 1.0, 2.0, 3.0])
    assert discordant_fraction(y * 2, y) == 0.0
    assert discordant_fraction(-y, y) == 1.0
    # swapping the last two predictions flips exactly one of the six pairs
    assert discordant_fraction([0.0, 1.0, 3.0, 2.0], y) == pytest.approx(1 / 6)


def test_distance_excludes_tied_outcomes():
    # pairs (0,1) tied in y: only (0,2), (1,2) count, one of them discordant
    assert discordant_fraction([0.0, 5.0, 1.0], [1.0, 1.0, 2.0]) == pytest.approx(0.5)


def test_distance_needs_two_points():
    with pytest.raises(ValueError):
        discordant_fraction([1.0], [1.0])


def test_tstr_distance_uses_mean(rng):
    X = np.array([[0.1], [0.5], [0.9]])
    base = make_model(X, [0.0, 1.0, 2.0], KernelHyperparams([0.3], 1.0))
    assert tstr_distance(base, X, [0.0, 1.0, 2.0]) == 0.0
    assert tstr_distance(base, X, [2.0, 1.0, 0.0]) == 1.0


@given(
    st.lists(st.integers(-100, 100), min_size=2, max_size=12, unique=True),
    st.integers(0, 2**32 - 1),
)
def test_distance_monotone_invariant(pred, seed):
    pred = np.asarray(pred, dtype=float)
    y = np.random.default_rng(seed).standard_normal(len(pred))
    d = discordant_fraction(pred, y)
    assert 0.0 <= d <= 1.0
    assert discordant_fraction(np.exp(pred / 50), y) == d
    assert discordant_fraction(pred**3 + 2 * pred, y) == d


def test_weights_examples():
    np.testing.assert_allclose(tstr_weights([0.9, 1.0], 0.9), [0, 0, 1])
    np.testing.assert_allclose(tstr_weights([0.0], 0.5), [0.5, 0.5])
    # d = rho / 2: unnormalized (0.75 * 0.75, 0.75)
    np.testing.assert_allclose(tstr_weights([0.45], 0.9), [0.5625 / 1.3125, 0.75 / 1.3125], atol=1e-15)
    assert tstr_weights([0.45], 0.9)[0] == pytest.approx(0.4286, abs=5e-5)
    with pytest.raises(ValueError):
        tstr_weights([0.1], 0.0)


@given(st.lists(st.floats(0, 1), max_size=20), st.floats(0.01, 1.0))
def test_weights_probability_vector(dist, rho):
    w = tstr_weights(dist, rho)
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0)
    assert w[-1] > 0


def test_tstr_predict(rng):
    X = rng.random((4, 1))
    target = make_model(X, rng.standard_normal(4), KernelHyperparams([0.3], 1.0))
    bases = [make_model(rng.random((5, 1)), rng.standard_normal(5), KernelHyperparams([l], 2.0)) for l in (0.2, 0.6)]
    xs = rng.random((6, 1))
    model = fit_tstr(bases, target, X, target.y, 0.9)
    mean, var = tstr_predict(model, xs)
    ref = sum(w * predict(m, xs, full_cov=False)[0] for w, m in zip(model.weights, model.models))
    np.testing.assert_allclose(mean, ref, atol=1e-12, rtol=0)
    np.testing.assert_array_equal(var, predict(target, xs, full_cov=False)[1])


def test_tstr_zero_base_weight_is_target(rng):
    X = rng.random((4, 1))
    y = np.array([0.0, 1.0, 2.0, 3.0])
    target = make_model(X, y, KernelHyperparams([0.3], 1.0))
    base = make_model(X, -y, KernelHyperparams([0.3], 1.0))  # fully discordant
    model = fit_tstr([base], target, X, y, 0.5)
    np.testing.assert_array_equal(model.weights, [0.0, 1.0])
    xs = rng.random((5, 1))
    a, b = tstr_predict(model, xs), predict(target, xs, full_cov=False)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_tstr_two_components_formula():
    X = np.array([[0.5]])
    hi = KernelHyperparams([0.3], 1.0)
    target = make_model(X, [4.0], hi)
    base = make_model(X, [2.0], KernelHyperparams([0.3], 5.0))
    model = TstrModel((base,), target, 0.5, np.array([0.5, 0.5]))
    mean, var = tstr_predict(model, X)
    assert mean[0] == pytest.approx(3.0, abs=1e-5)
    assert var[0] == predict(target, X, full_cov=False)[1][0]


def gray_code_sobol_1d(n):
    """First ``n`` points of the unscrambled 1-d Sobol sequence, including the leading 0.

    In one dimension the direction numbers are 2^-k, so point i is the
    radical inverse (base 2) of the Gray code of i.
    """
    out = []
    for i in range(n):
        g = i ^ (i >> 1)
        x, f = 0.0, 0.5
        while g:
            if g & 1:
                x += f
            g >>= 1
            f /= 2
        out.append(x)
    return np.array(out)


def test_sobol_unscrambled_matches_reference():
    got = sobol_unit(1, 31, seed=0, scramble=False)[:, 0]
    np.testing.assert_array_equal(got[:3], [0.5, 0.75, 0.25])
    np.testing.assert_array_equal(got, gray_code_sobol_1d(32)[1:])


def test_sobol_in_bounds_and_deterministic():
    space = ParamSpace((Dim("a", -2.0, 3.0), Dim("b", 1e-3, 1e2, "log")))
    pts = sobol_suggest(space, 50, seed=4)
    assert np.all(space.contains(pts))
    np.testing.assert_array_equal(pts, sobol_suggest(space, 50, seed=4))
    assert not np.array_equal(pts, sobol_suggest(space, 50, seed=5))


def star_discrepancy_2d(P):
    """Exact star discrepancy in 2-d: anchored boxes with corners on point coordinates."""
    xs = np.append(np.unique(P[:, 0]), 1.0)
    ys = np.append(np.unique(P[:, 1]), 1.0)
    n = len(P)
    worst = 0.0
    for a in xs:
        for b in ys:
            vol = a * b
            open_ = np.count_nonzero((P[:, 0] < a) & (P[:, 1] < b)) / n
            closed = np.count_nonzero((P[:, 0] <= a) & (P[:, 1] <= b)) / n
            worst = max(worst, vol - open_, closed - vol)
    return worst


def test_sobol_lower_discrepancy_than_random():
    rng = np.random.default_rng(0)
    sob = [star_discrepancy_2d(sobol_unit(2, 64, seed=s)) for s in range(20)]
    rnd = [star_discrepancy_2d(rng.random((64, 2))) for _ in range(20)]
    assert np.median(sob) < np.median(rnd)


def test_random_grid_permutation_and_reproducible():
    grid = np.arange(10.0)[:, None] / 10
    space = ParamSpace.box([(0.0, 1.0)], grid=grid)
    pts = random_suggest(space, 10, seed=3)
    assert sorted(pts[:, 0].tolist()) == sorted(grid[:, 0].tolist())
    np.testing.assert_array_equal(pts, random_suggest(space, 10, seed=3))
    with pytest.raises(ValueError):
        random_suggest(space, 11, seed=3)


def test_random_respects_observed_mask():
    space = ParamSpace.box([(0.0, 1.0)], grid=np.arange(6.0)[:, None] / 6)
    mask = np.array([True, False, True, False, False, True])
    _, idx = random_unit(space, 3, np.random.default_rng(0), mask)
    assert sorted(idx.tolist()) == [1, 3, 4]


def test_random_continuous_in_bounds():
    space = ParamSpace.box([(-1.0, 1.0), (5.0, 6.0)])
    pts = random_suggest(space, 100, seed=1)
    assert np.all(space.contains(pts))


def test_random_first_pick_uniform():
    space = ParamSpace.box([(0.0, 3.0)], grid=np.arange(4.0)[:, None])
    rng = np.random.default_rng(12)
    n = 100_000
    counts = np.zeros(4)
    for _ in range(n):
        counts[random_unit(space, 1, rng)[1][0]] += 1
    se = np.sqrt(n * 0.25 * 0.75)
    assert np.all(np.abs(counts - n / 4) < 3 * se)
    assert stats.chisquare(counts).pvalue > 1e-3
