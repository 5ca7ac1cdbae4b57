import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointuq.data import gen_smooth
from jointuq.ensemble import (
    EnsembleKind,
    EnsembleModel,
    aggregate_mean_eae,
    aggregate_mean_variance,
    ensemble_predict,
    ensemble_train,
    member_predictions,
)
from jointuq.errors import ShapeError
from jointuq.losses import JointLossSpec
from jointuq.training import TrainConfig, train_pair
from oracles import gaussian_mixture_moments, laplace_mixture_eae

members = st.lists(st.tuples(st.floats(-10, 10), st.floats(1e-3, 10)), min_size=1, max_size=8)


def cfg(kind="mse", epochs=3, **kw):
    return TrainConfig(JointLossSpec("sigmoid", 0.1, kind), epochs=epochs, minibatch=20, learning_rate=1e-2, **kw)


class TestMeanVariance:
    def test_single_member(self):
        p = aggregate_mean_variance([1.5], [0.3])
        assert (p.mu, p.spread) == (1.5, 0.3)

    def test_two_members(self):
        p = aggregate_mean_variance([0.0, 2.0], [1.0, 1.0])
        assert (p.mu, p.spread) == (1.0, 2.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            aggregate_mean_variance([], [])
        with pytest.raises(ValueError):
            aggregate_mean_variance([0.0], [-1.0])
        with pytest.raises(ShapeError):
            aggregate_mean_variance([0.0, 1.0], [1.0])

    def test_batched_axis(self):
        mus = np.array([[0.0, 1.0], [2.0, 1.0]])
        p = aggregate_mean_variance(mus, np.ones_like(mus))
        np.testing.assert_array_equal(p.mu, [1.0, 1.0])
        np.testing.assert_array_equal(p.spread, [2.0, 1.0])

    def test_monte_carlo(self):
        rng = np.random.default_rng(0)
        for _ in range(3):
            k = int(rng.integers(1, 6))
            mus, vs = rng.normal(0, 2, size=k), rng.uniform(0.1, 3, size=k)
            p = aggregate_mean_variance(mus, vs)
            mean, se_mean, var, se_var = gaussian_mixture_moments(mus, vs, 200_000, rng)
            assert abs(mean - p.mu) < 3 * se_mean
            assert abs(var - p.spread) < 3 * se_var

    @given(members, st.randoms(use_true_random=False))
    @settings(max_examples=100)
    def test_permutation_and_decomposition(self, pairs, rnd):
        mus, vs = map(list, zip(*pairs))
        p = aggregate_mean_variance(mus, vs)
        order = list(range(len(mus)))
        rnd.shuffle(order)
        q = aggregate_mean_variance([mus[i] for i in order], [vs[i] for i in order])
        assert q.mu == pytest.approx(p.mu, rel=1e-12, abs=1e-12)
        assert q.spread == pytest.approx(p.spread, rel=1e-12)
        assert p.spread == pytest.approx(np.mean(vs) + np.var(mus), rel=1e-12, abs=1e-12)
        assert p.spread >= np.mean(vs) * (1 - 1e-12)


class TestMeanEae:
    def test_single_member(self):
        assert aggregate_mean_eae([3.0], [4.0]).spread == 0.25

    def test_two_identical(self):
        p = aggregate_mean_eae([0.0, 0.0], [1.0, 1.0])
        assert (p.mu, p.spread) == (0.0, 1.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            aggregate_mean_eae([], [])
        with pytest.raises(ValueError):
            aggregate_mean_eae([0.0], [0.0])
        with pytest.raises(ValueError):
            aggregate_mean_eae([0.0], [float("nan")])

    def test_monte_carlo(self):
        rng = np.random.default_rng(1)
        for _ in range(3):
            k = int(rng.integers(1, 6))
            mus, taus = rng.normal(0, 2, size=k), rng.uniform(0.2, 5, size=k)
            p = aggregate_mean_eae(mus, taus)
            eae, se, mean, se_mean = laplace_mixture_eae(mus, taus, p.mu, 200_000, rng)
            assert abs(eae - p.spread) < 3 * se
            assert abs(mean - p.mu) < 3 * se_mean

    @given(members, st.randoms(use_true_random=False))
    @settings(max_examples=100)
    def test_permutation_and_bound(self, pairs, rnd):
        mus, taus = map(list, zip(*pairs))
        p = aggregate_mean_eae(mus, taus)
        order = list(range(len(mus)))
        rnd.shuffle(order)
        q = aggregate_mean_eae([mus[i] for i in order], [taus[i] for i in order])
        assert q.spread == pytest.approx(p.spread, rel=1e-12)
        lower = np.mean([math.exp(-abs(p.mu - m) * t) / t for m, t in zip(mus, taus)])
        assert p.spread >= lower * (1 - 1e-12) >= 0


class TestEnsembleModel:
    def test_validation(self):
        d = gen_smooth(30, 0)
        a = train_pair(d, cfg(epochs=0))
        b = train_pair(d, cfg("mae", epochs=0))
        with pytest.raises(ValueError):
            EnsembleModel([], EnsembleKind.MEAN_VARIANCE)
        with pytest.raises(ValueError):
            EnsembleModel([a, b], EnsembleKind.MEAN_VARIANCE)

    def test_kind_for_loss(self):
        assert EnsembleKind.for_loss("mse") is EnsembleKind.MEAN_VARIANCE
        assert EnsembleKind.for_loss("mae") is EnsembleKind.MEAN_EAE


class TestEnsembleTrain:
    def test_single_member_equals_train_pair(self):
        d = gen_smooth(60, 0)
        model = ensemble_train(d, cfg(), 1, 7)
        solo = train_pair(d, cfg(seed=7))
        assert len(model) == 1
        np.testing.assert_array_equal(model.members[0].regressor.flat_params(), solo.regressor.flat_params())
        grid = np.linspace(0, 1, 9).reshape(-1, 1)
        y_r, _, el = solo.predict_batch(grid)
        pred = ensemble_predict(model, grid)
        np.testing.assert_array_equal(pred.mu, y_r)
        np.testing.assert_array_equal(pred.spread, el)

    def test_distinct_member_inits(self):
        model = ensemble_train(gen_smooth(40, 0), cfg(epochs=0), 3, 0)
        flats = [m.regressor.flat_params() for m in model.members]
        assert not np.array_equal(flats[0], flats[1]) and not np.array_equal(flats[1], flats[2])

    def test_jobs_do_not_change_result(self):
        d = gen_smooth(40, 0)
        a = ensemble_train(d, cfg(), 2, 0, jobs=1)
        b = ensemble_train(d, cfg(), 2, 0, jobs=2)
        for ma, mb in zip(a.members, b.members):
            np.testing.assert_array_equal(ma.quantifier.flat_params(), mb.quantifier.flat_params())

    def test_rejects_zero_members(self):
        with pytest.raises(ValueError):
            ensemble_train(gen_smooth(10, 0), cfg(), 0, 0)

    def test_variance_dominates_members_on_smooth_data(self):
        d = gen_smooth(500, 3)
        model = ensemble_train(d, cfg(epochs=30), 3, 10)
        grid = np.linspace(0, 1, 101).reshape(-1, 1)
        pred = ensemble_predict(model, grid)
        _, el = member_predictions(model, grid)
        assert np.all(pred.spread >= el.mean(axis=0) * (1 - 1e-12))

    @pytest.mark.parametrize("kind", ["mse", "mae"])
    def test_predict_matches_manual_aggregation(self, kind):
        d = gen_smooth(80, 4)
        model = ensemble_train(d, cfg(kind), 3, 0)
        grid = np.linspace(0, 1, 7).reshape(-1, 1)
        pred = ensemble_predict(model, grid)
        for i, x in enumerate(grid[:, 0]):
            outs = [m.predict_batch([[x]]) for m in model.members]
            mus = [o[0][0] for o in outs]
            els = [o[2][0] for o in outs]
            manual = aggregate_mean_variance(mus, els) if kind == "mse" else aggregate_mean_eae(mus, [1 / e for e in els])
            assert pred.mu[i] == pytest.approx(manual.mu, rel=1e-12)
            assert pred.spread[i] == pytest.approx(manual.spread, rel=1e-12)
            single = ensemble_predict(model, [x])
            assert isinstance(single.mu, float)
            assert single.mu == pytest.approx(manual.mu, rel=1e-12)

    def test_one_dimensional_grid_is_a_batch(self):
        model = ensemble_train(gen_smooth(40, 0), cfg(epochs=1), 2, 0)
        pred = ensemble_predict(model, np.linspace(0, 1, 5))
        assert pred.mu.shape == (5,)
