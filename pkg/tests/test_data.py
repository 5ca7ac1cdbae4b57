import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from jointuq.data import (
    Dataset,
    Normalizer,
    SharpLayout,
    clean_mean,
    fit_normalizer,
    gen_sharp,
    gen_smooth,
    load_csv,
    make_folds,
    save_csv,
    strip_counts,
)
from jointuq.errors import MissingColumnError, NonFiniteError, NonNumericCellError, RaggedRowError, ShapeError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestDataset:
    def test_vector_inputs_become_column(self):
        d = Dataset(np.arange(3.0), np.zeros(3))
        assert d.inputs.shape == (3, 1) and d.n_features == 1

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            Dataset(np.zeros((3, 2)), np.zeros(2))

    def test_non_finite(self):
        with pytest.raises(NonFiniteError):
            Dataset(np.array([[np.inf]]), np.zeros(1))


class TestGenSmooth:
    def test_deterministic(self):
        a, b = gen_smooth(50, 3), gen_smooth(50, 3)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.targets, b.targets)

    def test_zero_noise_point(self):
        d = gen_smooth(200_000, 1)
        x = d.inputs[:, 0]
        near = np.abs(x - 0.375) < 1e-3
        assert near.sum() > 50
        assert np.max(np.abs(d.targets[near] - clean_mean(x[near]))) < 0.02

    def test_residual_mean_and_variance(self):
        d = gen_smooth(100_000, 2)
        x = d.inputs[:, 0]
        r = d.targets - clean_mean(x)
        se = r.std() / np.sqrt(r.size)
        assert abs(r.mean()) < 3 * se
        # Standardised residuals have unit variance.
        sd = 1.0 + np.sin(4 * np.pi * x)
        keep = sd > 0.05
        s = r[keep] / sd[keep]
        assert abs(np.mean(s * s) - 1.0) < 3 * np.std(s * s) / np.sqrt(s.size)

    def test_inputs_uniform(self):
        x = gen_smooth(100_000, 4).inputs[:, 0]
        assert x.min() >= 0 and x.max() <= 1
        assert abs(x.mean() - 0.5) < 3 * np.sqrt(1 / 12 / x.size)


class TestGenSharp:
    def test_noisy_count(self):
        d = gen_sharp(10_000, 0.8, 0)
        n_in = int(SharpLayout().in_strip(d.inputs[:, 0]).sum())
        assert abs(n_in - 8000) <= 3 * np.sqrt(10_000 * 0.8 * 0.2)

    def test_even_split(self):
        counts = strip_counts(gen_sharp(10_001, 0.5, 3))
        assert abs(counts[0] - counts[1]) <= 1

    def test_clean_points_exact(self):
        d = gen_sharp(5000, 0.2, 1)
        x = d.inputs[:, 0]
        clean = ~SharpLayout().in_strip(x)
        np.testing.assert_array_equal(d.targets[clean], clean_mean(x[clean]))

    def test_strip_variance(self):
        d = gen_sharp(10_000, 0.8, 2)
        x = d.inputs[:, 0]
        in2 = (x >= 0.6) & (x <= 0.7)
        in1 = (x >= 0.2) & (x <= 0.3)
        assert d.targets[in2].var() == pytest.approx(25.0, rel=0.1)
        assert d.targets[in1].var() == pytest.approx(1.0, rel=0.1)
        assert d.targets[in2].mean() == pytest.approx(-2.0, abs=0.4)

    def test_custom_layout(self):
        layout = SharpLayout(strips=((0.4, 0.5),), sigmas=(2.0,))
        d = gen_sharp(2000, 0.3, 0, layout)
        assert layout.region_bounds() == [0.0, 0.4, 0.5, 1.0]
        assert strip_counts(d, layout)[0] == int(layout.in_strip(d.inputs[:, 0]).sum())

    def test_region_bounds(self):
        assert SharpLayout().region_bounds() == [0.0, 0.2, 0.3, 0.6, 0.7, 1.0]

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            gen_sharp(10, 1.0, 0)


class TestCsv:
    def test_target_last(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
        d = load_csv(p)
        assert len(d) == 3 and d.n_features == 2
        np.testing.assert_array_equal(d.targets, [3, 6, 9])
        assert d.feature_names == ["a", "b"] and d.target_name == "y"

    def test_target_by_name(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,y,b\n1,2,3\n")
        d = load_csv(p, "y")
        np.testing.assert_array_equal(d.inputs, [[1, 3]])
        assert d.targets[0] == 2

    def test_na_cell(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,y\n1,2\nNA,3\n")
        with pytest.raises(NonNumericCellError) as exc:
            load_csv(p)
        assert exc.value.row == 3 and exc.value.column == "a"

    def test_ragged(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,y\n1,2\n1,2,3\n")
        with pytest.raises(RaggedRowError) as exc:
            load_csv(p)
        assert exc.value.row == 3

    def test_missing_column(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,y\n1,2\n")
        with pytest.raises(MissingColumnError):
            load_csv(p, "price")

    def test_errors_are_distinct(self):
        assert len({RaggedRowError, NonNumericCellError, MissingColumnError}) == 3
        assert not issubclass(RaggedRowError, NonNumericCellError)

    def test_round_trip(self, tmp_path):
        d = gen_smooth(100, 5)
        save_csv(d, tmp_path / "s.csv")
        back = load_csv(tmp_path / "s.csv")
        np.testing.assert_allclose(back.inputs, d.inputs, rtol=1e-12)
        np.testing.assert_allclose(back.targets, d.targets, rtol=1e-12)

    def test_boston_file(self):
        from jointuq.config import resolve_data_path
        d = load_csv(resolve_data_path("boston_housing.csv"), "MEDV")
        assert len(d) == 506 and d.n_features == 13


class TestNormalizer:
    def test_two_targets(self):
        d = Dataset(np.zeros((2, 1)), np.array([1.0, 3.0]))
        n = fit_normalizer(d)
        assert n.target_mean == 2.0 and n.target_std == 1.0
        np.testing.assert_array_equal(n.apply_targets(d.targets), [-1.0, 1.0])

    def test_constant_column(self):
        d = Dataset(np.full((4, 1), 7.0), np.arange(4.0))
        n = fit_normalizer(d)
        assert n.input_std[0] == 1.0
        np.testing.assert_array_equal(n.apply_inputs(d.inputs), 0.0)

    def test_train_subset_only(self):
        d = Dataset(np.arange(10.0).reshape(-1, 1), np.arange(10.0))
        n = fit_normalizer(d, [0, 1, 2])
        assert n.input_mean[0] == 1.0

    def test_empty_indices(self):
        with pytest.raises(ValueError):
            fit_normalizer(Dataset(np.zeros((2, 1)), np.zeros(2)), [])

    def test_normalised_train_statistics(self):
        rng = np.random.default_rng(0)
        d = Dataset(rng.normal(3, 5, size=(200, 4)), rng.normal(-1, 2, size=200))
        idx = np.arange(150)
        n = fit_normalizer(d, idx)
        z = n.apply(d.subset(idx))
        assert np.all(np.abs(z.inputs.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(z.inputs.std(axis=0) - 1) < 1e-9)
        assert abs(z.targets.mean()) < 1e-9 and abs(z.targets.std() - 1) < 1e-9

    @given(arrays(np.float64, (20, 3), elements=st.floats(-1e3, 1e3)))
    @settings(max_examples=50)
    def test_invert_apply_identity(self, x):
        d = Dataset(x, x[:, 0] * 2)
        n = fit_normalizer(d)
        back = n.invert(n.apply(d))
        np.testing.assert_allclose(back.inputs, d.inputs, rtol=1e-12, atol=1e-9)
        np.testing.assert_allclose(back.targets, d.targets, rtol=1e-12, atol=1e-9)

    def test_dict_round_trip(self):
        n = fit_normalizer(gen_smooth(30, 0))
        m = Normalizer.from_dict(n.to_dict())
        np.testing.assert_array_equal(m.input_std, n.input_std)
        assert m.target_mean == n.target_mean


class TestFolds:
    def test_sizes(self):
        plan = make_folds(100, 50, 0.95, 0)
        assert len(plan) == 50
        for tr, te in plan:
            assert len(tr) == 95 and len(te) == 5

    def test_disjoint_and_complete(self):
        for tr, te in make_folds(37, 10, 0.8, 1):
            assert not set(tr) & set(te)
            assert sorted(set(tr) | set(te)) == list(range(37))

    def test_test_membership_frequency(self):
        n, k = 400, 50
        plan = make_folds(n, k, 0.95, 2)
        freq = np.zeros(n)
        for _, te in plan:
            freq[te] += 1
        p = 20 / 400
        # Average frequency is exact; per-index counts stay within binomial 3-sigma bands almost surely.
        assert freq.mean() / k == pytest.approx(p, rel=1e-12)
        assert np.mean(np.abs(freq - k * p) <= 3 * np.sqrt(k * p * (1 - p)) + 1) > 0.99

    def test_degenerate(self):
        with pytest.raises(ValueError):
            make_folds(10, 3, 0.99, 0)
        with pytest.raises(ValueError):
            make_folds(10, 3, 0.01, 0)

    def test_seeded(self):
        a, b = make_folds(30, 3, 0.9, 5), make_folds(30, 3, 0.9, 5)
        for (ta, sa), (tb, sb) in zip(a, b):
            np.testing.assert_array_equal(ta, tb)
            np.testing.assert_array_equal(sa, sb)
