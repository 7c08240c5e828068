import numpy as np
import pytest

from nsp.scenarios import ScenarioSpec, augment_ar, build_design


class TestBuildDesign:
    def test_constant(self):
        x = build_design(ScenarioSpec("piecewise_constant"), 5)
        assert x.shape == (5, 1)
        assert np.array_equal(x, np.ones((5, 1)))

    def test_linear_columns(self):
        x = build_design(ScenarioSpec("piecewise_polynomial", degree=1), 4)
        assert np.array_equal(x[:, 0], np.ones(4))
        assert np.allclose(x[:, 1], [0.25, 0.5, 0.75, 1.0])

    def test_polynomial_powers(self):
        x = build_design(ScenarioSpec("piecewise_polynomial", degree=3), 10)
        t = np.arange(1, 11) / 10
        for i in range(4):
            assert np.allclose(x[:, i], t ** i)

    def test_custom_passthrough_and_checks(self):
        mat = np.random.default_rng(0).standard_normal((6, 2))
        spec = ScenarioSpec("custom_regression")
        assert np.array_equal(build_design(spec, 6, mat), mat)
        with pytest.raises(ValueError):
            build_design(spec, 7, mat)
        with pytest.raises(ValueError):
            build_design(spec, 6)
        with pytest.raises(ValueError):
            build_design(ScenarioSpec("piecewise_constant"), 6, mat)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            ScenarioSpec("fourier")


class TestPipelineEquality:
    def test_polynomial_equals_custom_with_same_columns(self):
        # the declared polynomial scenario and a user-supplied matrix with
        # identical columns must drive the search identically
        from nsp.engine import NspConfig, nsp_run
        from nsp.thresholds import gaussian_threshold
        T = 300
        poly = build_design(ScenarioSpec("piecewise_polynomial", degree=1), T)
        custom = build_design(ScenarioSpec("custom_regression"), T, poly.copy())
        rng = np.random.default_rng(10)
        y = np.concatenate([np.zeros(150), np.full(150, 6.0)])
        y = y + rng.standard_normal(T)
        cfg = NspConfig(threshold=gaussian_threshold(T, 0.1, 1.0), M=100,
                        seed=12, rank_aware=True)
        a = nsp_run(y, poly, cfg)
        b = nsp_run(y, custom, cfg)
        assert a.to_dict() == b.to_dict()
        assert len(a) >= 1


class TestAugmentAr:
    def test_shapes_and_first_lag(self):
        y = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        x = np.ones((5, 1))
        y2, x2 = augment_ar(y, x, 1)
        assert x2.shape == (4, 2)
        assert np.array_equal(y2, [2.0, 3.0, 4.0, 5.0])
        assert np.array_equal(x2[:, 1], [1.0, 2.0, 3.0, 4.0])

    def test_two_lags(self):
        y = np.arange(1.0, 9.0)
        x = np.ones((8, 1))
        y2, x2 = augment_ar(y, x, 2)
        assert x2.shape == (6, 3)
        assert np.array_equal(x2[:, 1], y[1:-1])  # lag one
        assert np.array_equal(x2[:, 2], y[:-2])   # lag two

    def test_row_contents_match_model(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal(30)
        x = rng.standard_normal((30, 2))
        r = 3
        y2, x2 = augment_ar(y, x, r)
        for t in range(y2.size):
            orig = t + r  # 0-based index into the original series
            assert np.array_equal(x2[t, :2], x[orig])
            assert np.array_equal(x2[t, 2:], y[orig - 1::-1][:r])
            assert y2[t] == y[orig]

    def test_too_short(self):
        with pytest.raises(ValueError):
            augment_ar(np.zeros(3), np.ones((3, 2)), 1)
        with pytest.raises(ValueError):
            augment_ar(np.zeros(5), np.ones((5, 1)), 0)
