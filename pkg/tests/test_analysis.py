import json

import numpy as np
import pytest

from ssma import analysis
from ssma.analysis import (SumAggregatorParams, UnsupportedSmoothnessError, cross_hessian,
                           helper_bound_check, indicator_table, lower_lipschitz_probe, mix_value,
                           mixing_bound, mixing_table, mixing_table_fd, normalization_check,
                           spectral_norm, sumofgram_label, upper_lipschitz_check)
from ssma.numerics import PolarGrid


class TestCrossHessian:
    def test_bilinear_map(self):
        M = np.array([[1.0, 2.0], [0.0, -3.0]])

        def f(X):
            return np.array([X[0] @ M @ X[1]])

        X = np.random.default_rng(0).normal(size=(3, 2))
        np.testing.assert_allclose(cross_hessian(f, X, 0, 1), M, atol=1e-6)
        np.testing.assert_allclose(cross_hessian(f, X, 0, 2), 0.0, atol=1e-8)

    def test_requires_distinct_neighbors(self):
        with pytest.raises(ValueError):
            cross_hessian(lambda X: X.sum(), np.ones((2, 2)), 1, 1)

    def test_non_finite_output(self):
        with pytest.raises(analysis.ProbeError):
            mix_value(lambda X: np.array([np.nan]), np.ones((2, 1)), 0, 1)


class TestSpectralNorm:
    def test_matches_svd(self):
        rng = np.random.default_rng(1)
        for shape in [(1, 1), (3, 3), (4, 2), (2, 5)]:
            M = rng.normal(size=shape)
            assert spectral_norm(M) == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-8)

    def test_zero(self):
        assert spectral_norm(np.zeros((3, 3))) == 0.0


class TestMixing:
    def test_sum_aggregator_pooling_does_not_mix(self):
        params = SumAggregatorParams.random(2, 8, 8, 1, np.random.default_rng(2))
        X = np.random.default_rng(3).uniform(-1, 1, (3, 2))
        assert max(mix_value(params.pooled, X, 0, 1, ell) for ell in range(8)) <= 1e-6

    def test_sumofgram_mixes_with_unit_strength(self):
        X = np.random.default_rng(4).uniform(-1, 1, (4, 3))
        assert mix_value(sumofgram_label, X, 0, 2) == pytest.approx(1.0, abs=1e-4)

    @pytest.mark.parametrize("act", ["tanh", "sigmoid"])
    def test_bound_holds(self, act):
        rng = np.random.default_rng(5)
        for _ in range(5):
            params = SumAggregatorParams.random(2, 6, 5, 2, rng, activation=act)
            X = rng.uniform(-1, 1, (3, 2))
            mix, bound = mixing_bound(params, X, 0, 1, ell=1)
            assert mix <= bound + 1e-5

    def test_non_smooth_activation_rejected(self):
        params = SumAggregatorParams.random(2, 4, 4, 1, np.random.default_rng(6), activation="relu")
        with pytest.raises(UnsupportedSmoothnessError):
            mixing_bound(params, np.ones((2, 2)), 0, 1)

    def test_bound_grows_with_parameter_scale(self):
        params = SumAggregatorParams.random(2, 6, 6, 1, np.random.default_rng(7), activation="tanh")
        X = np.random.default_rng(8).uniform(-0.1, 0.1, (3, 2))
        assert analysis.mixing_scale_slope(params, X, 0, 1, scales=(0.1, 0.2, 0.4)) > 1.0


class TestConvolutionMixing:
    @pytest.mark.parametrize("m", [3, 4, 5, 6])
    def test_exact_table_is_indicator(self, m):
        np.testing.assert_array_equal(mixing_table(m), indicator_table(m))

    @pytest.mark.parametrize("m", [3, 5])
    def test_finite_differences_agree(self, m):
        np.testing.assert_allclose(mixing_table_fd(m), indicator_table(m), atol=1e-6)

    def test_direct_and_fft_convolution(self):
        rng = np.random.default_rng(9)
        u, v = rng.normal(size=7), rng.normal(size=7)
        np.testing.assert_allclose(analysis.circular_conv_fft(u, v), analysis.circular_conv_direct(u, v),
                                   atol=1e-12)

    def test_identity_index(self):
        assert analysis.conv_mixing_identity(5, (3, 4)) == 2
        with pytest.raises(ValueError):
            analysis.conv_mixing_identity(3, (3,))


class TestStability:
    def test_lower_probe_ratios_decay(self):
        rng = np.random.default_rng(10)
        rep = lower_lipschitz_probe(rng.uniform(-1, 1, 2), np.array([0.6, 0.8]))
        r = [v for _, v in rep.ratios]
        assert rep.passed and all(b < a for a, b in zip(r, r[1:]))
        assert json.loads(rep.dumps())["probe"] == "lower_lipschitz"

    def test_lower_probe_rejects_bad_steps(self):
        with pytest.raises(ValueError):
            lower_lipschitz_probe([0.0], [1.0], hs=(1e-2, 1e-1))

    def test_lower_probe_flags_a_lipschitz_map(self):
        # sorting is invariant and bi-Lipschitz (not differentiable), so its ratio stays flat
        rep = lower_lipschitz_probe([0.1, 0.2], [1.0, 0.0], f=lambda S: np.sort(S, axis=0))
        assert not rep.passed

    def test_upper_bound_on_random_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            X = rng.uniform(-0.3, 0.3, (3, 2))
            Y = rng.uniform(-0.3, 0.3, (3, 2))
            assert upper_lipschitz_check(X, Y, 1.0).passed
            pts = np.exp(1j * rng.uniform(0, 2 * np.pi, (20, 2)))
            assert helper_bound_check(X, Y, 1.0, pts).passed

    def test_row_norm_precondition(self):
        with pytest.raises(ValueError):
            upper_lipschitz_check(np.ones((2, 2)), np.zeros((2, 2)), 1.0)

    def test_identical_multisets_give_zero(self):
        X = np.random.default_rng(12).uniform(-0.4, 0.4, (3, 2))
        rep = upper_lipschitz_check(X, X[::-1], 1.0)
        assert rep.lhs == pytest.approx(0.0, abs=1e-12)

    def test_normalization_bound(self):
        rng = np.random.default_rng(13)
        grids = [PolarGrid(rng.normal(size=(3, 4)), rng.uniform(-3, 3, (3, 4))) for _ in range(5)]
        rep = normalization_check(grids)
        assert rep.passed and rep.lhs <= rep.rhs + 1e-12


class TestLabels:
    def test_sumofgram_by_definition(self):
        X = np.random.default_rng(14).normal(size=(4, 3))
        pairs = sum(X[p] @ X[q] for p in range(4) for q in range(p, 4))
        assert sumofgram_label(X) == pytest.approx(pairs)
        assert sumofgram_label(X, full=True) == pytest.approx(sum(X[p] @ X[q] for p in range(4) for q in range(4)))

    def test_digest_is_stable(self):
        a = analysis.digest(np.arange(3.0), 1.0)
        assert a == analysis.digest(np.arange(3.0), 1.0)
        assert a != analysis.digest(np.arange(3.0), 2.0)
