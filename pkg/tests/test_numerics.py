import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssma.numerics import (EmptyInputError, InvalidInputError, PolarGrid, brute_force_assignment,
                           dft_1d, dft_matrix_2d, fft_2d, idft_1d, ifft_2d, min_cost_assignment,
                           naive_dft)


class TestOneDimensional:
    @pytest.mark.parametrize("L", list(range(1, 41)) + [64, 97, 128, 255])
    def test_matches_direct_sum(self, L):
        rng = np.random.default_rng(L)
        x = rng.normal(size=L) + 1j * rng.normal(size=L)
        np.testing.assert_allclose(dft_1d(x), naive_dft(x), atol=1e-10 * max(1.0, np.abs(x).sum()))
        np.testing.assert_allclose(idft_1d(x), naive_dft(x, inverse=True), atol=1e-10 * max(1.0, np.abs(x).sum()))

    @pytest.mark.parametrize("L", [1, 5, 16, 33])
    def test_agrees_with_numpy(self, L):
        x = np.random.default_rng(0).normal(size=(3, L))
        np.testing.assert_allclose(dft_1d(x), np.fft.fft(x), atol=1e-10)

    def test_round_trip_on_stacks(self):
        x = np.random.default_rng(1).normal(size=(4, 2, 13))
        np.testing.assert_allclose(idft_1d(dft_1d(x)).real, x, atol=1e-12)

    def test_delta_transforms_to_ones(self):
        x = np.zeros(7)
        x[0] = 1.0
        np.testing.assert_allclose(dft_1d(x), np.ones(7), atol=1e-14)

    def test_empty_input_rejected(self):
        for fn in (dft_1d, idft_1d, naive_dft):
            with pytest.raises(EmptyInputError):
                fn(np.zeros(0))

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
    @settings(max_examples=60, deadline=None)
    def test_parseval(self, vals):
        x = np.array(vals)
        X = dft_1d(x)
        assert np.isclose(np.sum(np.abs(X) ** 2), x.size * np.sum(x * x), rtol=1e-9, atol=1e-6)


class TestTwoDimensional:
    @pytest.mark.parametrize("shape", [(1, 1), (2, 3), (3, 7), (5, 13), (8, 8)])
    def test_round_trip(self, shape):
        g = np.random.default_rng(2).normal(size=shape)
        np.testing.assert_allclose(ifft_2d(fft_2d(g)).real, g, atol=1e-12)

    def test_matches_numpy_fft2(self):
        g = np.random.default_rng(3).normal(size=(2, 5, 9))
        np.testing.assert_allclose(fft_2d(g), np.fft.fft2(g), atol=1e-10)

    def test_dense_matrix_is_the_transform(self):
        g = np.random.default_rng(4).normal(size=(3, 5))
        F = dft_matrix_2d(3, 5)
        np.testing.assert_allclose(F @ g.ravel(), fft_2d(g).ravel(), atol=1e-12)
        assert not F.flags.writeable

    def test_empty_grid_rejected(self):
        with pytest.raises(EmptyInputError):
            fft_2d(np.zeros((3, 0)))
        with pytest.raises(EmptyInputError):
            ifft_2d(np.zeros(4))


class TestPolarGrid:
    def test_complex_round_trip(self):
        z = np.random.default_rng(5).normal(size=(3, 4)) + 1j * np.random.default_rng(6).normal(size=(3, 4))
        np.testing.assert_allclose(PolarGrid.from_complex(z).to_complex(), z, atol=1e-13)

    def test_zero_is_clamped_not_minus_infinity(self):
        p = PolarGrid.from_complex(np.zeros((2, 2)))
        assert np.all(np.isfinite(p.logmag))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            PolarGrid(np.zeros((2, 2)), np.zeros((2, 3)))


class TestAssignment:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
    def test_matches_exhaustive_search(self, n):
        rng = np.random.default_rng(n)
        for _ in range(10):
            C = rng.uniform(0, 5, (n, n))
            fast, slow = min_cost_assignment(C), brute_force_assignment(C)
            assert fast.cost == pytest.approx(slow.cost, abs=1e-12)
            assert C[np.arange(n), fast.permutation].sum() == pytest.approx(fast.cost)

    def test_ties_still_optimal(self):
        res = min_cost_assignment(np.ones((4, 4)))
        assert res.cost == 4.0
        assert sorted(res.permutation) == [0, 1, 2, 3]

    @pytest.mark.parametrize("bad,err", [
        (np.zeros((2, 3)), InvalidInputError),
        (-np.ones((2, 2)), InvalidInputError),
        (np.array([[0.0, np.nan], [1.0, 1.0]]), InvalidInputError),
        (np.zeros((0, 0)), EmptyInputError),
    ])
    def test_rejects_bad_matrices(self, bad, err):
        with pytest.raises(err):
            min_cost_assignment(bad)
