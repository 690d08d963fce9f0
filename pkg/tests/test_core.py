import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ssma.core import (AffineEncoderConfig, canonical_affine, encode_affine, fconv, fconv_scalar,
                       fourier_product, real_part, representation_shape)
from ssma.numerics import EmptyInputError, PolarGrid
from ssma.polyset import elementary_coeffs, expand_bivariate


def multisets(max_n=5, max_d=4):
    return st.tuples(st.integers(1, max_n), st.integers(1, max_d)).flatmap(
        lambda nd: hnp.arrays(np.float64, nd, elements=st.floats(-1, 1)))


class TestShape:
    def test_formula(self):
        for n in range(1, 17):
            for d in range(1, 33):
                s = representation_shape(n, d)
                assert s.m == (n + 1) * (n * (d - 1) + 1) == s.m1 * s.m2

    def test_invalid(self):
        with pytest.raises(ValueError):
            representation_shape(0, 3)


class TestAffineLift:
    def test_canonical_grid_is_linear_factor(self):
        x = np.array([0.5, -0.25, 2.0])
        grid = encode_affine(x, AffineEncoderConfig(2, 3))
        expect = np.zeros((3, 5))
        expect[0, :3] = -x
        expect[1, 0] = 1.0
        np.testing.assert_array_equal(grid, expect)

    def test_learnable_starts_canonical(self):
        cfg = AffineEncoderConfig(3, 2, learnable=True)
        W, B = canonical_affine(3, 2)
        np.testing.assert_array_equal(cfg.affine()[0], W)
        np.testing.assert_array_equal(cfg.affine()[1], B)

    def test_custom_affine_is_used(self):
        W, B = canonical_affine(2, 2)
        cfg = AffineEncoderConfig(2, 2, learnable=True, weights=2 * W, bias=B)
        x = np.array([1.0, 1.0])
        # doubling W doubles the -x cells and leaves the constant 1 alone
        canonical = encode_affine(x, AffineEncoderConfig(2, 2))
        np.testing.assert_allclose(encode_affine(x, cfg), 2 * canonical - B.reshape(3, 3))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            encode_affine(np.zeros(3), AffineEncoderConfig(2, 2))


class TestFourierPath:
    @given(multisets())
    @settings(max_examples=80, deadline=None)
    def test_equals_direct_expansion(self, X):
        ref = expand_bivariate(X)
        np.testing.assert_allclose(fconv(X), ref, atol=1e-9 * max(1.0, np.abs(ref).max()))

    @given(hnp.arrays(np.float64, st.integers(1, 8), elements=st.floats(-1, 1)))
    @settings(max_examples=80, deadline=None)
    def test_scalar_version(self, xs):
        np.testing.assert_allclose(fconv_scalar(xs), elementary_coeffs(xs), atol=1e-10)

    @given(multisets(), st.randoms(use_true_random=False))
    @settings(max_examples=60, deadline=None)
    def test_permutation_invariant(self, X, rnd):
        perm = list(range(len(X)))
        rnd.shuffle(perm)
        np.testing.assert_allclose(fconv(X[perm]), fconv(X), atol=1e-12)

    def test_batched_stack(self):
        X = np.random.default_rng(0).uniform(-1, 1, (6, 3, 2))
        out = fconv(X)
        for k in range(6):
            np.testing.assert_allclose(out[k], fconv(X[k]), atol=1e-14)

    def test_normalized_is_real_and_invariant(self):
        X = np.random.default_rng(1).uniform(-1, 1, (4, 3))
        a, b = fconv(X, normalize=True), fconv(X[::-1], normalize=True)
        assert a.dtype == np.float64
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_normalized_single_element_is_identity(self):
        x = np.random.default_rng(2).uniform(-1, 1, (1, 3))
        np.testing.assert_allclose(fconv(x, normalize=True), fconv(x), atol=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            fconv(np.zeros((0, 2)))
        with pytest.raises(EmptyInputError):
            fconv_scalar([])


class TestFourierProduct:
    def test_magnitudes_multiply(self):
        rng = np.random.default_rng(3)
        zs = [rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3)) for _ in range(3)]
        prod = fourier_product([PolarGrid.from_complex(z) for z in zs]).to_complex()
        np.testing.assert_allclose(prod, zs[0] * zs[1] * zs[2], rtol=1e-12)

    def test_geometric_mean(self):
        g = [PolarGrid(np.log(np.full((1, 1), v)), np.zeros((1, 1))) for v in (2.0, 8.0)]
        assert fourier_product(g, normalize=True).magnitude[0, 0] == pytest.approx(4.0)

    def test_phase_summed_unless_averaged(self):
        g = [PolarGrid(np.zeros((1, 1)), np.full((1, 1), 0.5)) for _ in range(4)]
        assert fourier_product(g, normalize=True).phase[0, 0] == pytest.approx(2.0)
        assert fourier_product(g, normalize=True, phase_mean=True).phase[0, 0] == pytest.approx(0.5)

    def test_rejects_empty_and_mismatched(self):
        with pytest.raises(EmptyInputError):
            fourier_product([])
        with pytest.raises(ValueError):
            fourier_product([PolarGrid(np.zeros((1, 2)), np.zeros((1, 2))),
                             PolarGrid(np.zeros((2, 2)), np.zeros((2, 2)))])


def test_real_part_guards_imaginary_residue():
    assert real_part(np.array([1.0 + 1e-14j]))[0] == 1.0
    with pytest.raises(ArithmeticError):
        real_part(np.array([1.0 + 1e-3j]))
