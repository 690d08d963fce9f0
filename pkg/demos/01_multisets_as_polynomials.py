"""A multiset of vectors as the coefficient grid of one bivariate polynomial.

Each row x of X becomes the factor t - (x_1 + x_2 z + ... + x_d z^(d-1)).
Multiplying the factors gives a grid of coefficients that does not depend on
row order and differs for any two different multisets.  The Fourier route
computes the same grid with one pointwise product.
"""
import numpy as np

from ssma import expand_bivariate, fconv, representation_shape

rng = np.random.default_rng(0)
X = rng.integers(-2, 3, (3, 2)) / 2.0
print("multiset rows:\n", X)

direct = expand_bivariate(X)
fourier = fconv(X)
print("\ngrid shape", direct.shape, "== representation_shape", tuple(representation_shape(3, 2)[:2]))
print("coefficient of t^k z^l (rows k, columns l):\n", np.round(fourier, 6))
print("max |fourier - direct| =", np.abs(fourier - direct).max())

shuffled = X[rng.permutation(3)]
print("\nsame rows, new order -> max change", np.abs(fconv(shuffled) - fourier).max())

Y = X.copy()
Y[0, 1] += 0.5
print("move one entry by 0.5  -> max change", np.abs(fconv(Y) - fourier).max())

# Swapping coordinates between rows keeps every column's multiset but changes
# the vector multiset; coordinate-wise pooling cannot see the difference.
A = np.array([[1.0, 0.0], [0.0, 1.0]])
B = np.array([[1.0, 1.0], [0.0, 0.0]])
print("\nA and B share per-coordinate sums and maxima:", A.sum(0), B.sum(0), A.max(0), B.max(0))
print("their grids differ by", np.abs(fconv(A) - fconv(B)).max())
