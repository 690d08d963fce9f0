"""Brute-force DeepSets polynomials and Wasserstein-1 distance.

Everything here is computed by direct (linear, non-circular) polynomial
multiplication so it can serve as an independent reference for the Fourier
path in :mod:`ssma.core`.
"""
from __future__ import annotations

import numpy as np

from .numerics import EmptyInputError, min_cost_assignment


def as_multiset(X) -> np.ndarray:
    """Coerce to an ``(n, d)`` float64 matrix; 1D input is a scalar multiset."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"multiset must be an (n, d) matrix, got shape {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyInputError("multiset needs n >= 1 and d >= 1")
    return X


def elementary_coeffs(xs) -> np.ndarray:
    """Ascending-power coefficients of ``prod_i (t - x_i)``.

    >>> elementary_coeffs([1.0, 2.0])
    array([ 2., -3.,  1.])
    """
    xs = np.asarray(xs, dtype=np.float64).ravel()
    if xs.size == 0:
        raise EmptyInputError("elementary_coeffs of an empty multiset")
    c = np.array([1.0])
    for x in xs:
        nxt = np.zeros(c.size + 1)
        nxt[1:] += c
        nxt[:-1] -= x * c
        c = nxt
    return c


def _linear_conv2d(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i in range(b.shape[0]):
        for j in range(b.shape[1]):
            if b[i, j] != 0.0:
                out[i:i + a.shape[0], j:j + a.shape[1]] += b[i, j] * a
    return out


def expand_bivariate(X) -> np.ndarray:
    """Coefficient grid of ``prod_i (t - sum_j X_ij z^(j-1))``.

    Entry ``[k, l]`` is the coefficient of ``t^k z^l``; the grid has shape
    ``(n + 1, n(d - 1) + 1)``.  Factors are multiplied left to right.
    """
    X = as_multiset(X)
    grid = np.ones((1, 1))
    for row in X:
        factor = np.zeros((2, row.size))
        factor[0] = -row
        factor[1, 0] = 1.0
        grid = _linear_conv2d(grid, factor)
    return grid


def evaluate_bivariate(grid, t, z) -> complex:
    """Evaluate ``sum_{k,l} grid[k,l] t^k z^l`` by nested Horner."""
    grid = np.asarray(grid)
    acc = 0.0 + 0.0j
    for row in grid[::-1]:
        inner = 0.0 + 0.0j
        for c in row[::-1]:
            inner = inner * z + c
        acc = acc * t + inner
    return complex(acc)


def encode_poly(x, z) -> complex:
    """``Enc_z(x) = sum_j x_j z^(j-1)``."""
    x = np.asarray(x, dtype=np.float64)
    return complex(np.sum(x * np.power(complex(z), np.arange(x.size))))


def wasserstein1(X, Y) -> float:
    """``(1/n) min_pi sum_i ||X_i - Y_pi(i)||_1`` for equal-size multisets."""
    X, Y = as_multiset(X), as_multiset(Y)
    if X.shape != Y.shape:
        raise ValueError(f"multisets differ in shape: {X.shape} vs {Y.shape}")
    cost = np.abs(X[:, None, :] - Y[None, :, :]).sum(axis=-1)
    return min_cost_assignment(cost).cost / X.shape[0]


def lipschitz_constant(n: int, d: int, delta: float) -> float:
    """Upper Lipschitz constant ``(n+1)^3 d (1+delta)^(n-1)`` of the coefficient map."""
    if n < 1 or d < 1 or delta < 0:
        raise ValueError("need n >= 1, d >= 1, delta >= 0")
    return float((n + 1) ** 3 * d * (1.0 + delta) ** (n - 1))


def helper_constant(n: int, delta: float) -> float:
    """Pointwise bound ``n (1+delta)^(n-1)`` on |p_X(t,z) - p_Y(t,z)| / W1 for |t|=|z|=1."""
    return float(n * (1.0 + delta) ** (n - 1))
