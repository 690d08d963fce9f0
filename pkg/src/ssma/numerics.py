"""Array substrate: arbitrary-length DFTs, polar grids and min-cost assignment.

Transforms act on the last axis (1D) or the last two axes (2D), so stacks of
signals can be pushed through in one call.  Power-of-two lengths use an
iterative radix-2 Cooley-Tukey kernel; every other length goes through
Bluestein's chirp-z reduction onto a power-of-two convolution.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

#: magnitudes below this are clamped before taking logs
LOG_CLAMP = 1e-12


class EmptyInputError(ValueError):
    """Raised when an operation receives a zero-length input."""


class InvalidInputError(ValueError):
    """Raised on malformed (non-square, negative, non-finite) inputs."""


# ---------------------------------------------------------------------------
# 1D transforms
# ---------------------------------------------------------------------------

def naive_dft(x, inverse: bool = False) -> np.ndarray:
    """O(L^2) reference DFT along the last axis. Kept as a test oracle."""
    x = np.asarray(x, dtype=np.complex128)
    L = x.shape[-1]
    if L == 0:
        raise EmptyInputError("DFT of an empty vector")
    sign = 1.0 if inverse else -1.0
    k = np.arange(L)
    W = np.exp(sign * 2j * np.pi * np.outer(k, k) / L)
    out = x @ W.T
    return out / L if inverse else out


@lru_cache(maxsize=64)
def _bit_reverse(L: int) -> np.ndarray:
    bits = L.bit_length() - 1
    idx = np.arange(L)
    rev = np.zeros(L, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _radix2(x: np.ndarray, sign: float) -> np.ndarray:
    L = x.shape[-1]
    a = x[..., _bit_reverse(L)].copy()
    half = 1
    while half < L:
        tw = np.exp(sign * 1j * np.pi * np.arange(half) / half)
        a = a.reshape(*x.shape[:-1], L // (2 * half), 2, half)
        even = a[..., 0, :]
        odd = a[..., 1, :] * tw
        a = np.stack((even + odd, even - odd), axis=-2)
        half *= 2
    return a.reshape(x.shape)


@lru_cache(maxsize=64)
def _chirp(L: int, sign: float):
    n = np.arange(L)
    # n^2 mod 2L keeps the phase argument small for long transforms
    w = np.exp(sign * 1j * np.pi * ((n * n) % (2 * L)) / L)
    M = 1 << (2 * L - 1).bit_length()
    b = np.zeros(M, dtype=np.complex128)
    b[:L] = np.conj(w)
    if L > 1:
        b[M - L + 1:] = np.conj(w[1:])[::-1]
    return w, M, _radix2(b, -1.0)


def _bluestein(x: np.ndarray, sign: float) -> np.ndarray:
    L = x.shape[-1]
    w, M, B = _chirp(L, sign)
    a = np.zeros(x.shape[:-1] + (M,), dtype=np.complex128)
    a[..., :L] = x * w
    conv = _radix2(_radix2(a, -1.0) * B, 1.0) / M
    return conv[..., :L] * w


def _transform(x, sign: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    L = x.shape[-1] if x.ndim else 0
    if L == 0:
        raise EmptyInputError("DFT of an empty vector")
    if L & (L - 1) == 0:
        return _radix2(x, sign)
    return _bluestein(x, sign)


def dft_1d(x) -> np.ndarray:
    """Forward DFT, ``X[j] = sum_k x[k] exp(-2 pi i jk / L)``, on the last axis."""
    return _transform(x, -1.0)


def idft_1d(x) -> np.ndarray:
    """Inverse of :func:`dft_1d` (includes the 1/L factor)."""
    x = np.asarray(x, dtype=np.complex128)
    return _transform(x, 1.0) / (x.shape[-1] if x.ndim else 1)


# ---------------------------------------------------------------------------
# 2D transforms
# ---------------------------------------------------------------------------

def _check_grid(g) -> np.ndarray:
    g = np.asarray(g, dtype=np.complex128)
    if g.ndim < 2 or g.shape[-1] == 0 or g.shape[-2] == 0:
        raise EmptyInputError(f"2D transform needs a non-empty grid, got shape {g.shape}")
    return g


def fft_2d(g) -> np.ndarray:
    """Separable 2D DFT over the last two axes (rows then columns)."""
    g = _check_grid(g)
    out = dft_1d(g)
    return np.swapaxes(dft_1d(np.swapaxes(out, -1, -2)), -1, -2)


def ifft_2d(g) -> np.ndarray:
    g = _check_grid(g)
    out = idft_1d(g)
    return np.swapaxes(idft_1d(np.swapaxes(out, -1, -2)), -1, -2)


@lru_cache(maxsize=64)
def dft_matrix_2d(m1: int, m2: int) -> np.ndarray:
    """Dense (m1*m2, m1*m2) matrix of ``fft_2d`` acting on row-major flattened grids.

    Built by pushing the identity through :func:`fft_2d`, so it is exactly the
    transform used everywhere else.  The tape-based layers use it as a fixed
    real linear operator.
    """
    m = m1 * m2
    basis = np.eye(m).reshape(m, m1, m2)
    F = fft_2d(basis).reshape(m, m).T
    F.setflags(write=False)
    return F


# ---------------------------------------------------------------------------
# Polar grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolarGrid:
    """Complex grid stored as natural-log magnitude and phase (radians)."""

    logmag: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        if np.shape(self.logmag) != np.shape(self.phase):
            raise ValueError("logmag and phase must share a shape")

    @property
    def shape(self):
        return np.shape(self.logmag)

    @classmethod
    def from_complex(cls, z) -> "PolarGrid":
        z = np.asarray(z, dtype=np.complex128)
        mag = np.maximum(np.abs(z), LOG_CLAMP)
        return cls(np.log(mag), np.angle(z))

    def to_complex(self) -> np.ndarray:
        return np.exp(self.logmag) * (np.cos(self.phase) + 1j * np.sin(self.phase))

    @property
    def magnitude(self) -> np.ndarray:
        return np.exp(self.logmag)


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Assignment:
    permutation: np.ndarray
    cost: float


def min_cost_assignment(cost) -> Assignment:
    """Globally optimal row-to-column matching for a square nonnegative cost matrix."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise InvalidInputError(f"cost matrix must be square, got shape {cost.shape}")
    if cost.size == 0:
        raise EmptyInputError("empty cost matrix")
    if not np.all(np.isfinite(cost)):
        raise InvalidInputError("cost matrix has non-finite entries")
    if np.any(cost < 0):
        raise InvalidInputError("cost matrix has negative entries")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=np.int64)
    perm[rows] = cols
    return Assignment(perm, float(cost[rows, cols].sum()))


def brute_force_assignment(cost) -> Assignment:
    """Exhaustive search over all permutations; only sane for n <= 8."""
    from itertools import permutations

    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    best, best_perm = np.inf, None
    idx = np.arange(n)
    for perm in permutations(range(n)):
        c = cost[idx, perm].sum()
        if c < best:
            best, best_perm = c, perm
    return Assignment(np.array(best_perm, dtype=np.int64), float(best))
