"""Fourier-domain sequential signal mixing of multisets.

Each element ``x`` of a multiset is lifted by an affine map to a 2D signal
(the coefficient grid of the bivariate factor ``t - Enc(x)``), all signals are
taken to the Fourier domain, multiplied pointwise, and brought back.  By the
circular convolution theorem the result is the coefficient grid of the
product polynomial, which separates multisets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .numerics import EmptyInputError, PolarGrid, dft_1d, fft_2d, idft_1d, ifft_2d

#: imaginary residual tolerated when reading a real grid back from the Fourier domain
IMAG_TOL = 1e-9


class RepresentationShape(NamedTuple):
    m1: int
    m2: int
    m: int


def representation_shape(n: int, d: int) -> RepresentationShape:
    """Grid shape for ``n`` elements of dimension ``d``: ``(n+1, n(d-1)+1)``."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    m1, m2 = n + 1, n * (d - 1) + 1
    return RepresentationShape(m1, m2, m1 * m2)


def canonical_affine(n: int, d: int):
    """Weights ``(W, B)`` with ``W @ x + B`` = flattened canonical encoding of ``x``.

    Row 0 of the grid holds ``-x`` in its first ``d`` cells and row 1 holds a
    single 1 at column 0: the coefficients of ``t - sum_j x_j z^(j-1)``.
    """
    m1, m2, m = representation_shape(n, d)
    W = np.zeros((m, d))
    W[np.arange(d), np.arange(d)] = -1.0
    B = np.zeros(m)
    B[m2] = 1.0
    return W, B


@dataclass
class AffineEncoderConfig:
    n: int
    d: int
    learnable: bool = False
    weights: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None
    shape: RepresentationShape = field(init=False)

    def __post_init__(self):
        self.shape = representation_shape(self.n, self.d)
        if self.learnable and (self.weights is None or self.bias is None):
            W, B = canonical_affine(self.n, self.d)
            self.weights = W if self.weights is None else self.weights
            self.bias = B if self.bias is None else self.bias

    def affine(self):
        if self.learnable:
            return np.asarray(self.weights, dtype=np.float64), np.asarray(self.bias, dtype=np.float64)
        return canonical_affine(self.n, self.d)


def encode_affine(x, cfg: AffineEncoderConfig) -> np.ndarray:
    """Lift feature vector(s) ``x`` of shape ``(..., d)`` to grids ``(..., m1, m2)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != cfg.d:
        raise ValueError(f"expected feature dimension {cfg.d}, got {x.shape[-1]}")
    W, B = cfg.affine()
    flat = x @ W.T + B
    return flat.reshape(x.shape[:-1] + (cfg.shape.m1, cfg.shape.m2))


def fourier_product(polar: Sequence[PolarGrid], normalize: bool = False,
                    phase_mean: bool = False) -> PolarGrid:
    """Pointwise product of polar grids: log-magnitudes and phases add.

    With ``normalize`` the summed log-magnitude is divided by the number of
    factors (geometric mean of magnitudes); the phase is left summed unless
    ``phase_mean`` is also set.
    """
    if len(polar) == 0:
        raise EmptyInputError("fourier_product of no grids")
    shape = polar[0].shape
    if any(p.shape != shape for p in polar):
        raise ValueError("all polar grids must share a shape")
    n = len(polar)
    logmag = np.sum([p.logmag for p in polar], axis=0)
    phase = np.sum([p.phase for p in polar], axis=0)
    if normalize:
        logmag = logmag / n
        if phase_mean:
            phase = phase / n
    return PolarGrid(logmag, phase)


def real_part(z: np.ndarray, tol: float = IMAG_TOL) -> np.ndarray:
    """Drop the imaginary part after checking it is numerical residue."""
    scale = max(float(np.max(np.abs(z), initial=0.0)), 1.0)
    resid = float(np.max(np.abs(z.imag), initial=0.0))
    if resid > tol * scale:
        raise ArithmeticError(f"imaginary residual {resid:.3e} exceeds {tol:g} x {scale:.3e}")
    return z.real.copy()


def fconv(X, normalize: bool = False, phase_mean: bool = False,
          cfg: Optional[AffineEncoderConfig] = None) -> np.ndarray:
    """Coefficient grid of the multiset ``X`` via 2D FFT, pointwise product, inverse FFT.

    ``X`` has shape ``(n, d)`` (or ``(..., n, d)`` for a stack of multisets of
    equal size).  With ``normalize`` off this equals
    :func:`ssma.polyset.expand_bivariate`.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim < 2 or X.shape[-2] == 0:
        raise EmptyInputError("fconv of an empty multiset")
    n, d = X.shape[-2:]
    if cfg is None:
        cfg = AffineEncoderConfig(n, d)
    spectra = fft_2d(encode_affine(X, cfg))
    if normalize:
        polar = [PolarGrid.from_complex(spectra[..., i, :, :]) for i in range(n)]
        prod = fourier_product(polar, normalize=True, phase_mean=phase_mean).to_complex()
    else:
        prod = np.prod(spectra, axis=-3)
    out = ifft_2d(prod)
    if phase_mean:
        # the 1/n phase root is not conjugate-symmetric; keep the real part only
        return out.real.copy()
    return real_part(out)


def fconv_scalar(xs) -> np.ndarray:
    """1D circular convolution of ``h(x_i) = [-x_i, 1, 0, ..., 0]`` over the multiset."""
    xs = np.asarray(xs, dtype=np.float64).ravel()
    n = xs.size
    if n == 0:
        raise EmptyInputError("fconv_scalar of an empty multiset")
    h = np.zeros((n, n + 1))
    h[:, 0] = -xs
    h[:, 1] = 1.0
    return real_part(idft_1d(np.prod(dft_1d(h), axis=0)))
