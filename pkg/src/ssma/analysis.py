"""Numerical probes of neighbor mixing, stability and normalization.

Every probe returns a small record holding the measured quantity, the
theoretical bound it is compared with, and a pass flag.  Records serialize to
flat JSON objects via ``to_json``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ANALYTIC_ACTIVATIONS, Tape
from .core import fconv, fourier_product
from .numerics import PolarGrid, dft_1d, idft_1d
from .polyset import as_multiset, evaluate_bivariate, expand_bivariate, helper_constant, \
    lipschitz_constant, wasserstein1


class ProbeError(RuntimeError):
    """A probed function produced non-finite values."""


class UnsupportedSmoothnessError(ValueError):
    """The requested activation is not twice continuously differentiable."""


def digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=np.float64)).tobytes())
    return h.hexdigest()[:16]


@dataclass
class MixProbeResult:
    i: int
    j: int
    ell: int
    mix_value: float
    bound: Optional[float] = None
    tolerance: float = 1e-5

    @property
    def passed(self) -> bool:
        return self.bound is None or self.mix_value <= self.bound + self.tolerance

    def to_json(self) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        return out


@dataclass
class StabilityReport:
    probe: str
    lhs: float
    rhs: float
    passed: bool
    tolerance: float
    ratios: list = field(default_factory=list)
    inputs_digest: str = ""

    def to_json(self) -> dict:
        return {"probe": self.probe, "inputs_digest": self.inputs_digest, "lhs": self.lhs,
                "rhs": self.rhs, "pass": bool(self.passed), "tolerance": self.tolerance,
                "ratios": [list(r) for r in self.ratios]}

    def dumps(self) -> str:
        return json.dumps(self.to_json())


# ---------------------------------------------------------------------------
# Cross-derivatives and spectral norms
# ---------------------------------------------------------------------------

def _eval(f, X, ell):
    out = np.asarray(f(X), dtype=np.float64).ravel()
    v = out[ell]
    if not np.isfinite(v):
        raise ProbeError("probed function returned a non-finite value")
    return v


def cross_hessian(f: Callable, X, i: int, j: int, ell: int = 0, eps: float = 1e-4) -> np.ndarray:
    """``d x d`` block ``d^2 f_ell / dX_ia dX_jb`` by 4-point central differences."""
    if i == j:
        raise ValueError("cross_hessian needs two distinct neighbors")
    X = as_multiset(X).copy()
    d = X.shape[1]
    H = np.empty((d, d))
    for a in range(d):
        for b in range(d):
            acc = 0.0
            for si, sj, w in ((1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)):
                Y = X.copy()
                Y[i, a] += si * eps
                Y[j, b] += sj * eps
                acc += w * _eval(f, Y, ell)
            H[a, b] = acc / (4.0 * eps * eps)
    return H


def spectral_norm(M, iters: int = 100, tol: float = 1e-10) -> float:
    """Largest singular value by power iteration on ``M^T M``."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if not np.any(M):
        return 0.0
    MtM = M.T @ M
    v = np.ones(MtM.shape[0]) / np.sqrt(MtM.shape[0])
    # a deterministic perturbation avoids starting orthogonal to the top vector
    v += 1e-3 * np.arange(1, v.size + 1) / v.size
    lam = 0.0
    for _ in range(iters):
        w = MtM @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ MtM @ v)
        if abs(new - lam) <= tol * max(abs(new), 1.0):
            lam = new
            break
        lam = new
    return float(np.sqrt(max(lam, 0.0)))


def mix_value(f: Callable, X, i: int, j: int, ell: int = 0, eps: float = 1e-4) -> float:
    return spectral_norm(cross_hessian(f, X, i, j, ell, eps))


def mix_probe(f: Callable, X, i: int, j: int, ell: int = 0, eps: float = 1e-4,
              bound: Optional[float] = None) -> MixProbeResult:
    return MixProbeResult(i, j, ell, mix_value(f, X, i, j, ell, eps), bound)


# ---------------------------------------------------------------------------
# Sum-based aggregators: mixing value vs. the Jacobian/Hessian bound
# ---------------------------------------------------------------------------

@dataclass
class SumAggregatorParams:
    """``rho(sum_k phi(x_k))`` with ``phi = act(A x + b)`` and ``rho = W2 act(W1 z + b1) + b2``."""

    A: np.ndarray
    b: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    activation: str = "tanh"

    @classmethod
    def random(cls, d: int, m: int, hidden: int, out: int, rng, activation: str = "tanh",
               scale: float = 1.0) -> "SumAggregatorParams":
        g = lambda *s: scale * rng.normal(0.0, 1.0, s) / np.sqrt(s[-1])  # noqa: E731
        return cls(g(m, d), scale * rng.normal(0, 0.1, m), g(hidden, m), scale * rng.normal(0, 0.1, hidden),
                   g(out, hidden), scale * rng.normal(0, 0.1, out), activation)

    def scaled(self, s: float) -> "SumAggregatorParams":
        return SumAggregatorParams(*(s * np.asarray(v) for v in
                                     (self.A, self.b, self.W1, self.b1, self.W2, self.b2)),
                                   self.activation)

    def phi(self, x):
        return ad.activation(ad.affine(x, self.A, self.b), self.activation)

    def rho(self, z):
        return ad.affine(ad.activation(ad.affine(z, self.W1, self.b1), self.activation), self.W2, self.b2)

    def pooled(self, X) -> np.ndarray:
        """``sum_k phi(x_k)`` alone, before ``rho``."""
        tape = Tape()
        return ad.sum(self.phi(tape.var(as_multiset(X))), axis=0).value

    def __call__(self, X) -> np.ndarray:
        tape = Tape()
        z = ad.sum(self.phi(tape.var(as_multiset(X))), axis=0, keepdims=True)
        return self.rho(z).value[0]


def _tape_jacobian(fn, x) -> np.ndarray:
    """Jacobian of a vector map by one reverse pass per output."""
    x = np.asarray(x, dtype=np.float64)
    rows = []
    tape = Tape()
    xv = tape.var(x[None, :], requires_grad=True)
    out = fn(xv)
    k = out.value.size
    for o in range(k):
        for node in tape.nodes:
            node.grad = None
        seed = np.zeros_like(out.value)
        seed.flat[o] = 1.0
        tape.backward(out, seed)
        rows.append(xv.grad[0].copy())
    return np.array(rows)


def _rho_gradient(params: SumAggregatorParams, z, ell) -> np.ndarray:
    tape = Tape()
    zv = tape.var(np.asarray(z, dtype=np.float64)[None, :], requires_grad=True)
    out = params.rho(zv)[:, ell]
    tape.backward(ad.sum(out))
    return zv.grad[0]


def rho_hessian(params: SumAggregatorParams, z, ell: int, eps: float = 1e-4) -> np.ndarray:
    """Hessian of ``rho_ell`` by central differences of the tape gradient."""
    z = np.asarray(z, dtype=np.float64)
    H = np.empty((z.size, z.size))
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = eps
        H[:, k] = (_rho_gradient(params, z + e, ell) - _rho_gradient(params, z - e, ell)) / (2 * eps)
    return 0.5 * (H + H.T)


def mixing_bound(params: SumAggregatorParams, X, i: int, j: int, ell: int = 0,
                 eps: float = 1e-4) -> tuple[float, float]:
    """``(mix, ||J_phi(x_i)|| ||H_rho_ell|| ||J_phi(x_j)||)`` for a sum-based aggregator."""
    if params.activation not in ANALYTIC_ACTIVATIONS:
        raise UnsupportedSmoothnessError(
            f"activation {params.activation!r} is not C^2; use one of {ANALYTIC_ACTIVATIONS}")
    X = as_multiset(X)
    mix = mix_value(params, X, i, j, ell, eps)
    Ji = _tape_jacobian(params.phi, X[i])
    Jj = _tape_jacobian(params.phi, X[j])
    tape = Tape()
    z = ad.sum(params.phi(tape.var(X)), axis=0).value
    H = rho_hessian(params, z, ell, eps)
    return mix, spectral_norm(Ji) * spectral_norm(H) * spectral_norm(Jj)


def mixing_scale_slope(params: SumAggregatorParams, X, i: int, j: int, ell: int = 0,
                       scales: Sequence[float] = (1, 2, 4, 8)) -> float:
    """Least-squares log-log slope of the mixing bound against a global parameter scale."""
    bounds = [mixing_bound(params.scaled(s), X, i, j, ell)[1] for s in scales]
    return float(np.polyfit(np.log(scales), np.log(np.maximum(bounds, 1e-300)), 1)[0])


# ---------------------------------------------------------------------------
# Higher-order mixing of circular convolution
# ---------------------------------------------------------------------------

def conv_mixing_identity(m: int, js: Sequence[int]) -> int:
    """Output index ``k = (j_1 + ... + j_n) mod m`` whose n-th mixed derivative is 1."""
    if any(j < 0 or j >= m for j in js):
        raise ValueError(f"indices must lie in [0, {m})")
    return int(sum(js) % m)


def circular_conv_direct(u, v) -> np.ndarray:
    u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    m = u.size
    out = np.zeros(m)
    for a in range(m):
        for b in range(m):
            out[(a + b) % m] += u[a] * v[b]
    return out


def circular_conv_fft(u, v) -> np.ndarray:
    return idft_1d(dft_1d(u) * dft_1d(v)).real


def mixing_table(m: int) -> np.ndarray:
    """``T[j1, j2, k] = d^2 (u * v)_k / du_j1 dv_j2``, exact since the map is bilinear."""
    eye = np.eye(m)
    return np.array([[circular_conv_direct(eye[a], eye[b]) for b in range(m)] for a in range(m)])


def mixing_table_fd(m: int, rng=None, eps: float = 1e-3) -> np.ndarray:
    """Same table by 4-point finite differences of the FFT convolution at a random point."""
    rng = np.random.default_rng(0) if rng is None else rng
    u0, v0 = rng.normal(size=m), rng.normal(size=m)
    T = np.empty((m, m, m))
    for a in range(m):
        for b in range(m):
            acc = np.zeros(m)
            for su, sv, w in ((1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)):
                u, v = u0.copy(), v0.copy()
                u[a] += su * eps
                v[b] += sv * eps
                acc += w * circular_conv_fft(u, v)
            T[a, b] = acc / (4 * eps * eps)
    return T


def indicator_table(m: int) -> np.ndarray:
    T = np.zeros((m, m, m))
    for a in range(m):
        for b in range(m):
            T[a, b, conv_mixing_identity(m, (a, b))] = 1.0
    return T


# ---------------------------------------------------------------------------
# Stability probes
# ---------------------------------------------------------------------------

def lower_lipschitz_probe(x0, direction, hs: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
                          f: Callable = fconv, decay: float = 0.05) -> StabilityReport:
    """Ratios ``||f(S_h) - f(S_0)||_1 / h`` for ``S_h = {x0 + h dir, x0 - h dir}``.

    Passes when the ratios fall strictly and the last is at most ``decay``
    times the first (or when every ratio is zero).
    """
    hs = [float(h) for h in hs]
    if any(h <= 0 for h in hs) or any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("steps must be positive and strictly decreasing")
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    direction = np.asarray(direction, dtype=np.float64).ravel()
    base = np.asarray(f(np.stack([x0, x0])))
    ratios = []
    for h in hs:
        S = np.stack([x0 + h * direction, x0 - h * direction])
        ratios.append((h, float(np.abs(np.asarray(f(S)) - base).sum() / h)))
    r = [v for _, v in ratios]
    if all(v == 0.0 for v in r):
        passed = True
    else:
        passed = all(b < a for a, b in zip(r, r[1:])) and r[-1] <= decay * r[0]
    return StabilityReport("lower_lipschitz", r[-1], decay * r[0], passed, decay, ratios,
                           digest(x0, direction, hs))


def _check_row_norms(X, delta):
    if np.any(np.abs(X).sum(axis=1) > delta * (1 + 1e-12)):
        raise ValueError(f"row L1 norms exceed delta={delta}")


def upper_lipschitz_check(X, Y, delta: float, tol: float = 1e-9) -> StabilityReport:
    """Entrywise L1 gap of the coefficient grids vs. ``C(n, d, delta) * W1(X, Y)``."""
    X, Y = as_multiset(X), as_multiset(Y)
    if X.shape != Y.shape:
        raise ValueError("multisets must have equal size and dimension")
    _check_row_norms(X, delta)
    _check_row_norms(Y, delta)
    n, d = X.shape
    lhs = float(np.abs(fconv(X) - fconv(Y)).sum())
    rhs = lipschitz_constant(n, d, delta) * wasserstein1(X, Y)
    return StabilityReport("upper_lipschitz", lhs, rhs, lhs <= rhs + tol, tol,
                           inputs_digest=digest(X, Y, delta))


def helper_bound_check(X, Y, delta: float, points, tol: float = 1e-9) -> StabilityReport:
    """``max |p_X(t,z) - p_Y(t,z)|`` over unit-modulus ``points`` vs ``n (1+delta)^(n-1) W1``."""
    X, Y = as_multiset(X), as_multiset(Y)
    _check_row_norms(X, delta)
    _check_row_norms(Y, delta)
    gx, gy = expand_bivariate(X), expand_bivariate(Y)
    lhs = max(abs(evaluate_bivariate(gx, t, z) - evaluate_bivariate(gy, t, z)) for t, z in points)
    rhs = helper_constant(X.shape[0], delta) * wasserstein1(X, Y)
    return StabilityReport("helper_bound", float(lhs), rhs, lhs <= rhs + tol, tol,
                           inputs_digest=digest(X, Y, delta))


def normalization_check(grids: Sequence[PolarGrid], tol: float = 1e-12) -> StabilityReport:
    """Geometric-mean product magnitude vs. the largest input magnitude."""
    prod = fourier_product(list(grids), normalize=True)
    lhs = float(np.max(prod.magnitude))
    rhs = float(max(np.max(g.magnitude) for g in grids))
    return StabilityReport("normalization", lhs, rhs, lhs <= rhs + tol, tol,
                           inputs_digest=digest(*[g.logmag for g in grids]))


# ---------------------------------------------------------------------------
# Reference maps
# ---------------------------------------------------------------------------

def sumofgram_label(X, full: bool = False) -> float:
    """``sum_{p<=q} <x_p, x_q>`` (or the full double sum with ``full``)."""
    X = as_multiset(X)
    s = X.sum(axis=0)
    if full:
        return float(s @ s)
    return float(0.5 * (s @ s + np.sum(X * X)))


def ssma_map(X) -> np.ndarray:
    return fconv(X).ravel()
