"""Seeded self-check suites shared by the command line entry points.

Each suite returns ``(passed, details)`` where ``details`` is JSON-ready.
"""
from __future__ import annotations

from itertools import permutations

import numpy as np

from . import analysis
from .core import fconv, fconv_scalar
from .numerics import PolarGrid, dft_1d, fft_2d, idft_1d, ifft_2d, naive_dft
from .polyset import elementary_coeffs, expand_bivariate


def _rel_err(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))


def oracle_suite(cases: int = 200, seed: int = 0, tol: float = 1e-9):
    """FFT-path coefficient grids vs. direct polynomial expansion."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n, d = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        X = rng.uniform(-1.0, 1.0, (n, d))
        worst = max(worst, _rel_err(fconv(X), expand_bivariate(X)))
    return worst <= tol, {"suite": "oracle", "cases": cases, "max_rel_err": worst, "tol": tol}


def scalar_suite(cases: int = 200, seed: int = 0, tol: float = 1e-10):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        xs = rng.uniform(-1.0, 1.0, int(rng.integers(1, 9)))
        worst = max(worst, _rel_err(fconv_scalar(xs), elementary_coeffs(xs)))
    return worst <= tol, {"suite": "scalar", "cases": cases, "max_rel_err": worst, "tol": tol}


def fft_suite(seed: int = 0, max_len: int = 40, tol: float = 1e-10):
    """Fast transforms vs. the direct DFT sum, plus 2D round trips."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for L in range(1, max_len + 1):
        x = rng.normal(size=L) + 1j * rng.normal(size=L)
        scale = max(1.0, float(np.abs(x).sum()))
        worst = max(worst, float(np.max(np.abs(dft_1d(x) - naive_dft(x)))) / scale)
        worst = max(worst, float(np.max(np.abs(idft_1d(x) - naive_dft(x, inverse=True)))) / scale)
    for m1, m2 in [(2, 3), (3, 7), (4, 10), (5, 13), (8, 8)]:
        g = rng.normal(size=(m1, m2))
        worst = max(worst, float(np.max(np.abs(ifft_2d(fft_2d(g)) - g))))
    return worst <= tol, {"suite": "fft", "max_err": worst, "tol": tol}


def _canonical(X) -> bytes:
    X = np.asarray(X)
    return X[np.lexsort(X.T[::-1])].tobytes()


def separation_suite(pairs: int = 500, seed: int = 0, gap: float = 1e-9):
    """Distinct lattice multisets get distinct grids; row permutations collide.

    Lattice entries are multiples of 1/2 in [-1, 1], so the direct expansion
    is exact in floating point and permuted inputs must agree bit for bit.
    """
    rng = np.random.default_rng(seed)
    min_gap, collisions_exact, checked = np.inf, True, 0
    while checked < pairs:
        n, d = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        X = rng.integers(-2, 3, (n, d)) / 2.0
        Y = rng.integers(-2, 3, (n, d)) / 2.0
        if _canonical(X) == _canonical(Y):
            continue
        checked += 1
        min_gap = min(min_gap, float(np.max(np.abs(fconv(X) - fconv(Y)))))
        perm = rng.permutation(n)
        collisions_exact &= bool(np.array_equal(expand_bivariate(X), expand_bivariate(X[perm])))
    passed = min_gap > gap and collisions_exact
    return passed, {"suite": "separation", "pairs": pairs, "min_gap": min_gap, "gap": gap,
                    "permutations_collide": collisions_exact}


def permutation_suite(cases: int = 100, seed: int = 0, tol: float = 1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n, d = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        X = rng.uniform(-1.0, 1.0, (n, d))
        worst = max(worst, float(np.max(np.abs(fconv(X) - fconv(X[rng.permutation(n)])))))
    return worst <= tol, {"suite": "permutation", "cases": cases, "max_err": worst, "tol": tol}


def random_polar_grids(rng, count: int, shape=(3, 5)):
    return [PolarGrid(rng.normal(size=shape), rng.uniform(-np.pi, np.pi, shape)) for _ in range(count)]


def normalization_suite(cases: int = 100, seed: int = 0, tol: float = 1e-12):
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(cases):
        grids = random_polar_grids(rng, int(rng.integers(1, 7)), (int(rng.integers(1, 6)), int(rng.integers(1, 8))))
        rep = analysis.normalization_check(grids, tol)
        worst = max(worst, rep.lhs - rep.rhs)
    return worst <= tol, {"suite": "normalization", "cases": cases, "max_excess": worst, "tol": tol}


INVARIANT_SUITES = {
    "fft": fft_suite,
    "separation": separation_suite,
    "permutation": permutation_suite,
    "normalization": normalization_suite,
}


def invariants(suite: str = "all", seed: int = 0):
    names = list(INVARIANT_SUITES) if suite == "all" else [suite]
    results = [INVARIANT_SUITES[name](seed=seed) for name in names]
    return all(ok for ok, _ in results), [dict(det, passed=bool(ok)) for ok, det in results]


def mix_suite(target: str = "sumofgram", n: int = 3, d: int = 2, eps: float = 1e-4, seed: int = 0):
    """Mixing value of one map between elements 0 and 1.

    ``sum``: a random tanh ``sum_k phi(x_k)`` (expected 0); ``sumofgram``:
    the label map (expected 1); ``ssma``: coefficient ``ell`` of the grid with
    the largest mixing value (reported, expected positive).
    """
    if n < 2:
        raise ValueError("mixing needs n >= 2")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, d))
    if target == "sum":
        params = analysis.SumAggregatorParams.random(d, 8, 8, 1, rng)
        res = analysis.mix_probe(params.pooled, X, 0, 1, 0, eps)
        return res.mix_value <= 1e-6, dict(res.to_json(), target=target, expected=0.0, tol=1e-6)
    if target == "sumofgram":
        res = analysis.mix_probe(analysis.sumofgram_label, X, 0, 1, 0, eps)
        return abs(res.mix_value - 1.0) <= 1e-4, dict(res.to_json(), target=target, expected=1.0, tol=1e-4)
    if target == "ssma":
        size = analysis.ssma_map(X).size
        vals = [analysis.mix_value(analysis.ssma_map, X, 0, 1, ell, eps) for ell in range(size)]
        ell = int(np.argmax(vals))
        res = analysis.MixProbeResult(0, 1, ell, float(vals[ell]))
        return bool(np.isfinite(vals[ell]) and vals[ell] > 0), dict(res.to_json(), target=target)
    raise ValueError(f"unknown mix target {target!r}")


def stability_suite(probe: str = "upper", delta: float = 1.0, seed: int = 0, cases: int = 500,
                    points_per_pair: int = 50):
    rng = np.random.default_rng(seed)
    if probe == "lower":
        reports = []
        for _ in range(10):
            d = int(rng.integers(1, 4))
            x0 = rng.uniform(-1.0, 1.0, d)
            v = rng.normal(size=d)
            reports.append(analysis.lower_lipschitz_probe(x0, v / np.linalg.norm(v)))
        return all(r.passed for r in reports), [r.to_json() for r in reports]
    if probe == "upper":
        worst_upper, worst_helper = -np.inf, -np.inf
        for _ in range(cases):
            n, d = int(rng.integers(1, 5)), int(rng.integers(1, 4))
            X, Y = (_ball_rows(rng, n, d, delta) for _ in range(2))
            up = analysis.upper_lipschitz_check(X, Y, delta)
            worst_upper = max(worst_upper, up.lhs - up.rhs)
            pts = np.exp(1j * rng.uniform(0, 2 * np.pi, (points_per_pair, 2)))
            hb = analysis.helper_bound_check(X, Y, delta, pts)
            worst_helper = max(worst_helper, hb.lhs - hb.rhs)
        passed = worst_upper <= 1e-9 and worst_helper <= 1e-9
        return passed, {"probe": "upper", "cases": cases, "delta": delta,
                        "max_excess_upper": worst_upper, "max_excess_helper": worst_helper, "tol": 1e-9}
    raise ValueError(f"unknown stability probe {probe!r}")


def _ball_rows(rng, n: int, d: int, delta: float) -> np.ndarray:
    """Rows drawn uniformly in direction with L1 norm at most ``delta``."""
    X = rng.uniform(-1.0, 1.0, (n, d))
    norms = np.abs(X).sum(axis=1, keepdims=True)
    radius = delta * rng.uniform(0.0, 1.0, (n, 1))
    return X / np.maximum(norms, 1e-300) * radius


def brute_force_perm_invariance(f, X) -> float:
    """Largest deviation of ``f`` over every row order of ``X`` (small ``n`` only)."""
    base = np.asarray(f(X))
    return max(float(np.max(np.abs(np.asarray(f(X[list(p)])) - base)))
               for p in permutations(range(len(X))))
