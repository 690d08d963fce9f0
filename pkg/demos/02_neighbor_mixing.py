"""Why sum pooling struggles with pairwise interactions.

The mixing value of a map f between elements i and j is the spectral norm of
the mixed second derivative d^2 f / dx_i dx_j.  A pooled sum of per-element
features has zero mixing, while the SumOfGram label (sum of inner products)
needs a mixing value of one.  The coefficient grid mixes elements through its
product structure.
"""
import numpy as np

from ssma import analysis

rng = np.random.default_rng(1)
X = rng.uniform(-1, 1, (3, 2))

params = analysis.SumAggregatorParams.random(2, 8, 8, 1, rng, activation="tanh")
print("pooled sum   sum_k phi(x_k): mix =", f"{analysis.mix_value(params.pooled, X, 0, 1):.2e}")
print("SumOfGram label            : mix =", f"{analysis.mix_value(analysis.sumofgram_label, X, 0, 1):.6f}")
grid_mix = max(analysis.mix_value(analysis.ssma_map, X, 0, 1, ell) for ell in range(analysis.ssma_map(X).size))
print("coefficient grid (best entry): mix =", f"{grid_mix:.4f}")

# A sum aggregator can only mix through rho, and the mixing it reaches is
# bounded by ||J_phi|| ||H_rho|| ||J_phi||.  Larger weights can raise the bound,
# until the tanh units saturate and the Jacobians shrink again.
mix, bound = analysis.mixing_bound(params, X, 0, 1)
print(f"\nrho(sum phi): mix {mix:.4f} <= bound {bound:.4f}")
for s in (1, 2, 4):
    print(f"  weights x{s}: bound {analysis.mixing_bound(params.scaled(s), X, 0, 1)[1]:.3f}")

# Circular convolution mixes every pair of input positions into exactly one output.
print("\nsecond-derivative table of circular convolution, m = 4 (entry [j1, j2] = k):")
T = analysis.mixing_table(4)
print(np.argmax(T, axis=2))
