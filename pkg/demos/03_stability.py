"""Upper and lower Lipschitz behaviour of the coefficient grid.

Upper side: the entrywise L1 gap between grids is at most
(n+1)^3 d (1+delta)^(n-1) times the Wasserstein-1 distance, for rows with L1
norm at most delta.  Lower side: for {x0 + h v, x0 - h v} against {x0, x0}
the gap shrinks like h^2 while W1 shrinks like h, so no constant can bound the
ratio from below.  This holds for every differentiable invariant map.
"""
import numpy as np

from ssma import analysis, fconv, wasserstein1
from ssma.polyset import lipschitz_constant

rng = np.random.default_rng(2)
X = rng.uniform(-0.4, 0.4, (3, 2))
Y = rng.uniform(-0.4, 0.4, (3, 2))
gap = np.abs(fconv(X) - fconv(Y)).sum()
w1 = wasserstein1(X, Y)
print(f"grid gap {gap:.4f} <= {lipschitz_constant(3, 2, 1.0):.0f} * W1 ({w1:.4f}) = {lipschitz_constant(3, 2, 1.0) * w1:.2f}")

x0, v = np.array([0.3, -0.2]), np.array([0.6, 0.8])
rep = analysis.lower_lipschitz_probe(x0, v)
print("\n     h      gap / h")
for h, r in rep.ratios:
    print(f"{h:8.0e}  {r:.3e}")
print("ratio collapses:", rep.passed)
