"""Offline ensemble weights: exact and relaxed programs side by side.

Run: python demos/weights_walkthrough.py
"""

import numpy as np

from miest import BandwidthSet, BasisFamily, EnsembleConfig, Program, solve_weights

# Two bandwidths, one bias term: the exact program has a unique answer.
cfg = EnsembleConfig(BandwidthSet([1.0, 2.0]), BasisFamily.mixed_odin1(1), Program.EXACT)
sol = solve_weights(cfg, 1000)
print("exact, L={1,2}, d=1:", sol.weights.tolist())

# Forty bandwidths on [1.2, 3] at d=4. The exact program cancels every bias
# term but needs large alternating weights; the relaxed program trades a
# small residual bias (epsilon) for a much smaller weight norm.
L = BandwidthSet.linspace(1.2, 3.0, 40)
basis = BasisFamily.mixed_odin1(4)
for N in (500, 3000, 10000):
    ex = solve_weights(EnsembleConfig(L, basis, Program.EXACT), N)
    rx = solve_weights(EnsembleConfig(L, basis, Program.RELAXED), N)
    print(f"N={N:>5}  exact ||w||={ex.norm2:9.2f}   relaxed ||w||={rx.norm2:6.3f} "
          f"eps={rx.epsilon:.4f}  max|residual|={np.abs(rx.residuals).max():.4f}")
