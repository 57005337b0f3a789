"""
Rounding service times up to whole cells
========================================

A packet of L bytes occupies ceil(L/S) cell slots.  Seen as a service
time, that is Y = ceil(X): the continuous time X rounded up to the next
integer number of cell times.  This demo compares the exact moments of Y
with the "add one half, subtract one twelfth" rule of thumb.
"""

import numpy as np

from cellseg import quantize as q

# exponential service: exact closed form and the pmf route agree
for mu in (0.128, 0.64, 2.0):
    exact = q.ceil_exponential_moments(mu)
    via_pmf = q.pmf_moments(q.quantize_general(q.Exponential(mu)))
    rough = q.heuristic_moments(1 / mu, 1 / mu ** 2)
    print(f"Exp(mu={mu:<5}) exact E={exact.mean:8.4f} Var={exact.variance:9.4f}"
          f"  pmf E={via_pmf.mean:8.4f}  rule-of-thumb E={rough.mean:8.4f} Var={rough.variance:9.4f}")

# the rule of thumb assumes the round-up residual is uniform; for peaked
# distributions it is not, and the variance estimate drifts
for mu in (0.5, 1.0, 3.0):
    exact = q.ceil_erlang2_moments(mu)
    rough = q.heuristic_moments(2 / mu, 2 / mu ** 2)
    print(f"Erlang2(mu={mu}) exact Var={exact.variance:.4f} rule-of-thumb Var={rough.variance:.4f}")

# a gamma fitted to a measured mean and standard deviation (in cell times)
shape, scale = q.gamma_fit(1.74, 0.89)
pmf = q.quantize_general(q.Gamma(shape, scale))
m = q.pmf_moments(pmf)
print(f"\nGamma fit: shape={shape:.2f} scale={scale:.2f}")
print(f"quantized: E(Y)={m.mean:.4f} Var(Y)={m.variance:.4f}")
print("first pmf terms:", np.round(pmf.probs[:6], 4))
