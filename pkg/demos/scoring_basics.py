"""Tour of the scoring kernels on vectors you can check by hand.

Run: python3 demos/scoring_basics.py
"""

from __future__ import annotations

import numpy as np

from contrascope import ScoreWeights, combined_score, cosine, hoyer, kappa4

rng = np.random.default_rng(7)

print("== Hoyer sparsity of a difference vector ==")
a = np.array([3.0, 4.0, 0.0, 0.0])
b = np.zeros(4)
print(f"difference (3,4,0,0):    {hoyer(a, b):.6f}   (2-sparse in d=4)")

one_hot = np.array([0.0, 0.0, 5.0, 0.0])
print(f"difference (0,0,5,0):    {hoyer(one_hot, b):.6f}   (1-sparse: exactly 1)")

const = np.full(4, 2.5)
print(f"difference (c,c,c,c):    {hoyer(const, b):.6f}   (constant: exactly 0)")

print()
print("== Dense noise is NOT maximally dense ==")
print("A Gaussian difference has E|x|/sqrt(E x^2) = sqrt(2/pi), so its Hoyer")
print("value settles near 1 - sqrt(2/pi) ~ 0.2021 as dimension grows:")
for d in (16, 64, 256, 1024, 4096):
    vals = [hoyer(rng.standard_normal(d), rng.standard_normal(d)) for _ in range(50)]
    print(f"  d={d:5d}  mean {np.mean(vals):.4f}")
print("Contrast with a planted edit touching 6 of 256 coordinates:")
x = rng.standard_normal(256)
edit = x.copy()
edit[:6] += rng.uniform(0.8, 1.2, size=6)
print(f"  sparse edit Hoyer: {hoyer(x, edit):.4f}")

print()
print("== Combined retrieval score ==")
q_cos, d_cos = np.array([5.0, 0.0]), np.array([4.0, 3.0])
q_sp, d_sp = np.array([3.0, 4.0, 0.0, 0.0]), np.zeros(4)
w = ScoreWeights(alpha=0.5)
c = cosine(q_cos, d_cos)
h = hoyer(q_sp, d_sp)
print(f"cosine {c:.3f} + alpha 0.5 * hoyer {h:.3f} "
      f"= {combined_score(q_cos, d_cos, q_sp, d_sp, w):.3f}")

print()
print("== Fourth-moment alternative ==")
delta_sparse = np.array([1.0, 0.0, 0.0, 0.0])
delta_dense = np.full(4, 0.5)
print(f"kappa4, 1-sparse diff:   {kappa4(delta_sparse, np.zeros(4)):.4f}")
print(f"kappa4, constant diff:   {kappa4(delta_dense, np.zeros(4)):.4f}  (= 1/d)")
