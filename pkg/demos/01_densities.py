#!/usr/bin/env python3
"""Densities: values, gradients and the Hessian along a normal.

Evaluates the soliton densities at a few points and shows that the expander
and shrinker Hessians are the constants +1/2 and -1/2 in every direction.
"""
import numpy as np

from densgraph import density as D

x = np.array([1.0, 2.0, 3.0])
N = np.array([0.6, 0.0, 0.8])

for d in (D.expander(3), D.shrinker(3), D.translator(3), D.singular_minimal(3, 2.0)):
    print(f"{d.kind:18s} phi={D.eval_phi(d, x):+.4f}  grad={np.round(D.grad_phi(d, x), 4)}  "
          f"Hess(N,N)={D.hessian_NN(d, x, N):+.4f}")

# weighted mean curvature of the round shrinker sphere of radius sqrt(2n), n = 2
R = 2.0
p = np.array([0.0, 0.0, R])
print("H_phi on the shrinker sphere:", D.weighted_mean_curvature(D.shrinker(3), p, -p / R, 2 / R))

# the sign condition used by the stability theorems, for a few normals
rng = np.random.default_rng(0)
for _ in range(3):
    n = rng.normal(size=3)
    n[2] = abs(n[2])
    n /= np.linalg.norm(n)
    val = D.sufficient_condition(D.expander(3), x, n, "vertical_radial")
    print(f"expander, vertical graph: N={np.round(n, 3)} condition={val:.4f}")
