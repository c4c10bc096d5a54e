"""How a positive matrix moves points of the simplex, and why iterating
contracts everything to a needle.

Run:  python3 demos/01_projective_geometry.py
"""

import numpy as np

from conefluct import (
    PositiveMatrix,
    SimplexVector,
    act,
    contraction_coeff,
    hennion_distance,
    matrix_norms,
)

g = PositiveMatrix(np.array([[3.0, 2.0], [2.0, 4.0]]))
v, norm, N = matrix_norms(g)
print("matrix g:")
print(g.entries)
print(f"column-sum norms: v(g) = {v} (min), |g| = {norm} (max), N(g) = {N}")

x = SimplexVector.barycenter(2)
y, rho = act(g, x)
print(f"\ng moves the barycenter {x.coords} to {np.round(y.coords, 6)}")
print(f"the log-size gained in that step is rho(g, x) = log|gx| = {rho:.6f}")

# The projective (Hennion) distance contracts under the action.
p = SimplexVector(np.array([0.9, 0.1]))
q = SimplexVector(np.array([0.1, 0.9]))
c = contraction_coeff(g)
print(f"\ncontraction coefficient c(g) = {c:.4f}  (interior matrix, so c < 1)")
print(f"{'step':>4} {'d(p, q)':>12} {'ratio':>8}")
prev = hennion_distance(p, q)
print(f"{0:>4} {prev:>12.3e} {'-':>8}")
for step in range(1, 7):
    p, _ = act(g, p)
    q, _ = act(g, q)
    d = hennion_distance(p, q)
    print(f"{step:>4} {d:>12.3e} {d / prev:>8.4f}")
    prev = d
print("\nEach application shrinks distances by at least c(g): orbits of any")
print("two starting points merge geometrically fast, which is what makes")
print("long products of random matrices forget their starting direction.")
