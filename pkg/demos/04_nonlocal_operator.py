"""
The shifted-Laplacian resolvent
===============================

The sandwich model contains the nonlocal operator P, the inverse of
(xi - d^2/dx^2) with a clamp at x = 0 and a free end at x = L, and its
companion J = xi P - I. For a constant datum P has a closed form, which
the finite-element solve reproduces at second order.
"""
import numpy as np

from piezobeam import EllipticSolver, apply_j, apply_pxi, build_grid
from piezobeam.operators import j_matrix

xi = 4.0


def exact(x, L=1.0):
    return (1 - np.cosh(np.sqrt(xi) * (x - L)) / np.cosh(np.sqrt(xi) * L)) / xi


errors = []
for N in (8, 16, 32, 64, 128):
    g = build_grid(1.0, N)
    phi = apply_pxi(EllipticSolver(g, xi), np.ones(N + 1))
    errors.append(np.abs(phi - exact(g.nodes)).max())
    print(f"N = {N:3d}: max error {errors[-1]:.3e}")
print("observed orders:", np.round(np.log2(np.array(errors[:-1]) / errors[1:]), 2))

# J is self-adjoint and nonpositive in the mass pairing
s = EllipticSolver(build_grid(1.0, 40), xi)
GJ = s.mass_full @ j_matrix(s)
print("asymmetry:", np.linalg.norm(GJ - GJ.T) / np.linalg.norm(GJ))
print("largest eigenvalue of the symmetric part:", np.linalg.eigvalsh(0.5 * (GJ + GJ.T)).max())

# a linear profile is not in the kernel of J: the clamp contributes a boundary flux
u = 0.3 * s.grid.nodes
print("|J(0.3 x)| at the tip:", abs(apply_j(s, u)[-1]))
