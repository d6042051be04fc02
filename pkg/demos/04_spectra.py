"""Eigenvalues on the sphere and the hemisphere.

Sphere harmonics of degree l have eigenvalue l(l+1) with multiplicity 2l+1.
On the upper hemisphere the Dirichlet problem keeps the harmonics that are odd
in z and the Neumann problem those that are even, which gives l(l+1) and
l(l-1), each with multiplicity l.
"""

import numpy as np

from pointlb.boundary import dirichlet, neumann
from pointlb.eigen import cluster_errors, open_surface_eigs, smallest_eigs
from pointlb.laplacian import discretize
from pointlb.sampling import eigen_count, exact_eigenvalue, fibonacci_sphere, hemisphere


def show(title, values, shape, indices, bc=None):
    print(title)
    clusters = [(j, *exact_eigenvalue(shape, j, bc)) for j in indices]
    for c in cluster_errors(values, clusters):
        print(f"  l={c['n']}: lambda={c['lambda']:5.0f} x{c['multiplicity']:<2d}"
              f"  E2={c['E2']:.2e}  Einf={c['Einf']:.2e}")


r = smallest_eigs(discretize(fibonacci_sphere(2000)).operator, eigen_count("sphere", 8), vectors=False)
show("sphere, 2000 points", r.values, "sphere", range(1, 9))
print(f"  complex pairs: {r.complex_pairs}, max |Im|/|lambda| = {r.max_rel_imag:.1e}")

cap = hemisphere(2000)
d = open_surface_eigs(cap, dirichlet(), k=eigen_count("hemisphere", 5, "dirichlet"))
show("hemisphere, Dirichlet", d.values, "hemisphere", range(1, 6), "dirichlet")
nm = open_surface_eigs(cap, neumann(), k=eigen_count("hemisphere", 6, "neumann"))
show("hemisphere, Neumann", nm.values, "hemisphere", range(2, 7), "neumann")
print(f"  constant mode: {np.min(np.abs(nm.values)):.1e}")
