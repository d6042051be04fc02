"""Convergence on the uniform circle depends on which mode you test.

sin t cos t equals xy, a quadratic in the plane, so every local quadratic fit
reproduces it and the computed solution is exact up to roundoff at any n.
Such a test cannot show a convergence order. cos 3t is not quadratic, and
there both methods converge at second order with the modified stencil ahead.
"""

import numpy as np

from pointlb.laplacian import discretize
from pointlb.sampling import circle
from pointlb.solver import direct_solve, rank_deficiency_fix


def error(n, method, m, trig):
    c = circle(n)
    t = np.arctan2(c.points[:, 1], c.points[:, 0])
    exact = trig(m * t)
    reg = rank_deficiency_fix(discretize(c, method=method).operator, m * m * exact)
    u = reg.solution(direct_solve(reg.matrix, reg.rhs)[0])
    return np.max(np.abs(u - u.mean() + exact.mean() - exact))


sizes = np.array([500, 1000, 2000, 4000])
for label, m, trig in (("sin 2t = 2xy", 2, np.sin), ("cos 3t", 3, np.cos)):
    print(label)
    for method in ("mvgd", "mls"):
        e = np.array([error(n, method, m, trig) for n in sizes])
        order = np.polyfit(np.log(2 * np.pi / sizes), np.log(e), 1)[0]
        print(f"  {method:5s} " + "  ".join(f"{x:.2e}" for x in e) + f"   order {order:5.2f}")
