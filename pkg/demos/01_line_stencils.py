"""Five equispaced samples on a line: the modified stencil versus plain MLS.

The modified second difference keeps the actual data value at the center and
only uses the fitted quadratic at the two virtual neighbors. On a regular
line that choice turns the stencil into an M-matrix row for a band of grid
ratios, while the plain least-squares second derivative never is one.
"""

import numpy as np

from pointlb.localfit import function_fit_operator
from pointlb.stencil import mls_derivatives_1d, mvgd_derivatives_1d, row_report

k = 1.0
tc = np.array([[0.0], [-k], [-2 * k], [k], [2 * k]])
W = function_fit_operator(tc, "unit")

print("weights, center first")
print("  modified, h = k :", np.round(mvgd_derivatives_1d(W, k)[1], 6))
print("  plain MLS       :", np.round(mls_derivatives_1d(W)[1], 6))
print("  MLS is an M-matrix row:", row_report(mls_derivatives_1d(W)[1])["m_matrix"])

print("\n(h/k)^2   M-matrix row")
for r in (0.5, 0.6 - 1e-6, 0.6 + 1e-6, 1.0, 2.0, 4.8 - 1e-6, 4.8 + 1e-6, 6.0):
    flag = row_report(mvgd_derivatives_1d(W, np.sqrt(r))[1])["m_matrix"]
    print(f"  {r:9.6f}   {flag}")
