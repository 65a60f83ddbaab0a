"""Berry curvature of the NV ground state, three ways.

The closed form, the sum over states and a finite-difference quantum
geometric tensor are independent routes to the same curvature.  In the
unit-field model the ground-band curvature F_phi,theta is largest near the
equator, where it equals D - (D^2+2)/sqrt(D^2+4).
"""

import numpy as np

from qresponse import (NvParams, cartesian_family, curvature_cartesian_analytic, curvature_fd, curvature_numeric,
                       curvature_spherical_analytic, equator_curvature)

p = NvParams(D=0.8, E=0.1)
h = (0.3, -0.4, 0.5)
fam = cartesian_family(p)
closed = curvature_cartesian_analytic(p, h)
print("component   closed form        sum over states    finite difference")
for name, (i, j), value in zip(("F_xy", "F_xz", "F_yz"), ((0, 1), (0, 2), (1, 2)),
                               (closed.f_xy, closed.f_xz, closed.f_yz)):
    print(f"{name:10s}  {value: .12f}   {curvature_numeric(fam, h, i, j): .12f}   {curvature_fd(fam, h, i, j): .9f}")

# the three bands carry curvatures that sum to zero
total = sum(curvature_cartesian_analytic(p, h, m).as_matrix() for m in range(3))
print(f"band sum: max |sum_m F^m| = {np.abs(total).max():.1e}")

d = 0.06765
print(f"\nunit-field model, D = {d}")
for theta in np.linspace(0.1, np.pi / 2, 6):
    print(f"  theta = {theta:.3f}  F = {curvature_spherical_analytic(d, theta).f_phitheta: .6f}")
print(f"  equator closed form      {equator_curvature(d): .6f}")
