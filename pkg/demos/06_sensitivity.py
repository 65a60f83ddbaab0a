"""How strongly the curvature reacts to the zero-field splitting D.

Near the z axis the ground-band curvature becomes very sensitive to D, which
makes the response a probe of D (and hence of temperature or strain).  The
precision of any estimate of D from an evolution of duration t is bounded by
1/(t (E_max - E_min)) of the generator dH/dD = Sz^2, i.e. by 1/t.
"""

import numpy as np

from qresponse import sensitivity_bound, spin_operators, susceptibility

d = 1.0
print("theta    dF/dD        (1,3) pair term")
for theta in (0.2, 0.1, 0.05, 0.02, 0.01, 0.005):
    print(f"{theta:<7g}  {susceptibility(d, theta):11.4f}  {susceptibility(d, theta, pair=(0, 2)):.6f}")
print(f"small-angle value of the pair term: {-1 / (8 * np.sqrt(2)):.6f}")

sz = spin_operators(1).sz
for t in (1, 10, 100):
    print(f"t = {t:<4d} bound on delta D: {sensitivity_bound(sz @ sz, t):g}")
