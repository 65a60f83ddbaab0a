"""Decoherence from a polarized nuclear spin bath.

N spin-1/2 nuclei couple to the NV through A S.(sum_k I_k).  The total
nuclear spin is conserved, so the thermal bath state splits into sectors of
collective spin I0 and projection M0; each sector is evolved once.  An
unpolarized bath barely disturbs the retrieval, while a polarized bath
shifts the effective field and only a range of intermediate quench speeds
gives a good estimate.  (N = 20, as in configs/bath.ini, takes
about two minutes; N = 8 shows the same trend.)
"""

import numpy as np

from qresponse import BathParams, bath_sectors, mixed_response, polarization_sweep, retrieval_target

d, a, n = 0.06765, 0.02, 8
target = retrieval_target(d)

sectors = bath_sectors(n, 0.2)
print(f"{len(sectors)} sectors for N = {n}, weights sum to {sum(s.weight for s in sectors):.15f}")

v_list = np.geomspace(0.02, 0.4, 8)
sweep = polarization_sweep(n, a, d, v_list, [0.0, 0.2], tol=1e-6)
print("\n   v     error P=0   error P=0.2")
for k, v in enumerate(v_list):
    e0 = sweep[0.0][k].retrieved_curvature - target
    e2 = sweep[0.2][k].retrieved_curvature - target
    print(f"{v:6.3f}  {e0:+.5f}    {e2:+.5f}")

res = mixed_response(BathParams(n, a, 0.2), d, 0.1)
print(f"\nstate trace after the quench: {res.trace:.12f}")
