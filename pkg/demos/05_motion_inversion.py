"""Recovering a transverse field and its velocity from two ensembles.

Two NV ensembles with different static h_z see the same moving h_x.  Their
readouts <S_z> - <S_z>_ground are v_x F_xz(h_x, h_y, h_z) to linear order;
the ratio of the two removes v_x and leaves a one-dimensional root find.
With noise-free linear-response data the inversion is exact.  With readouts
from a simulated ramp the O(v) corrections to linear response bias the
estimate; they shrink as the ramp slows down.
"""

from qresponse import (EnsembleConfig, NvParams, UnidentifiableError, analytic_observables, ramp_path,
                       response_components, solve_motion, solve_vector)

cfg = EnsembleConfig(NvParams(1.0), hz=(0.5, 0.7), hy=0.1)
hx, vx = 0.2, 0.01

est = solve_motion(analytic_observables(cfg, hx, vx), cfg)
print(f"linear-response data: h_x = {est.hx_hat:.12f}, v_x = {est.vx_hat:.12f}")

for v in (0.01, 0.0025, 0.000625):
    path, t_final = ramp_path(hx, v)
    est = solve_motion(response_components(cfg, path, t_final, tol=1e-9), cfg, guess=(hx, v))
    print(f"ramp at v_x = {v:<9g} h_x off by {est.hx_hat / hx - 1:+.2%}, v_x off by {est.vx_hat / v - 1:+.2%}")

# F_xz is proportional to h_y: without it the motion is invisible
try:
    solve_motion([1e-3, 2e-3], cfg.with_hy(0.0))
except UnidentifiableError as exc:
    print(f"h_y = 0: {exc}")

# three ensembles and a strained NV (E != 0) also determine h_y
cfg3 = EnsembleConfig(NvParams(1.0, 0.1), hz=(0.3, 0.5, 0.7), hy_known=False)
est = solve_vector(analytic_observables(cfg3, 0.4, 0.02, hy=0.15), cfg3)
print(f"vector inversion: h_x = {est.hx_hat:.8f}, h_y = {est.hy_hat:.8f}, v_x = {est.vx_hat:.8f}")
