"""Reading the curvature off a slow rotating quench.

The unit field is rotated from the z axis to the x axis with theta(t) =
v^2 t^2 / (2 pi), so that its angular velocity at the end is v.  To linear
order in v the final <S_y> equals -v F_phi,theta, so <S_y>/v approaches
(D^2+2)/sqrt(D^2+4) - D.  The residual oscillates and shrinks with v.
"""

from qresponse import response_sweep, retrieval_target

d = 0.06765
target = retrieval_target(d)
print(f"D = {d}: slow-quench limit {target:.6f}")
print("   v      <S_y>/v     error     fidelity")
for r in response_sweep(d, [0.16, 0.08, 0.04, 0.02, 0.01]):
    print(f"{r.v:6.3f}  {r.retrieved_curvature:9.6f}  {r.retrieved_curvature - target:+.5f}  {r.adiabatic_fidelity:.6f}")
