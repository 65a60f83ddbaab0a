"""Closed-form spectrum of the NV ground-state spin.

The spin-1 Hamiltonian D Sz^2 + E (Sx^2 - Sy^2) + h.S is a 3x3 Hermitian
matrix, so its eigenvalues are the roots of a cubic.  This script compares
the trigonometric solution with LAPACK on a batch of random fields and then
looks at the unit-field model, where the equator has a simple closed form.
"""

import time

import numpy as np

from qresponse import NvParams, eig3_exact, hamiltonian_cartesian, hamiltonian_spherical

rng = np.random.default_rng(1)
p = NvParams(D=1.0, E=0.05)
fields = rng.uniform(-2, 2, size=(3, 200_000))
h = hamiltonian_cartesian(p, tuple(fields))

start = time.perf_counter()
values, vectors = eig3_exact(h)
elapsed = time.perf_counter() - start
ref = np.linalg.eigvalsh(h)
print(f"{len(h)} matrices in {elapsed:.2f} s, max |E - E_lapack| = {np.abs(values - ref).max():.2e}")

# each column is an eigenvector; the residual is at round-off level
resid = np.linalg.norm(h @ vectors - vectors * values[:, None, :], axis=1).max()
print(f"max residual ||H v - E v|| = {resid:.2e}")

# unit field in the xz-plane: at theta = pi/2 the middle level sits at D
d = 0.06765
for theta in (0.0, np.pi / 4, np.pi / 2):
    e = eig3_exact(hamiltonian_spherical(NvParams(d), theta)).values
    print(f"theta = {theta:.4f}: E = {np.array2string(e, precision=6)}")
r = np.sqrt(4 + d * d)
print(f"closed form at the equator: {(d - r) / 2:.6f}, {d:.6f}, {(d + r) / 2:.6f}")
