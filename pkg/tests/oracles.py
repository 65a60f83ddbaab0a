"""Reference computations that share no code with the package.

Everything here is built from hard-coded matrices, numpy.kron, numpy's
Hermitian eigensolver and scipy's adaptive Runge-Kutta integrator.
"""

import numpy as np
from scipy.integrate import solve_ivp

R2 = np.sqrt(2.0)

SX1 = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / R2
SY1 = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]]) / R2
SZ1 = np.diag([1.0, 0.0, -1.0]).astype(complex)

SX_HALF = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SY_HALF = np.array([[0, -1j], [1j, 0]]) / 2
SZ_HALF = np.diag([0.5, -0.5]).astype(complex)


def nv_matrix(d, e, hx, hy, hz):
    """``D Sz^2 + E (Sx^2 - Sy^2) + h.S`` from the operator products."""
    return d * SZ1 @ SZ1 + e * (SX1 @ SX1 - SY1 @ SY1) + hx * SX1 + hy * SY1 + hz * SZ1


def equator_target(d):
    """Slow-quench limit of ``<S_y>/v`` for the rotating quench."""
    return (d * d + 2) / np.sqrt(d * d + 4) - d


def sos_curvature(h, dmu, dlam, m=0):
    """Sum-over-states curvature from numpy.linalg.eigh."""
    w, u = np.linalg.eigh(h)
    a = u.conj().T @ dmu @ u
    b = u.conj().T @ dlam @ u
    return sum(-2 * np.imag(a[m, n] * b[n, m]) / (w[n] - w[m]) ** 2 for n in range(len(w)) if n != m)


def sos_pair_term(h, dmu, dlam, m, n):
    """Contribution of band ``n`` to the sum-over-states curvature of band ``m``."""
    w, u = np.linalg.eigh(h)
    a = u.conj().T @ dmu @ u
    b = u.conj().T @ dlam @ u
    return -2 * np.imag(a[m, n] * b[n, m]) / (w[n] - w[m]) ** 2


def _embed(op, k, n):
    """Nuclear operator ``op`` on spin ``k`` of ``n`` (identity elsewhere)."""
    out = np.eye(1)
    for j in range(n):
        out = np.kron(out, op if j == k else np.eye(2))
    return out


def bath_hamiltonian_parts(n, a):
    """Return (electronic embedding function, coupling) on the 3 * 2^n space."""
    dim_n = 2**n
    coupling = np.zeros((3 * dim_n, 3 * dim_n), dtype=complex)
    for k in range(n):
        for s, i in ((SX1, SX_HALF), (SY1, SY_HALF), (SZ1, SZ_HALF)):
            coupling += a * np.kron(s, _embed(i, k, n))

    def embed_e(h):
        return np.kron(h, np.eye(dim_n))

    return embed_e, coupling


def brute_force_bath_response(n, a, p, d, v, rtol=1e-12, atol=1e-13):
    """``Tr[rho(t_f) S_y] / v`` on the full product space.

    The bath starts in the thermal product state with spin-up probability
    ``(1 - P)/2`` per nucleus; the thermal density matrix is diagonal in the
    product basis so each basis configuration is evolved as a pure state.
    """
    embed_e, coupling = bath_hamiltonian_parts(n, a)
    t_final = np.pi / v

    def h_e(t):
        th = v * v * t * t / (2 * np.pi)
        return nv_matrix(d, 0.0, np.sin(th), 0.0, np.cos(th))

    phi0 = np.linalg.eigh(h_e(0.0))[1][:, 0]
    sy_full = embed_e(SY1)
    up, down = (1 - p) / 2, (1 + p) / 2
    total = 0.0
    for config in range(2**n):
        bits = [(config >> (n - 1 - k)) & 1 for k in range(n)]  # 0 = up, 1 = down
        weight = np.prod([down if b else up for b in bits])
        if weight == 0:
            continue
        nuc = np.zeros(2**n)
        nuc[config] = 1.0
        psi0 = np.kron(phi0, nuc).astype(complex)
        sol = solve_ivp(lambda t, y: -1j * ((embed_e(h_e(t)) + coupling) @ y), (0, t_final), psi0,
                        method="DOP853", rtol=rtol, atol=atol)
        psi = sol.y[:, -1]
        total += weight * np.real(np.vdot(psi, sy_full @ psi))
    return total / v


def rotating_quench_dop853(d, v, rtol=1e-12, atol=1e-13):
    """Pure-state ``<S_y>/v`` for the rotating quench with DOP853."""
    def h(t):
        th = v * v * t * t / (2 * np.pi)
        return nv_matrix(d, 0.0, np.sin(th), 0.0, np.cos(th))

    psi0 = np.linalg.eigh(h(0.0))[1][:, 0].astype(complex)
    sol = solve_ivp(lambda t, y: -1j * (h(t) @ y), (0, np.pi / v), psi0, method="DOP853", rtol=rtol, atol=atol)
    psi = sol.y[:, -1]
    return np.real(np.vdot(psi, SY1 @ psi)) / v
