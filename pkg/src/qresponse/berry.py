"""Berry curvature of NV eigenstates.

Three independent routes are provided:

* closed forms for the Cartesian field components and for the unit-field
  spherical model,
* the sum-over-states expression built from ``dH`` matrix elements,
* finite differences of gauge-fixed eigenvectors (imaginary part of the
  quantum geometric tensor, ``F = -2 Im chi``).

Bands are indexed from 0 (ground state) in ascending energy order.
"""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .eig3 import eig3_exact, eig_iterative, eigvalues_exact
from .exceptions import DegeneracyError, GaugeError, NumericalError
from .nv_model import SPIN1, FieldVector, NvParams, hamiltonian_cartesian, hamiltonian_spherical, spherical_derivatives

GAP_GUARD = 1e-9
FD_STEP = 1e-4
# below this |cos(theta)| rounding in the middle-band normalisation exceeds
# the O(cos^2) error of the equatorial limit
_EQUATOR_COS = 1e-7


@dataclass(frozen=True)
class CurvatureCartesian:
    f_xy: float
    f_xz: float
    f_yz: float
    band: int = 0

    def as_matrix(self):
        """Full antisymmetric 3x3 curvature tensor in (x, y, z) order."""
        return np.array([[0.0, self.f_xy, self.f_xz],
                         [-self.f_xy, 0.0, self.f_yz],
                         [-self.f_xz, -self.f_yz, 0.0]])


@dataclass(frozen=True)
class CurvatureSpherical:
    f_phitheta: float
    band: int = 0


@dataclass(frozen=True)
class HamiltonianFamily:
    """A parameterised Hermitian matrix with analytic parameter derivatives.

    ``hamiltonian(point)`` returns the matrix and ``derivatives(point)`` the
    list ``[dH/dx_0, dH/dx_1, ...]``.
    """

    hamiltonian: Callable[[np.ndarray], np.ndarray]
    derivatives: Callable[[np.ndarray], Sequence[np.ndarray]] | None = None
    names: tuple = ()


def cartesian_family(p):
    """NV Hamiltonian as a function of ``(hx, hy, hz)``."""
    ops = list(SPIN1)
    return HamiltonianFamily(
        hamiltonian=lambda x: hamiltonian_cartesian(p, tuple(x)),
        derivatives=lambda x: ops,
        names=("hx", "hy", "hz"),
    )


def spherical_family(d):
    """Unit-field reduced model as a function of ``(phi, theta)``."""
    p = NvParams(d)
    return HamiltonianFamily(
        hamiltonian=lambda x: hamiltonian_spherical(p, x[1], x[0]),
        derivatives=lambda x: list(spherical_derivatives(x[1], x[0])),
        names=("phi", "theta"),
    )


def _eigensystem(h):
    return eig3_exact(h) if h.shape[-1] == 3 else eig_iterative(h)


def _check_gap(values, m):
    gaps = np.abs(np.delete(values, m) - values[m])
    gap = float(gaps.min())
    if gap < GAP_GUARD:
        raise DegeneracyError(f"band {m} is degenerate (gap {gap:.3e})", gap=gap)
    return gap


def min_gap(values, m):
    return float(np.abs(np.delete(values, m) - values[m]).min())


def curvature_cartesian_analytic(p, h, m=0):
    """Closed-form ``F_xy, F_xz, F_yz`` of band ``m`` for field ``h``.

    Energies come from the closed-form solver.  With ``D_k = D - E_k`` and
    ``D_k^{+-} = D_k +- E`` every component is a sum over the two other
    bands of rational expressions in the ``D_k`` and the field.
    """
    if not isinstance(h, FieldVector):
        h = FieldVector(*h)
    hx, hy, hz = h.hx, h.hy, h.hz
    D, E = p.D, p.E
    values = eigvalues_exact(hamiltonian_cartesian(p, h))
    _check_gap(values, m)

    dk = D - values
    h2 = hx * hx + hy * hy + hz * hz
    norm = (dk**4 + (h2 - 2 * E * E - 3 * hz * hz) * dk**2 + 2 * E * (hy * hy - hx * hx) * dk
            + (E * E + hz * hz) * (E * E + h2))
    scale = max(1.0, float(np.max(np.abs(dk)))) ** 4
    if np.min(np.abs(norm)) <= 1e-13 * scale:
        # columns 1 and 3 of H - E_k are parallel (e.g. field along z): the
        # closed form is 0/0 here although the curvature itself is smooth
        raise NumericalError("closed-form curvature undefined: vanishing eigenvector normalisation")
    dm, dmp, dmm = dk[m], dk[m] + E, dk[m] - E
    transverse = h2 - hz * hz
    f_xy = f_xz = f_yz = 0.0
    for n in range(3):
        if n == m:
            continue
        dn, dnp, dnn = dk[n], dk[n] + E, dk[n] - E
        pre = 1.0 / (norm[m] * norm[n] * (dm - dn))
        f_xy += -2 * hz * (dm + dn) * pre * (
            (dmp + dnp) * (dmm * dnn * hx * hx - hy * hy * hz * hz)
            + (dmm + dnn) * (dmp * dnp * hy * hy - hx * hx * hz * hz))
        f_xz += 2 * hy * (dmp + dnp) * pre * (
            2 * E * (dmm * dnn + hz * hz) * hx * hx - (dm + dn) * transverse * hz * hz)
        f_yz += 2 * hx * (dmm + dnn) * pre * (
            2 * E * (dmp * dnp + hz * hz) * hy * hy + (dm + dn) * transverse * hz * hz)
    return CurvatureCartesian(float(f_xy), float(f_xz), float(f_yz), m)


def _spherical_terms(d, theta):
    values = eigvalues_exact(hamiltonian_spherical(NvParams(d), theta, 0.0))
    dk = d - values
    c2 = np.cos(theta) ** 2
    # 2 D^4 - D^2 + (1 - 3 D^2) cos(2 theta) + 1, rearranged to avoid cancellation
    norm = 2 * (dk**4 + dk**2 * (1 - 3 * c2) + c2)
    return values, dk, norm


def spherical_pair_term(d, theta, m, n):
    """Contribution of band ``n`` to the spherical curvature of band ``m``."""
    st, ct = np.sin(theta), np.cos(theta)
    if m == n or abs(st) < 1e-15:
        return 0.0
    _, dk, norm = _spherical_terms(d, theta)
    return float(8 * st**3 * ct**2 * (dk[n] + dk[m]) ** 2 * (1 - dk[n] * dk[m])
                 / (norm[m] * norm[n] * (dk[n] - dk[m])))


def curvature_spherical_analytic(d, theta, m=0):
    """Closed-form ``F_phi,theta`` of band ``m`` for the unit-field model.

    At the equator the middle level has a vanishing normalisation and the
    general expression becomes 0/0; there the outer bands take the limit
    ``-2 / (D_m (1 + D_m^2))`` and the middle band follows from the zero
    band sum.
    """
    values, dk, norm = _spherical_terms(d, theta)
    _check_gap(values, m)
    st, ct = np.sin(theta), np.cos(theta)
    if abs(st) < 1e-15:
        # field along z: the sin^3 prefactor kills the 0/0 normalisation
        return CurvatureSpherical(0.0, m)
    if abs(ct) < _EQUATOR_COS:
        outer = {k: -2 / (dk[k] * (1 + dk[k] ** 2)) for k in (0, 2)}
        outer[1] = -(outer[0] + outer[2])
        return CurvatureSpherical(float(st**3 * outer[m]), m)
    total = 0.0
    for n in range(3):
        if n != m:
            total += (dk[n] + dk[m]) ** 2 * (1 - dk[n] * dk[m]) / (norm[m] * norm[n] * (dk[n] - dk[m]))
    return CurvatureSpherical(float(8 * st**3 * ct**2 * total), m)


def equator_curvature(d):
    """Ground-band ``F_phi,theta`` at ``theta = pi/2``: ``D - (D^2+2)/sqrt(D^2+4)``."""
    return d - (d * d + 2) / np.sqrt(d * d + 4)


def curvature_numeric(family, at, mu, lam, m=0):
    """Sum-over-states curvature ``F_{mu,lam}`` of band ``m``.

    ``F = i sum_{n != m} (<m|dH_mu|n><n|dH_lam|m> - (mu <-> lam)) / (E_n - E_m)^2``
    using the family's analytic derivatives.
    """
    if family.derivatives is None:
        raise ValueError("family provides no Hamiltonian derivatives")
    at = np.asarray(at, dtype=float)
    h = family.hamiltonian(at)
    values, vectors = _eigensystem(h)
    _check_gap(values, m)
    if mu == lam:
        return 0.0
    derivs = family.derivatives(at)
    try:
        d_mu, d_lam = derivs[mu], derivs[lam]
    except IndexError:
        raise ValueError(f"no derivative for parameter index {max(mu, lam)}") from None
    a = vectors.conj().T @ d_mu @ vectors
    b = vectors.conj().T @ d_lam @ vectors
    total = 0.0
    for n in range(len(values)):
        if n != m:
            total += -2 * np.imag(a[m, n] * b[n, m]) / (values[n] - values[m]) ** 2
    return float(total)


def eigenstate_family(family, m=0):
    """Map a parameter point to the phase-fixed eigenvector of band ``m``."""
    def state(x):
        values, vectors = _eigensystem(family.hamiltonian(np.asarray(x, dtype=float)))
        _check_gap(values, m)
        return vectors[:, m]
    return state


def _central_derivative(state_family, at, k, step, psi0):
    e = np.zeros_like(at)
    e[k] = step
    plus, minus = state_family(at + e), state_family(at - e)
    for nb in (plus, minus):
        if np.real(np.vdot(psi0, nb)) < 0.99:
            raise GaugeError(f"eigenvector gauge jumps along parameter {k} at step {step:g}")
    return (plus - minus) / (2 * step)


def geometric_tensor_fd(state_family, at, mu, lam, step=FD_STEP, richardson=True):
    """Quantum geometric tensor ``chi_{mu,lam}`` by central differences.

    ``chi = <d_mu psi|d_lam psi> - <d_mu psi|psi><psi|d_lam psi>``.  With
    ``richardson`` the derivatives at ``step`` and ``step/2`` are combined to
    cancel the leading truncation error.  The Berry curvature is
    ``-2 * chi.imag``.
    """
    at = np.asarray(at, dtype=float)
    if step <= 1e-10 * max(1.0, float(np.max(np.abs(at)))):
        raise NumericalError(f"finite-difference step {step:g} underflows")
    psi = state_family(at)

    def deriv(k):
        d1 = _central_derivative(state_family, at, k, step, psi)
        if not richardson:
            return d1
        d2 = _central_derivative(state_family, at, k, step / 2, psi)
        return (4 * d2 - d1) / 3

    d_mu = deriv(mu)
    d_lam = d_mu if lam == mu else deriv(lam)
    return complex(np.vdot(d_mu, d_lam) - np.vdot(d_mu, psi) * np.vdot(psi, d_lam))


def curvature_fd(family, at, mu, lam, m=0, step=FD_STEP):
    """Berry curvature ``-2 Im chi`` from finite differences of eigenvectors."""
    return -2 * geometric_tensor_fd(eigenstate_family(family, m), at, mu, lam, step).imag
