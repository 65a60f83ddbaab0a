"""NV-centre spin Hamiltonians in rescaled units (hbar = g_e mu_B = 1).

The electronic spin-1 basis is ``|+1>, |0>, |-1>``.  Builders broadcast over
array-valued field components and return stacks of shape ``(..., 3, 3)``,
which is what the time propagators feed on.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import kron, spin_operators

SQRT2 = np.sqrt(2.0)
SPIN1 = spin_operators(1)


@dataclass(frozen=True)
class NvParams:
    """Zero-field splittings ``D`` (axial) and ``E`` (strain / electric)."""

    D: float
    E: float = 0.0


@dataclass(frozen=True)
class FieldVector:
    hx: float
    hy: float
    hz: float

    @classmethod
    def from_spherical(cls, h, theta, phi):
        st = np.sin(theta)
        return cls(h * st * np.cos(phi), h * st * np.sin(phi), h * np.cos(theta))

    def to_spherical(self):
        """Return ``(h, theta, phi)`` with ``theta`` in [0, pi]."""
        h = float(np.sqrt(self.hx**2 + self.hy**2 + self.hz**2))
        if h == 0:
            return 0.0, 0.0, 0.0
        return h, float(np.arccos(np.clip(self.hz / h, -1, 1))), float(np.arctan2(self.hy, self.hx))

    def as_array(self):
        return np.array([self.hx, self.hy, self.hz], dtype=float)


@dataclass(frozen=True)
class BathParams:
    """Homogeneous nuclear bath: ``N`` spin-1/2 nuclei, coupling ``A``, polarization ``P``."""

    N: int
    A: float
    P: float = 0.0

    def __post_init__(self):
        if self.N < 0:
            raise ValueError(f"bath size must be non-negative, got {self.N}")
        if abs(self.P) > 1:
            raise ValueError(f"polarization must lie in [-1, 1], got {self.P}")

    @property
    def beta(self):
        """Inverse temperature ``2 artanh(P)`` of the thermal bath state."""
        return 2 * np.arctanh(self.P)


def hamiltonian_cartesian(p, h):
    """Spin-1 Hamiltonian ``D Sz^2 + E (Sx^2 - Sy^2) + h.S`` as an explicit matrix.

    ``h`` is a :class:`FieldVector` or a tuple ``(hx, hy, hz)`` whose entries
    may be arrays of a common shape.
    """
    if isinstance(h, FieldVector):
        hx, hy, hz = h.hx, h.hy, h.hz
    else:
        hx, hy, hz = h
    hx, hy, hz = np.broadcast_arrays(np.asarray(hx, float), np.asarray(hy, float), np.asarray(hz, float))
    out = np.zeros(hx.shape + (3, 3), dtype=complex)
    off = (hx - 1j * hy) / SQRT2
    out[..., 0, 0] = p.D + hz
    out[..., 2, 2] = p.D - hz
    out[..., 0, 1] = off
    out[..., 1, 2] = off
    out[..., 1, 0] = off.conj()
    out[..., 2, 1] = off.conj()
    out[..., 0, 2] = p.E
    out[..., 2, 0] = p.E
    return out


def hamiltonian_spherical(p, theta, phi=0.0):
    """Reduced model with unit field along ``(theta, phi)``; requires ``E = 0``."""
    if p.E != 0:
        raise ValueError("the spherical model is defined for E = 0 only")
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    st = np.sin(theta)
    return hamiltonian_cartesian(p, (st * np.cos(phi), st * np.sin(phi), np.cos(theta)))


def spherical_derivatives(theta, phi=0.0):
    """``(dH/dphi, dH/dtheta)`` of the reduced model (independent of ``D``)."""
    sx, sy, sz = SPIN1
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    d_phi = -st * sp * sx + st * cp * sy
    d_theta = ct * cp * sx + ct * sp * sy - st * sz
    return d_phi, d_theta


def hyperfine_coupling(i0):
    """``S.I`` for the NV spin and a collective nuclear spin ``i0`` (electron first)."""
    nuc = spin_operators(i0)
    return sum(kron(s, i) for s, i in zip(SPIN1, nuc))


def hamiltonian_coupled(p, h, a, i0):
    """NV Hamiltonian plus homogeneous hyperfine coupling to collective spin ``i0``.

    Returns ``H_NV (x) 1 + a S.I`` of dimension ``3 (2 i0 + 1)``.  Field
    components may be arrays, giving a stack of matrices.
    """
    nuc_dim = spin_operators(i0).dim
    h_nv = hamiltonian_cartesian(p, h)
    eye = np.eye(nuc_dim)
    out = np.einsum("...ij,kl->...ikjl", h_nv, eye).reshape(h_nv.shape[:-2] + (3 * nuc_dim, 3 * nuc_dim))
    return out + a * hyperfine_coupling(i0)
