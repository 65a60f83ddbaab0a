"""Dense complex linear algebra helpers and angular-momentum matrices.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Spin matrices
use the descending basis ``m = s, s-1, ..., -s`` everywhere in the package,
so for the NV spin-1 the basis order is ``|+1>, |0>, |-1>``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NonHermitianError

HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class SpinOperators:
    """Cartesian spin matrices for spin quantum number ``s``."""

    s: float
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    @property
    def dim(self):
        return self.sz.shape[0]

    def __iter__(self):
        return iter((self.sx, self.sy, self.sz))


def spin_operators(s):
    """Return the spin matrices for spin ``s`` (integer or half-integer).

    Parameters
    ----------
    s : float
        Spin quantum number; ``2*s`` must be a non-negative integer.

    Returns
    -------
    SpinOperators
        ``Sx, Sy, Sz`` of dimension ``2s+1`` in the basis ``m = s..-s``.
    """
    two_s = 2 * s
    if two_s < 0 or abs(two_s - round(two_s)) > 1e-12:
        raise ValueError(f"spin quantum number must be a non-negative half-integer, got {s}")
    two_s = int(round(two_s))
    s = two_s / 2
    m = s - np.arange(two_s + 1)
    # <m+1|S+|m> sits just above the diagonal in descending order
    raise_elems = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    s_plus = np.diag(raise_elems, 1).astype(complex)
    s_minus = s_plus.conj().T
    sx = (s_plus + s_minus) / 2
    sy = (s_plus - s_minus) / 2j
    sz = np.diag(m).astype(complex)
    return SpinOperators(s, sx, sy, sz)


def kron(a, b):
    """Tensor product with the standard ``numpy.kron`` entry layout."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def is_hermitian(a, atol=HERMITIAN_ATOL):
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        return False
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    return bool(np.max(np.abs(a - np.swapaxes(a, -1, -2).conj()), initial=0.0) <= atol * scale)


def check_hermitian(a, atol=HERMITIAN_ATOL, name="matrix"):
    if not is_hermitian(a, atol):
        raise NonHermitianError(f"{name} is not Hermitian within {atol:g}")


def expectation(psi, a, check=True):
    """Real expectation value ``<psi|A|psi>`` of a Hermitian operator.

    ``psi`` may also be a stack of column states of shape ``(dim, k)``, in
    which case one value per column is returned.
    """
    psi = np.asarray(psi)
    a = np.asarray(a)
    if a.shape[-1] != psi.shape[0]:
        raise ValueError(f"dimension mismatch: operator {a.shape}, state {psi.shape}")
    if check:
        check_hermitian(a, name="observable")
    value = np.einsum("i...,ij,j...->...", psi.conj(), a, psi)
    resid = np.max(np.abs(np.imag(value)), initial=0.0)
    norm2 = np.max(np.sum(np.abs(psi) ** 2, axis=0), initial=1.0)
    if resid > 1e-9 * max(1.0, norm2):
        raise NonHermitianError(f"expectation value has imaginary part {resid:g}")
    value = np.real(value)
    return float(value) if value.ndim == 0 else value


def commutator(a, b):
    return a @ b - b @ a


def dagger(a):
    return np.swapaxes(np.asarray(a), -1, -2).conj()
