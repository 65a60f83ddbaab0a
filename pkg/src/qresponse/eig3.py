"""Closed-form eigensystems of 3x3 Hermitian matrices.

Eigenvalues come from the trigonometric solution of the depressed
characteristic cubic.  With ``B = H - tr(H)/3`` and ``A = sqrt(2/tr(B^2)) B``
the eigenvalues of ``A`` are

    t_k = (2/sqrt(3)) cos[ arccos((3 sqrt(3)/2) det A)/3 - 2 pi k/3 ],

and ``lambda_k = sqrt(tr(B^2)/2) t_k + tr(H)/3``.  Eigenvectors are
conjugated cross products of two columns of ``H - lambda 1``.

Both routines accept a single matrix or a stack ``(..., 3, 3)``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError
from .linalg import HERMITIAN_ATOL, check_hermitian

ARCCOS_SLACK = 1e-12
CROSS_THRESHOLD = 1e-8
ORTHO_TOL = 1e-10
PHASE_TOL = 1e-8

# column pairs tried in order; (0, 2) is the pair used in the NV formulas
_PAIRS = ((0, 2), (0, 1), (1, 2))


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues and orthonormal eigenvector columns.

    For stacked input ``values`` has shape ``(..., n)`` and ``vectors``
    ``(..., n, n)`` with ``vectors[..., :, k]`` belonging to ``values[..., k]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    def __iter__(self):
        return iter((self.values, self.vectors))

    @property
    def ground(self):
        return self.vectors[..., :, 0]


def fix_phase(vectors, tol=PHASE_TOL):
    """Rotate each eigenvector so its first non-negligible entry is real positive."""
    v = np.array(vectors, dtype=complex)
    mags = np.abs(v)
    first = np.argmax(mags > tol, axis=-2)
    lead = np.take_along_axis(v, first[..., None, :], axis=-2)
    phase = np.ones_like(lead)
    nz = np.abs(lead) > 0
    phase[nz] = lead[nz] / np.abs(lead[nz])
    return v / phase


def eig_iterative(h, check=True):
    """Hermitian eigensystem from LAPACK (any dimension, stacks allowed)."""
    h = np.asarray(h)
    if check:
        check_hermitian(h)
    real = not np.iscomplexobj(h) or np.all(h.imag == 0)
    try:
        values, vectors = np.linalg.eigh(h.real if real else h)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"iterative eigensolver did not converge: {exc}") from exc
    return EigenSystem(values, fix_phase(vectors))


def eigvals3(h):
    """Trigonometric eigenvalues of a stack of Hermitian 3x3 matrices, ascending."""
    h = np.asarray(h, dtype=complex)
    tr = np.real(np.trace(h, axis1=-2, axis2=-1))
    b = h - (tr / 3)[..., None, None] * np.eye(3)
    # tr(B^2) = sum |b_ij|^2 for Hermitian B
    trb2 = np.sum(np.abs(b) ** 2, axis=(-2, -1))
    scale = np.sqrt(trb2 / 2)
    flat = scale <= 1e-15 * np.maximum(1.0, np.abs(tr))
    safe = np.where(flat, 1.0, scale)
    a = b / safe[..., None, None]
    q = np.real(np.linalg.det(a))
    arg = 1.5 * np.sqrt(3.0) * q
    arg = np.where(flat, 0.0, arg)
    if np.any(np.abs(arg) > 1 + ARCCOS_SLACK):
        worst = float(np.max(np.abs(arg)))
        raise NumericalError(f"arccos argument {worst!r} outside [-1, 1]")
    alpha = np.arccos(np.clip(arg, -1.0, 1.0)) / 3
    # k = 2, 1, 0 gives ascending order since alpha lies in [0, pi/3]
    k = np.array([2, 1, 0])
    t = (2 / np.sqrt(3.0)) * np.cos(alpha[..., None] - 2 * np.pi * k / 3)
    values = np.where(flat[..., None], 0.0, scale[..., None] * t) + (tr / 3)[..., None]
    return values


def _cross_vectors(h, values):
    """Largest conjugated column cross product for every eigenvalue.

    All three column pairs of ``H - E 1`` give the same eigenvector up to
    scale when ``E`` is simple; the largest product is the best conditioned.
    Returns unnormalised vectors ``(..., 3, 3)`` (columns) and their norms.
    """
    shifted = h[..., None, :, :] - values[..., :, None, None] * np.eye(3)
    best = None
    best_norm = None
    for i, j in _PAIRS:
        c = np.cross(shifted[..., :, :, i], shifted[..., :, :, j]).conj()
        n = np.linalg.norm(c, axis=-1)
        if best is None:
            best, best_norm = c, n
        else:
            take = n > best_norm
            best = np.where(take[..., None], c, best)
            best_norm = np.where(take, n, best_norm)
    return np.swapaxes(best, -1, -2), best_norm


def _hnorm2(h):
    return np.maximum(np.sum(np.abs(h) ** 2, axis=(-2, -1)), 1e-300)


def _dependent_columns_vector(h, value):
    """Eigenvector (1, 0, -mu) when column 1 of H - E equals mu times column 3."""
    shifted = h - value * np.eye(3)
    c1, c3 = shifted[:, 0], shifted[:, 2]
    n3 = np.vdot(c3, c3).real
    if n3 == 0:
        v = np.array([0, 0, 1], dtype=complex)
    else:
        mu = np.vdot(c3, c1) / n3
        v = np.array([1, 0, -mu], dtype=complex) / np.sqrt(1 + abs(mu) ** 2)
    resid = np.linalg.norm(shifted @ v)
    return v, resid


def _repair(h, values, vecs, good):
    """Fallback chain for one matrix whose cross products were unusable.

    Near a degeneracy the trigonometric roots lose about half their digits,
    so the returned values are Rayleigh quotients of the repaired vectors.
    """
    scale = max(np.sqrt(_hnorm2(h)), 1e-300)
    vecs = vecs.copy()
    for k in np.flatnonzero(~good):
        v, resid = _dependent_columns_vector(h, values[k])
        if resid > 1e-10 * scale:
            break
        vecs[:, k] = v
    else:
        if np.max(np.abs(vecs.conj().T @ vecs - np.eye(3))) <= ORTHO_TOL:
            return np.real(np.einsum("ik,ij,jk->k", vecs.conj(), h, vecs)), vecs
    fallback = eig_iterative(h, check=False)
    return fallback.values, fallback.vectors


def eig3_exact(h, check=True):
    """Closed-form eigensystem of Hermitian 3x3 matrix (or stack of them).

    Eigenvalues are ascending.  Eigenvectors are normalised conjugated cross
    products of the columns of ``H - E 1`` with the first non-negligible
    component made real and positive.  When every column pair is (nearly)
    linearly dependent the vector ``(1, 0, -mu)`` is used, and as a last
    resort the matrix is handed to :func:`eig_iterative`.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape[-2:] != (3, 3):
        raise ValueError(f"expected 3x3 matrices, got shape {h.shape}")
    if check:
        check_hermitian(h, HERMITIAN_ATOL)
    single = h.ndim == 2
    hs = h.reshape(-1, 3, 3)
    values = eigvals3(hs)
    vecs, norms = _cross_vectors(hs, values)
    good = norms >= CROSS_THRESHOLD * _hnorm2(hs)[..., None]
    safe = np.where(good, norms, 1.0)
    vecs = vecs / safe[..., None, :]

    gram = np.swapaxes(vecs, -1, -2).conj() @ vecs
    ortho = np.max(np.abs(gram - np.eye(3)), axis=(-2, -1)) <= ORTHO_TOL
    redo = np.flatnonzero(~(np.all(good, axis=-1) & ortho))
    for idx in redo:
        values[idx], vecs[idx] = _repair(hs[idx], values[idx], vecs[idx], good[idx])
    vecs = fix_phase(vecs)
    if single:
        return EigenSystem(values[0], vecs[0])
    return EigenSystem(values.reshape(h.shape[:-1]), vecs.reshape(h.shape))


def eigvalues_exact(h, check=True, rel_gap=1e-4):
    """Eigenvalues of :func:`eig3_exact` without building eigenvectors.

    Trigonometric roots lose accuracy like ``eps / gap``; matrices whose
    smallest relative gap is below ``rel_gap`` go through the full solver.
    """
    h = np.asarray(h, dtype=complex)
    if check:
        check_hermitian(h, HERMITIAN_ATOL)
    values = eigvals3(h)
    scale = np.maximum(np.sqrt(_hnorm2(h)), 1e-300)
    close = np.min(np.diff(values, axis=-1), axis=-1) < rel_gap * scale
    if np.any(close):
        if values.ndim == 1:
            return eig3_exact(h, check=False).values
        values[close] = eig3_exact(h[close], check=False).values
    return values


def spectral_range(a):
    """Seminorm ``E_max - E_min`` of a Hermitian operator."""
    values = eig_iterative(a).values
    return float(values[..., -1] - values[..., 0])


def nv_eigenvalues(D, E, hx, hy, hz):
    """Ascending NV energies from the explicit trace and determinant of the traceless part.

    ``E_k = (2/3)[D - Delta0 cos((phi -+ pi)/3)]`` and ``(2/3)[D + Delta0 cos(phi/3)]``
    with ``Delta0 = sqrt(1.5 tr(Hc^2))`` and ``cos(phi) = (3/Delta0)^3 det(Hc)/2``.
    """
    h2 = hx * hx + hy * hy + hz * hz
    tr2 = 2 * D * D / 3 + 2 * E * E + 2 * h2
    det = 2 * D / 3 * (E * E + h2 - D * D / 9) + hx * hx * (E - D) - hy * hy * (E + D)
    delta0 = np.sqrt(1.5 * tr2)
    safe = np.where(delta0 > 0, delta0, 1.0)
    cos_phi = np.clip(0.5 * (3 / safe) ** 3 * det, -1.0, 1.0)
    phi = np.where(delta0 > 0, np.arccos(cos_phi), 0.0)
    e1 = 2 / 3 * (D - delta0 * np.cos((phi - np.pi) / 3))
    e2 = 2 / 3 * (D - delta0 * np.cos((phi + np.pi) / 3))
    e3 = 2 / 3 * (D + delta0 * np.cos(phi / 3))
    return np.stack(np.broadcast_arrays(e1, e2, e3), axis=-1)


def nv_normalization(D, E, hx, hy, hz, energy):
    """Half the squared norm of the unnormalised NV eigenvector for ``energy``."""
    dm = D - energy
    h2 = hx * hx + hy * hy + hz * hz
    return (dm**4 + (h2 - 2 * E * E - 3 * hz * hz) * dm**2 + 2 * E * (hy * hy - hx * hx) * dm
            + (E * E + hz * hz) * (E * E + h2))


def nv_eigenvector(D, E, hx, hy, hz, energy):
    """Explicit normalised NV eigenvector for eigenvalue ``energy``.

    Undefined (zero norm) where the first and third columns of ``H - E 1``
    are parallel, e.g. the middle level of a transverse field with ``E = 0``.
    """
    dm = D - energy
    hp, hm = hx + 1j * hy, hx - 1j * hy
    v = np.array([-E * hp + (dm - hz) * hm,
                  np.sqrt(2) * (-dm * dm + E * E + hz * hz),
                  -E * hm + (dm + hz) * hp], dtype=complex)
    norm = np.sqrt(2 * nv_normalization(D, E, hx, hy, hz, energy))
    if norm == 0:
        raise NumericalError("eigenvector formula degenerates at this point")
    return v / norm


def spherical_eigenvalues(D, theta):
    """Energies of the unit-field reduced model; independent of the azimuth."""
    r = np.sqrt(D * D + 3)
    cos_phi = np.clip(D * (-9 - 2 * D * D + 27 * np.cos(theta) ** 2) / (2 * r**3), -1.0, 1.0)
    phi = np.arccos(cos_phi)
    e1 = 2 / 3 * (D - r * np.cos((phi - np.pi) / 3))
    e2 = 2 / 3 * (D - r * np.cos((phi + np.pi) / 3))
    e3 = 2 / 3 * (D + r * np.cos(phi / 3))
    return np.stack(np.broadcast_arrays(e1, e2, e3), axis=-1)
