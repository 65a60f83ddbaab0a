"""NV spin coupled homogeneously to a thermal bath of spin-1/2 nuclei.

With a homogeneous coupling ``A S.sum_k I_k`` the total nuclear spin ``I^2``
is conserved, so the bath splits into blocks of fixed collective spin
``I0``.  The thermal product state is diagonal in ``(I0, M0)`` with weight

    w(I0, M0) = C(N, N/2 - I0) (2 I0 + 1) / (N/2 + I0 + 1)
                * ((1+P)/2)^(N/2 - M0) * ((1-P)/2)^(N/2 + M0),

where the first factor counts the copies of spin ``I0`` in ``N`` spins-1/2.
Positive ``P`` favours nuclear spin down.  Each block of dimension
``3 (2 I0 + 1)`` is evolved once with all ``M0`` states as columns.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb

import numpy as np

from .exceptions import NumericalError
from .linalg import spin_operators
from .nv_model import SPIN1, BathParams, NvParams, hamiltonian_spherical, hyperfine_coupling
from .propagator import DEFAULT_TOL, check_path_gap, evolve_split, ground_state, rotating_quench

WEIGHT_CUTOFF = 1e-12
MAX_SKIPPED_MASS = 1e-10


@dataclass(frozen=True)
class BathSector:
    i0: float
    m0: float
    weight: float


@dataclass(frozen=True)
class MixedResponseResult:
    v: float
    P: float
    N: int
    A: float
    retrieved_curvature: float
    contributions: dict
    skipped_mass: float = 0.0
    trace: float = 1.0


def _half_integers(lo, hi):
    """``lo, lo+1, ..., hi`` for integer or half-integer bounds."""
    return [lo + k for k in range(int(round(hi - lo)) + 1)]


def bath_sectors(n, p):
    """All ``(I0, M0)`` sectors of ``n`` spins-1/2 with their thermal weights.

    Ordered by ascending ``I0`` then descending ``M0``; weights sum to one.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"need at least one nuclear spin, got {n}")
    if abs(p) > 1:
        raise ValueError(f"polarization must lie in [-1, 1], got {p}")
    half = n / 2
    down, up = (1 + p) / 2, (1 - p) / 2
    out = []
    for i0 in _half_integers(half % 1, half):
        mult = comb(n, int(round(half - i0))) * (2 * i0 + 1) / (half + i0 + 1)
        for m0 in _half_integers(-i0, i0)[::-1]:
            w = mult * down ** int(round(half - m0)) * up ** int(round(half + m0))
            out.append(BathSector(i0, m0, float(w)))
    return out


def _block_dims(i0):
    return int(round(2 * i0 + 1))


def sector_block_response(d, v, a, i0, tol=DEFAULT_TOL):
    """Final ``<S_y (x) 1>`` and norms for every ``M0`` of collective spin ``i0``.

    Returns ``(m0_values, sy, norm2)`` with ``m0`` descending, matching the
    basis order of :func:`spin_operators`.
    """
    p = NvParams(d)
    proto = rotating_quench(v)

    def h_e(t):
        return hamiltonian_spherical(p, proto.theta_path(t), 0.0)

    phi0 = ground_state(h_e(0.0))
    k = _block_dims(i0)
    psi0 = np.kron(phi0[:, None], np.eye(k))
    coupling = a * hyperfine_coupling(i0) if a != 0 else np.zeros((3 * k, 3 * k))
    try:
        psi = evolve_split(h_e, coupling, psi0, proto.t_final, tol)
    except NumericalError as exc:
        raise type(exc)(f"sector I0={i0}: {exc}") from exc
    block = psi.reshape(3, k, k)
    sy_psi = np.einsum("ij,jmc->imc", SPIN1.sy, block)
    sy = np.real(np.einsum("imc,imc->c", block.conj(), sy_psi))
    norm2 = np.real(np.einsum("imc,imc->c", block.conj(), block))
    m0 = spin_operators(i0).sz.diagonal().real
    return m0, sy, norm2


@dataclass(frozen=True)
class SectorResponses:
    """Per-sector final ``<S_y>`` for one ``(N, A, D, v)``; reusable across ``P``."""

    n: int
    a: float
    d: float
    v: float
    sy: dict
    norm2: dict


def sector_responses(n, a, d, v, tol=DEFAULT_TOL, i0_values=None, threads=1):
    """Evolve every collective-spin block (or the listed ``i0_values``)."""
    check_path_gap(d)
    half = n / 2
    if i0_values is None:
        i0_values = _half_integers(half % 1, half)
    i0_values = list(i0_values)

    def run(i0):
        return sector_block_response(d, v, a, i0, tol)

    if threads > 1 and len(i0_values) > 1:
        with ThreadPoolExecutor(threads) as pool:
            blocks = list(pool.map(run, i0_values))
    else:
        blocks = [run(i0) for i0 in i0_values]
    sy, norm2 = {}, {}
    for i0, (m0s, s, nn) in zip(i0_values, blocks):
        for m0, sv, nv in zip(m0s, s, nn):
            key = (i0, float(m0))
            sy[key], norm2[key] = float(sv), float(nv)
    return SectorResponses(n, a, d, v, sy, norm2)


def _kept_sectors(sectors):
    """Drop the lightest sectors while their total mass stays below the audit bound."""
    skipped = 0.0
    drop = set()
    for idx in sorted(range(len(sectors)), key=lambda i: sectors[i].weight):
        w = sectors[idx].weight
        if w >= WEIGHT_CUTOFF or skipped + w >= MAX_SKIPPED_MASS:
            break
        skipped += w
        drop.add(idx)
    return [s for i, s in enumerate(sectors) if i not in drop], skipped


def combine(responses, p):
    """Weight the sector expectations of ``responses`` with polarization ``p``."""
    sectors, skipped = _kept_sectors(bath_sectors(responses.n, p))
    total = 0.0
    trace = 0.0
    contributions = {}
    for s in sectors:
        key = (s.i0, s.m0)
        if key not in responses.sy:
            raise KeyError(f"sector I0={s.i0}, M0={s.m0} was not evolved")
        c = s.weight * responses.sy[key]
        contributions[key] = c / responses.v
        total += c
        trace += s.weight * responses.norm2[key]
    return MixedResponseResult(responses.v, p, responses.n, responses.a, total / responses.v,
                               contributions, skipped, trace + skipped)


def mixed_response(bp, d, v, tol=DEFAULT_TOL, threads=1):
    """Retrieved curvature ``Tr[rho(t_f) S_y] / v`` for a thermal nuclear bath.

    The NV starts in the ground state of the uncoupled Hamiltonian at
    ``theta = 0`` and the bath in its thermal state; the rotating quench is
    applied to the coupled system.
    """
    if not v > 0:
        raise ValueError(f"quench velocity must be positive, got {v}")
    sectors, _ = _kept_sectors(bath_sectors(bp.N, bp.P))
    needed = sorted({s.i0 for s in sectors})
    return combine(sector_responses(bp.N, bp.A, d, v, tol, needed, threads), bp.P)


def decoherence_sweep(bp, d, v_list, tol=DEFAULT_TOL, threads=1):
    """:func:`mixed_response` over a list of velocities, in input order."""
    return [mixed_response(bp, d, v, tol, threads) for v in v_list]


def polarization_sweep(n, a, d, v_list, p_list, tol=DEFAULT_TOL, threads=1):
    """Responses for every ``(P, v)`` sharing one block evolution per ``v``.

    Returns ``{P: [MixedResponseResult per v]}``.
    """
    out = {p: [] for p in p_list}
    for v in v_list:
        responses = sector_responses(n, a, d, v, tol, threads=threads)
        for p in p_list:
            out[p].append(combine(responses, p))
    return out


__all__ = [
    "BathParams", "BathSector", "MixedResponseResult", "SectorResponses", "bath_sectors",
    "combine", "decoherence_sweep", "mixed_response", "polarization_sweep", "sector_block_response",
    "sector_responses",
]
