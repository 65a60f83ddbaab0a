"""Time propagation along quench protocols and dynamic-response retrieval.

Each step applies ``exp(-i H(t_mid) dt)`` computed from the eigensystem of
the midpoint Hamiltonian.  The rule is symmetric, so the global error has an
expansion in even powers of ``dt``: the step is halved repeatedly and the
sequence of final states is Richardson-extrapolated (a Romberg tableau) until
two successive estimates agree to ``tol``.

Hamiltonian callables take an array of times and return a stack of matrices.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .berry import GAP_GUARD, equator_curvature
from .eig3 import eig3_exact, eig_iterative
from .exceptions import DegeneracyError, StepUnderflowError
from .linalg import check_hermitian, expectation
from .nv_model import SPIN1, NvParams, hamiltonian_spherical

DEFAULT_TOL = 1e-8
MAX_DOUBLINGS = 10
# complex entries per chunk of step matrices (~64 MB)
_CHUNK_ENTRIES = 1 << 22


@dataclass(frozen=True)
class QuenchProtocol:
    """Time path of the field with its instantaneous velocity at ``t_final``.

    ``field_path(t)`` returns ``(hx, hy, hz)`` arrays; ``theta_path`` is set for
    protocols that only rotate a unit field in the xz-plane.
    """

    field_path: Callable
    v: float
    t_final: float
    description: str = ""
    theta_path: Callable | None = None

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")


def rotating_quench(v):
    """Unit field rotated in the xz-plane with ``theta(t) = v^2 t^2 / (2 pi)``.

    The angle reaches ``pi/2`` at ``t_final = pi/v`` where its rate is ``v``;
    the rate vanishes at ``t = 0``.
    """
    if not v > 0:
        raise ValueError(f"quench velocity must be positive, got {v}")

    def theta(t):
        return v * v * np.asarray(t, float) ** 2 / (2 * np.pi)

    def field_path(t):
        th = theta(t)
        return np.sin(th), np.zeros_like(th), np.cos(th)

    return QuenchProtocol(field_path, v, np.pi / v, "rotating", theta)


@dataclass(frozen=True)
class ResponseResult:
    v: float
    observable_value: float
    retrieved_curvature: float
    adiabatic_fidelity: float
    d: float = float("nan")
    steps: int = 0


def _step_unitaries(h, dt):
    """``exp(-i h dt)`` for a stack of Hermitian matrices."""
    if h.shape[-1] == 3:
        values, vectors = eig3_exact(h, check=False)
    else:
        values, vectors = eig_iterative(h, check=False)
    phases = np.exp(-1j * dt * values)
    return (vectors * phases[..., None, :]) @ np.swapaxes(vectors, -1, -2).conj()


def _ordered_product(u):
    """``u[-1] @ ... @ u[1] @ u[0]`` by pairwise reduction."""
    while len(u) > 1:
        head = u[1::2] @ u[0:len(u) - 1:2]
        u = np.concatenate([head, u[-1:]]) if len(u) % 2 else head
    return u[0]


def propagate_fixed(h_of_t, psi0, t_final, n_steps):
    """Apply ``n_steps`` midpoint-exponential steps to ``psi0`` (vector or column block)."""
    psi = np.array(psi0, dtype=complex)
    dim = psi.shape[0]
    dt = t_final / n_steps
    chunk = max(1, _CHUNK_ENTRIES // (dim * dim))
    for start in range(0, n_steps, chunk):
        k = np.arange(start, min(start + chunk, n_steps))
        h = np.asarray(h_of_t((k + 0.5) * dt))
        psi = _ordered_product(_step_unitaries(h, dt)) @ psi
    return psi


def _operator_norm(h):
    return float(np.max(np.abs(np.linalg.eigvalsh(h))))


def initial_steps(h_of_t, t_final):
    """Step count for the initial step ``min(0.01/||H||, t_final/1000)``."""
    samples = np.asarray(h_of_t(np.array([0.0, 0.5 * t_final, t_final])))
    hnorm = max(_operator_norm(samples), 1e-12)
    dt0 = min(0.01 / hnorm, t_final / 1000)
    return int(np.ceil(t_final / dt0))


@dataclass
class Convergence:
    """Bookkeeping of an adaptive propagation (filled in by :func:`romberg`)."""

    steps: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def final_steps(self):
        return self.steps[-1] if self.steps else 0


def romberg(run, n0, tol, extrapolate=True, max_doublings=MAX_DOUBLINGS, info=None):
    """Drive a fixed-step propagator ``run(n)`` to tolerance by step doubling.

    Returns the best estimate of the final state(s), renormalised column-wise.
    """
    info = info if info is not None else Convergence()
    rows = []
    for k in range(max_doublings + 1):
        n = n0 * 2**k
        row = [run(n)]
        if extrapolate:
            for j in range(1, k + 1):
                row.append(row[j - 1] + (row[j - 1] - rows[-1][j - 1]) / (4**j - 1))
        info.steps.append(n)
        if rows:
            prev = rows[-1][-1]
            err = float(np.max(np.linalg.norm(np.atleast_2d((row[-1] - prev).T), axis=-1)))
            info.errors.append(err)
            if err <= tol:
                best = row[-1]
                return best / np.linalg.norm(best, axis=0)
        rows.append(row)
    raise StepUnderflowError(
        f"no convergence to tol={tol:g} after {max_doublings} step doublings "
        f"(last change {info.errors[-1]:.3e} at {info.steps[-1]} steps)")


def evolve(h_of_t, psi0, t_final, tol=DEFAULT_TOL, n_steps=None, extrapolate=True,
           max_doublings=MAX_DOUBLINGS, info=None):
    """Solve ``i dpsi/dt = H(t) psi`` from 0 to ``t_final``.

    Parameters
    ----------
    h_of_t : callable
        Maps an array of times to a stack of Hermitian matrices.
    psi0 : array
        Normalised initial state, or a block of states as columns.
    tol : float
        Target change of the final state between successive refinements;
        observables change by at most ``2 ||A|| tol``.
    n_steps : int, optional
        Use exactly this many midpoint steps (no refinement, no extrapolation).
    """
    psi0 = np.asarray(psi0, dtype=complex)
    check_hermitian(np.asarray(h_of_t(np.array([0.0, t_final]))), name="H(t)")
    if n_steps is not None:
        return propagate_fixed(h_of_t, psi0, t_final, int(n_steps))
    n0 = initial_steps(h_of_t, t_final)
    return romberg(lambda n: propagate_fixed(h_of_t, psi0, t_final, n), n0, tol,
                   extrapolate, max_doublings, info)


def propagate_split_fixed(h_e_of_t, coupling, psi0, t_final, n_steps):
    """Strang-split steps for ``H(t) = h_e(t) (x) 1 + coupling``.

    ``h_e`` acts on the leading 3-dimensional factor.  The static coupling
    exponential is computed once; the electronic 3x3 exponentials in batches.
    """
    psi = np.array(psi0, dtype=complex)
    dim = psi.shape[0]
    e_dim = 3
    rest = dim // e_dim
    dt = t_final / n_steps
    w_vals, w_vecs = np.linalg.eigh(coupling)

    def static(tau):
        return (w_vecs * np.exp(-1j * tau * w_vals)) @ w_vecs.conj().T

    half, full = static(dt / 2), static(dt)
    cols = psi.reshape(dim, -1).shape[1]
    psi = half @ psi.reshape(dim, cols)
    chunk = 1 << 14
    for start in range(0, n_steps, chunk):
        k = np.arange(start, min(start + chunk, n_steps))
        u_e = _step_unitaries(np.asarray(h_e_of_t((k + 0.5) * dt)), dt)
        last = start + len(k) == n_steps
        for i, u in enumerate(u_e):
            psi = np.einsum("ij,jkc->ikc", u, psi.reshape(e_dim, rest, cols)).reshape(dim, cols)
            psi = (half if last and i == len(k) - 1 else full) @ psi
    return psi.reshape(np.shape(psi0))


def evolve_split(h_e_of_t, coupling, psi0, t_final, tol=DEFAULT_TOL, n_steps=None,
                 extrapolate=True, max_doublings=MAX_DOUBLINGS, info=None):
    """Like :func:`evolve` for ``h_e(t) (x) 1 + coupling`` with a static coupling."""
    psi0 = np.asarray(psi0, dtype=complex)
    coupling = np.asarray(coupling, dtype=complex)
    check_hermitian(coupling, name="coupling")
    if n_steps is not None:
        return propagate_split_fixed(h_e_of_t, coupling, psi0, t_final, int(n_steps))
    cnorm = _operator_norm(coupling)
    samples = np.asarray(h_e_of_t(np.array([0.0, 0.5 * t_final, t_final])))
    hnorm = max(_operator_norm(samples) + cnorm, 1e-12)
    n0 = int(np.ceil(t_final / min(0.01 / hnorm, t_final / 1000)))
    return romberg(lambda n: propagate_split_fixed(h_e_of_t, coupling, psi0, t_final, n),
                   n0, tol, extrapolate, max_doublings, info)


def check_path_gap(d, n_samples=257):
    """Raise if the ground level of the reduced model closes along theta in [0, pi/2]."""
    theta = np.linspace(0, np.pi / 2, n_samples)
    values = eig3_exact(hamiltonian_spherical(NvParams(d), theta, 0.0), check=False).values
    gaps = values[:, 1] - values[:, 0]
    i = int(np.argmin(gaps))
    if gaps[i] < GAP_GUARD:
        raise DegeneracyError(f"ground level degenerate at theta={theta[i]:.4g} for D={d}", gap=float(gaps[i]))
    return float(gaps[i])


def ground_state(h):
    return eig3_exact(h).vectors[:, 0]


def retrieval_target(d):
    """Value that ``<S_y>/v`` approaches as ``v -> 0`` for the rotating quench."""
    return -equator_curvature(d)


def rotating_quench_response(d, v, tol=DEFAULT_TOL, n_steps=None, phase=0.0):
    """Rotating-quench response of the pure NV spin.

    Starts in the ground state at ``theta = 0``, evolves to ``t_final = pi/v``
    and returns ``<S_y>`` together with ``<S_y>/v``, which tends to
    ``(D^2+2)/sqrt(D^2+4) - D`` for slow quenches.  ``phase`` multiplies the
    initial state by ``exp(i phase)``.
    """
    p = NvParams(d)
    check_path_gap(d)
    proto = rotating_quench(v)

    def h_of_t(t):
        return hamiltonian_spherical(p, proto.theta_path(t), 0.0)

    psi0 = ground_state(h_of_t(0.0)) * np.exp(1j * phase)
    info = Convergence()
    psi = evolve(h_of_t, psi0, proto.t_final, tol, n_steps=n_steps, info=info)
    sy = expectation(psi, SPIN1.sy)
    final_ground = ground_state(h_of_t(proto.t_final))
    fidelity = float(abs(np.vdot(final_ground, psi)) ** 2)
    return ResponseResult(v, sy, sy / v, fidelity, d, info.final_steps or int(n_steps or 0))


def response_sweep(d, v_list, tol=DEFAULT_TOL, threads=1):
    """:func:`rotating_quench_response` for each velocity, in input order."""
    v_list = list(v_list)
    if any(not v > 0 for v in v_list):
        raise ValueError("all quench velocities must be positive")
    if threads > 1 and len(v_list) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda v: rotating_quench_response(d, v, tol), v_list))
    return [rotating_quench_response(d, v, tol) for v in v_list]
