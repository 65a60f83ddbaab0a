"""Field and velocity inversion from ensemble readouts, and sensitivity limits.

Several NV ensembles see the same moving transverse field ``h_x(t)`` but
different static ``h_z``.  In the slow-ramp regime the offset-corrected
readout of each ensemble is

    <S_z^(i)> - <S_z^(i)>_ground = v_x F_xz(h_x, h_y, h_z^(i)) + O(v_x^2),

so two ensembles fix ``(h_x, v_x)`` and three also fix ``h_y``.  ``F_xz`` is
even in ``h_x`` and odd in ``h_y``: solutions are reported with
``h_x >= 0`` and, when ``h_y`` is unknown, ``v_x > 0``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, least_squares

from .berry import GAP_GUARD, curvature_cartesian_analytic, curvature_spherical_analytic, spherical_pair_term
from .eig3 import eig3_exact, spectral_range
from .exceptions import DegeneracyError, NumericalError, SingularSystemError, UnidentifiableError
from .linalg import check_hermitian, expectation
from .nv_model import SPIN1, FieldVector, NvParams, hamiltonian_cartesian
from .propagator import DEFAULT_TOL, evolve

IDENTIFIABILITY_TOL = 1e-10
SCAN_POINTS = 64
NEWTON_DAMPING = 0.5
NEWTON_MAX_ITER = 100
NEWTON_STEP_TOL = 1e-12
NEWTON_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class EnsembleConfig:
    """Static fields of the ensembles; ``hy`` is ignored when ``hy_known`` is false."""

    d: NvParams
    hz: tuple
    hy: float = 0.0
    hy_known: bool = True
    hx_range: tuple = (0.0, 2.0)

    def __post_init__(self):
        object.__setattr__(self, "hz", tuple(float(z) for z in self.hz))
        if len(self.hz) < 2:
            raise ValueError("at least two ensembles are required")

    def with_hy(self, hy):
        return EnsembleConfig(self.d, self.hz, hy, True, self.hx_range)


@dataclass(frozen=True)
class MotionEstimate:
    hx_hat: float
    vx_hat: float
    hy_hat: float | None
    residual: float
    iterations: int
    method: str = ""


def f_xz(p, hx, hy, hz):
    return curvature_cartesian_analytic(p, FieldVector(hx, hy, hz)).f_xz


def _f_xz_grid(p, hx, hy, hz):
    """Ground-band ``F_xz`` on arrays of fields by sum over states (batched)."""
    values, vectors = eig3_exact(hamiltonian_cartesian(p, (hx, hy, hz)), check=False)
    vh = np.swapaxes(vectors, -1, -2).conj()
    a = vh @ SPIN1.sx @ vectors
    b = vh @ SPIN1.sz @ vectors
    gap2 = (values[..., 1:] - values[..., :1]) ** 2
    return -2 * np.sum(np.imag(a[..., 0, 1:] * b[..., 1:, 0]) / gap2, axis=-1)


def _ground_sz(p, hx, hy, hz):
    psi = eig3_exact(hamiltonian_cartesian(p, (hx, hy, hz))).vectors[:, 0]
    return expectation(psi, SPIN1.sz)


def static_observables(cfg, hx):
    """Ground-state ``<S_z>`` of every ensemble at transverse field ``hx``."""
    return [_ground_sz(cfg.d, hx, cfg.hy, z) for z in cfg.hz]


def ramp_path(hx_final, vx_final):
    """Smooth ramp from 0 to ``hx_final`` ending with velocity ``vx_final``.

    The velocity follows the septic smoothstep ``35u^4 - 84u^5 + 70u^6 - 20u^7``
    of ``u = t/t_final``: the drive switches on with its first three
    derivatives vanishing, which keeps transient excitation small, and ends
    with zero acceleration.
    ``t_final = 2 hx_final / vx_final``.  Returns ``(hx_path, t_final)``.
    """
    if not vx_final > 0 or not hx_final > 0:
        raise ValueError("ramp needs positive final field and velocity")
    t_final = 2 * hx_final / vx_final

    def hx_path(t):
        u = np.asarray(t, float) / t_final
        return 2 * hx_final * u**5 * (7 - 14 * u + 10 * u * u - 2.5 * u**3)

    return hx_path, t_final


def forward_observables(cfg, hx_path, t_final, tol=DEFAULT_TOL):
    """Raw ``<S_z>`` of each ensemble after driving ``h_x`` along ``hx_path``.

    Every ensemble starts in its instantaneous ground state at ``t = 0``.
    """
    out = []
    for z in cfg.hz:
        def h_of_t(t, z=z):
            t = np.asarray(t, float)
            return hamiltonian_cartesian(cfg.d, (hx_path(t), np.full_like(t, cfg.hy), np.full_like(t, z)))

        _check_path(h_of_t, t_final)
        psi0 = eig3_exact(h_of_t(np.array(0.0))).vectors[:, 0]
        psi = evolve(h_of_t, psi0, t_final, tol)
        out.append(expectation(psi, SPIN1.sz))
    return out


def _check_path(h_of_t, t_final, n_samples=129):
    values = eig3_exact(h_of_t(np.linspace(0, t_final, n_samples)), check=False).values
    gaps = values[:, 1] - values[:, 0]
    if gaps.min() < GAP_GUARD:
        raise DegeneracyError("ground level degenerate along the ramp", gap=float(gaps.min()))


def response_components(cfg, hx_path, t_final, tol=DEFAULT_TOL):
    """Offset-corrected readouts ``<S_z> - <S_z>_ground`` at the final field."""
    raw = forward_observables(cfg, hx_path, t_final, tol)
    static = static_observables(cfg, float(hx_path(t_final)))
    return [r - s for r, s in zip(raw, static)]


def analytic_observables(cfg, hx, vx, hy=None):
    """Noise-free readouts ``v_x F_xz`` of the linear-response model."""
    hy = cfg.hy if hy is None else hy
    return [vx * f_xz(cfg.d, hx, hy, z) for z in cfg.hz]


def _fd_jacobian(fun, x, r0):
    jac = np.empty((len(r0), len(x)))
    for k in range(len(x)):
        h = 1e-7 * max(1.0, abs(x[k]))
        e = np.zeros_like(x)
        e[k] = h
        jac[:, k] = (fun(x + e) - fun(x - e)) / (2 * h)
    return jac


def damped_newton(fun, x0, max_iter=NEWTON_MAX_ITER, step_tol=NEWTON_STEP_TOL,
                  residual_tol=NEWTON_RESIDUAL_TOL, cond_max=1e12):
    """Newton iteration with step halving until the residual norm decreases.

    Returns ``(x, residual_norm, iterations)``.  One extra full step is taken
    after convergence when it lowers the residual further.
    """
    x = np.asarray(x0, dtype=float)
    r = fun(x)
    for it in range(1, max_iter + 1):
        jac = _fd_jacobian(fun, x, r)
        if np.linalg.cond(jac) > cond_max:
            raise SingularSystemError(f"Jacobian is singular at {x}")
        delta = np.linalg.solve(jac, -r)
        lam = 1.0
        while True:
            trial = x + lam * delta
            rt = fun(trial)
            if np.linalg.norm(rt) < np.linalg.norm(r) or lam < 1e-10:
                break
            lam *= NEWTON_DAMPING
        step = lam * np.linalg.norm(delta)
        x, r = trial, rt
        if step < step_tol or np.linalg.norm(r) < residual_tol:
            polish = x + np.linalg.solve(_fd_jacobian(fun, x, r), -r)
            rp = fun(polish)
            if np.linalg.norm(rp) < np.linalg.norm(r):
                x, r = polish, rp
            return x, float(np.linalg.norm(r)), it
    raise NumericalError(f"Newton did not converge in {max_iter} iterations (residual {np.linalg.norm(r):.3e})")


def _measurement_scale(measured):
    scale = float(np.max(np.abs(measured)))
    if scale == 0:
        raise UnidentifiableError("all measurements vanish; velocity is unidentifiable")
    return scale


def _guard(cfg, hx, hy):
    for z in cfg.hz:
        if abs(f_xz(cfg.d, hx, hy, z)) < IDENTIFIABILITY_TOL:
            raise UnidentifiableError(f"F_xz vanishes (< {IDENTIFIABILITY_TOL:g}) for h_z={z} at h_x={hx:.6g}, h_y={hy:.6g}")


def solve_motion(measured, cfg, guess=None):
    """Recover ``(h_x, v_x)`` from two offset-corrected readouts with ``h_y`` known.

    The readout ratio eliminates ``v_x``; ``g(h_x) = m2 F1 - m1 F2`` is scanned
    over ``cfg.hx_range`` for sign changes and each bracket refined with
    Brent's method.  The root closest to ``guess`` (or the first) is kept.
    Without a bracket a damped Newton iteration on both unknowns is used.
    """
    m = np.asarray(measured, dtype=float)
    if len(m) != 2 or len(cfg.hz) != 2:
        raise ValueError("solve_motion expects exactly two ensembles")
    if cfg.hz[0] == cfg.hz[1]:
        raise SingularSystemError("ensembles share the same h_z")
    scale = _measurement_scale(m)
    p, hy = cfg.d, cfg.hy
    if abs(hy) < IDENTIFIABILITY_TOL:
        raise UnidentifiableError("F_xz is proportional to h_y and vanishes for h_y = 0")
    grid = np.linspace(*cfg.hx_range, SCAN_POINTS)
    f_grid = np.array([[f_xz(p, x, hy, z) for z in cfg.hz] for x in grid])
    if not np.max(np.abs(f_grid)) >= IDENTIFIABILITY_TOL:
        raise UnidentifiableError("F_xz vanishes over the whole h_x range (h_y = 0?)")

    def g(x):
        return (m[1] * f_xz(p, x, hy, cfg.hz[0]) - m[0] * f_xz(p, x, hy, cfg.hz[1])) / scale

    g_grid = (m[1] * f_grid[:, 0] - m[0] * f_grid[:, 1]) / scale
    roots = [float(x) for x, gx in zip(grid, g_grid) if gx == 0]
    for k in np.flatnonzero(g_grid[:-1] * g_grid[1:] < 0):
        roots.append(brentq(g, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    roots = [x for x in roots if max(abs(f_xz(p, x, hy, z)) for z in cfg.hz) >= IDENTIFIABILITY_TOL]

    def residual(x, v):
        return np.array([v * f_xz(p, x, hy, z) for z in cfg.hz]) - m

    if roots:
        if guess is not None:
            roots.sort(key=lambda x: abs(x - guess[0]))
        hx = roots[0]
        f = np.array([f_xz(p, hx, hy, z) for z in cfg.hz])
        k = int(np.argmax(np.abs(f)))
        vx = m[k] / f[k]
        x = np.array([hx, vx])
        iterations, method = len(roots), "bracket"
    else:
        if guess is None:
            k = int(np.argmin(np.abs(g_grid)))
            f0 = f_grid[k]
            guess = (grid[k], float(f0 @ m / (f0 @ f0)))
        x, _, iterations = damped_newton(lambda y: residual(*y) / scale, guess)
        x[0] = abs(x[0])
        method = "newton"
    _guard(cfg, x[0], hy)
    res = float(np.linalg.norm(residual(*x)))
    return MotionEstimate(float(x[0]), float(x[1]), None, res, iterations, method)


def solve_vector(measured, cfg, guess=None, grid_points=(41, 50), starts=5):
    """Recover ``(h_x, h_y, v_x)`` from three readouts with ``h_y`` unknown.

    A coarse ``(h_x, h_y)`` grid with the least-squares ``v_x`` at every node
    supplies the best few starting points for Levenberg-Marquardt fits; the
    fit with the smallest residual wins.  Needs ``E != 0``: for an axially symmetric
    NV the readouts depend on ``h_x`` and ``h_y`` only through
    ``h_x^2 + h_y^2`` and ``v_x h_y``.
    """
    m = np.asarray(measured, dtype=float)
    hz = cfg.hz
    if len(m) != 3 or len(hz) != 3:
        raise ValueError("solve_vector expects exactly three ensembles")
    if len(set(hz)) < 3:
        raise SingularSystemError("two ensembles share the same h_z; the system is rank deficient")
    if cfg.d.E == 0:
        # axial symmetry: F_xz = h_y g(h_x^2 + h_y^2, h_z), so only v_x h_y and
        # h_x^2 + h_y^2 can be recovered whatever the h_z values
        raise SingularSystemError("with E = 0 only v_x h_y and h_x^2 + h_y^2 are identifiable")
    scale = _measurement_scale(m)
    p = cfg.d

    def fvec(hx, hy):
        return np.array([f_xz(p, hx, hy, z) for z in hz])

    def residual(y):
        return (y[2] * fvec(y[0], y[1]) - m) / scale

    if guess is None:
        # F_xz is odd in h_y: search h_y > 0 and let v_x carry the sign
        gx, gy = np.meshgrid(np.linspace(*cfg.hx_range, grid_points[0]),
                             np.linspace(0.02, 1.0, grid_points[1]), indexing="ij")
        f = np.stack([_f_xz_grid(p, gx, gy, np.full_like(gx, z)) for z in hz], axis=-1)
        ff = np.sum(f * f, axis=-1)
        v = np.where(ff > 0, f @ m / np.where(ff > 0, ff, 1.0), 0.0)
        r = np.linalg.norm(v[..., None] * f - m, axis=-1)
        r = np.where(np.isfinite(r), r, np.inf).ravel()
        nodes = [(r[k], (gx.flat[k], gy.flat[k], v.flat[k])) for k in np.argsort(r)[:starts]]
        starts = [x for _, x in sorted(nodes)[:starts]]
    else:
        starts = [guess]
    best = None
    for x0 in starts:
        fit = least_squares(residual, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=200 * len(x0))
        if best is None or fit.cost < best.cost:
            best = fit
    y, iterations = best.x, int(best.nfev)
    if np.linalg.cond(best.jac) > 1e12:
        raise SingularSystemError(f"Jacobian is singular at {y}")
    hx, hy, vx = abs(y[0]), y[1], y[2]
    if vx < 0:
        hy, vx = -hy, -vx
    _guard(cfg, hx, hy)
    res = float(np.linalg.norm(vx * fvec(hx, hy) - m))
    return MotionEstimate(float(hx), float(vx), float(hy), res, iterations, "least_squares")


def susceptibility(d, theta, step=1e-4, pair=None, m=0):
    """``dF_phi,theta / dD`` of band ``m`` (or of one band ``pair`` term).

    Central differences at ``step`` and ``step/2`` combined by Richardson
    extrapolation.  ``pair=(m, n)`` differentiates the contribution of band
    ``n`` to the curvature of band ``m``.
    """
    if pair is None:
        def f(x):
            return curvature_spherical_analytic(x, theta, m).f_phitheta
    else:
        def f(x):
            return spherical_pair_term(x, theta, *pair)

    def central(h):
        return (f(d + h) - f(d - h)) / (2 * h)

    return (4 * central(step / 2) - central(step)) / 3


def sensitivity_bound(dh_dlambda, t):
    """Lower bound ``1 / (t (E_max - E_min))`` on the error of an estimated parameter."""
    if not t > 0:
        raise ValueError(f"total time must be positive, got {t}")
    a = np.asarray(dh_dlambda)
    check_hermitian(a)
    spread = spectral_range(a)
    if spread <= 1e-15 * max(1.0, float(np.max(np.abs(a)))):
        raise UnidentifiableError("generator has zero seminorm; the bound is unbounded")
    return 1.0 / (t * spread)
