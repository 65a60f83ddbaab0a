import numpy as np
import pytest

from oracles import SX1, SZ1, nv_matrix, sos_curvature
from qresponse.exceptions import NonHermitianError, NumericalError, SingularSystemError, UnidentifiableError
from qresponse.inversion import (EnsembleConfig, analytic_observables, damped_newton, f_xz, forward_observables,
                                 ramp_path, response_components, sensitivity_bound, solve_motion, solve_vector,
                                 static_observables, susceptibility)
from qresponse.nv_model import NvParams

CFG = EnsembleConfig(NvParams(1.0), (0.5, 0.7), hy=0.1)


def test_f_xz_against_sum_over_states():
    for hx in (0.1, 0.4, 1.3):
        ref = sos_curvature(nv_matrix(1.0, 0.0, hx, 0.1, 0.5), SX1, SZ1)
        assert f_xz(CFG.d, hx, 0.1, 0.5) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("hx, vx", [(0.2, 0.01), (0.9, 0.003), (1.6, 0.05)])
def test_solve_motion_roundtrip(hx, vx):
    est = solve_motion(analytic_observables(CFG, hx, vx), CFG)
    assert est.hx_hat == pytest.approx(hx, abs=1e-10)
    assert est.vx_hat == pytest.approx(vx, abs=1e-10)
    assert est.method == "bracket" and est.hy_hat is None


def test_solve_vector_roundtrip():
    cfg = EnsembleConfig(NvParams(1.0, 0.1), (0.3, 0.5, 0.7), hy_known=False)
    truth = (0.4, 0.15, 0.02)
    measured = analytic_observables(cfg, truth[0], truth[2], hy=truth[1])
    est = solve_vector(measured, cfg)
    np.testing.assert_allclose([est.hx_hat, est.hy_hat, est.vx_hat], truth, atol=1e-8)


def test_unidentifiable_without_hy():
    with pytest.raises(UnidentifiableError):
        solve_motion([1e-3, 2e-3], CFG.with_hy(0.0))
    with pytest.raises(UnidentifiableError):
        solve_motion([0.0, 0.0], CFG)


def test_singular_configurations():
    with pytest.raises(SingularSystemError):
        solve_motion([1e-3, 2e-3], EnsembleConfig(NvParams(1.0), (0.5, 0.5), hy=0.1))
    with pytest.raises(SingularSystemError):
        solve_vector([1e-3, 2e-3, 3e-3], EnsembleConfig(NvParams(1.0, 0.1), (0.3, 0.3, 0.7)))
    with pytest.raises(SingularSystemError):
        solve_vector([1e-3, 2e-3, 3e-3], EnsembleConfig(NvParams(1.0), (0.3, 0.5, 0.7)))


def test_axial_symmetry_of_readouts():
    # with E = 0 only h_x^2 + h_y^2 and v_x h_y enter the readouts
    cfg = EnsembleConfig(NvParams(1.0), (0.3, 0.5, 0.7))
    a = analytic_observables(cfg, 0.4, 0.02, hy=0.15)
    hx2 = np.sqrt(0.4**2 + 0.15**2 - 0.3**2)
    b = analytic_observables(cfg, hx2, 0.02 * 0.15 / 0.3, hy=0.3)
    np.testing.assert_allclose(a, b, rtol=1e-9)


def test_static_ramp_is_stationary():
    out = forward_observables(CFG, lambda t: np.zeros_like(np.asarray(t, float)), 50.0, tol=1e-10)
    np.testing.assert_allclose(out, static_observables(CFG, 0.0), atol=1e-9)


def test_no_linear_response_without_hy():
    # F_xz vanishes, so only the O(v^2) remainder survives
    cfg = CFG.with_hy(0.0)
    scaled = []
    for vx in (0.005, 0.0025):
        path, t_final = ramp_path(0.2, vx)
        scaled.append(np.array(response_components(cfg, path, t_final, tol=1e-9)) / vx**2)
    np.testing.assert_allclose(scaled[0], scaled[1], rtol=0.1)


def test_ramp_path():
    path, t_final = ramp_path(0.3, 0.02)
    assert t_final == pytest.approx(30.0)
    assert path(0.0) == 0.0 and path(t_final) == pytest.approx(0.3)
    h = 1e-4
    rate = (path(t_final) - path(t_final - h)) / h
    assert rate == pytest.approx(0.02, rel=1e-3)
    assert np.all(np.diff(path(np.linspace(0, t_final, 200))) >= 0)
    with pytest.raises(ValueError):
        ramp_path(0.3, 0.0)


def test_readout_bias_is_linear_in_velocity():
    # (<Sz> - static) / (v F) - 1 is O(v) for slow ramps
    slopes = []
    for vx in (0.0025, 0.00125):
        path, t_final = ramp_path(0.2, vx)
        r = response_components(CFG, path, t_final, tol=1e-9)
        a = analytic_observables(CFG, 0.2, vx)
        slopes.append([(x / y - 1) / vx for x, y in zip(r, a)])
    np.testing.assert_allclose(slopes[0], slopes[1], rtol=0.05)


def test_damped_newton():
    x, res, it = damped_newton(lambda y: np.array([y[0] ** 2 - 2, y[1] - y[0]]), [1.0, 0.0])
    np.testing.assert_allclose(x, [np.sqrt(2)] * 2, atol=1e-12)
    assert res < 1e-10 and it > 0
    with pytest.raises(SingularSystemError):
        damped_newton(lambda y: np.array([y[0] + y[1], y[0] + y[1]]), [1.0, 0.0])
    with pytest.raises(NumericalError):
        damped_newton(lambda y: np.array([y[0] ** 2 + 1]), [0.5], max_iter=5)


def test_susceptibility_at_equator():
    for d in (0.06765, 1.0, 2.0):
        exact = 1 - d * (d * d + 6) / (d * d + 4) ** 1.5
        assert susceptibility(d, np.pi / 2) == pytest.approx(exact, abs=1e-9)


def test_susceptibility_grows_towards_axis():
    values = [abs(susceptibility(1.0, t)) for t in (0.2, 0.1, 0.05, 0.02)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_pair_susceptibilities_sum():
    total = sum(susceptibility(1.0, 0.3, pair=(0, n)) for n in (1, 2))
    assert total == pytest.approx(susceptibility(1.0, 0.3), abs=1e-9)


def test_pair_13_term_drifts_towards_limit():
    target = -1 / (8 * np.sqrt(2))
    gaps = [abs(susceptibility(1.0, t, pair=(0, 2)) - target) for t in (0.08, 0.04, 0.02, 0.01)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_sensitivity_bound():
    assert sensitivity_bound(SZ1 @ SZ1, 2.0) == pytest.approx(0.5, abs=0)
    assert sensitivity_bound(SZ1, 1.0) == 0.5
    a = np.diag([0.3, -1.1, 2.0])
    assert sensitivity_bound(a, 2.0) == sensitivity_bound(a, 1.0) / 2
    assert sensitivity_bound(-4.0 * a, 1.0) == pytest.approx(sensitivity_bound(a, 1.0) / 4, rel=1e-15)
    with pytest.raises(ValueError):
        sensitivity_bound(SZ1, 0.0)
    with pytest.raises(UnidentifiableError):
        sensitivity_bound(np.eye(3), 1.0)
    with pytest.raises(NonHermitianError):
        sensitivity_bound(np.triu(np.ones((3, 3))), 1.0)
