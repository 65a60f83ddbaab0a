import numpy as np
import pytest

from oracles import SX1, SY1, SZ1, nv_matrix
from qresponse.linalg import is_hermitian, spin_operators
from qresponse.nv_model import (BathParams, FieldVector, NvParams, hamiltonian_cartesian, hamiltonian_coupled,
                                hamiltonian_spherical, hyperfine_coupling, spherical_derivatives)


def test_cartesian_matches_operator_form():
    rng = np.random.default_rng(0)
    for _ in range(10):
        d, e = rng.uniform(0, 2), rng.uniform(-1, 1)
        hx, hy, hz = rng.normal(size=3)
        np.testing.assert_allclose(hamiltonian_cartesian(NvParams(d, e), (hx, hy, hz)),
                                   nv_matrix(d, e, hx, hy, hz), atol=1e-15)


def test_broadcasting():
    hx = np.linspace(0, 1, 4)
    stack = hamiltonian_cartesian(NvParams(1.0), (hx, 0.2, np.zeros((2, 1))))
    assert stack.shape == (2, 4, 3, 3)
    np.testing.assert_allclose(stack[1, 2], nv_matrix(1.0, 0, hx[2], 0.2, 0.0), atol=1e-15)


def test_spherical_model():
    p = NvParams(0.3)
    theta, phi = 0.7, 1.1
    f = FieldVector.from_spherical(1.0, theta, phi)
    np.testing.assert_allclose(hamiltonian_spherical(p, theta, phi), hamiltonian_cartesian(p, f), atol=1e-15)
    with pytest.raises(ValueError):
        hamiltonian_spherical(NvParams(0.3, 0.1), theta)


def test_spherical_derivatives_by_finite_difference():
    p, theta, phi, h = NvParams(0.4), 0.8, 0.3, 1e-6
    d_phi, d_theta = spherical_derivatives(theta, phi)
    fd_phi = (hamiltonian_spherical(p, theta, phi + h) - hamiltonian_spherical(p, theta, phi - h)) / (2 * h)
    fd_theta = (hamiltonian_spherical(p, theta + h, phi) - hamiltonian_spherical(p, theta - h, phi)) / (2 * h)
    np.testing.assert_allclose(d_phi, fd_phi, atol=1e-9)
    np.testing.assert_allclose(d_theta, fd_theta, atol=1e-9)


def test_field_vector_roundtrip():
    f = FieldVector.from_spherical(2.0, 0.9, -2.0)
    h, theta, phi = f.to_spherical()
    assert (h, theta, phi) == pytest.approx((2.0, 0.9, -2.0))
    assert FieldVector(0, 0, 0).to_spherical() == (0.0, 0.0, 0.0)
    np.testing.assert_allclose(f.as_array(), [f.hx, f.hy, f.hz])


@pytest.mark.parametrize("i0", [0, 0.5, 1, 2.5])
def test_coupled_hamiltonian_conserves_nuclear_spin(i0):
    nuc = spin_operators(i0)
    k = nuc.dim
    h = hamiltonian_coupled(NvParams(0.5), (0.3, -0.2, 0.8), 0.05, i0)
    assert h.shape == (3 * k, 3 * k) and is_hermitian(h)
    i2 = np.kron(np.eye(3), sum(o @ o for o in nuc))
    np.testing.assert_allclose(h @ i2, i2 @ h, atol=1e-13)


def test_hyperfine_for_single_nucleus():
    expected = sum(np.kron(s, i) for s, i in zip((SX1, SY1, SZ1), spin_operators(0.5)))
    np.testing.assert_allclose(hyperfine_coupling(0.5), expected, atol=1e-15)


def test_bath_params_validation():
    assert BathParams(4, 0.02, 0.0).beta == 0
    assert BathParams(4, 0.02, 0.2).beta == pytest.approx(2 * np.arctanh(0.2))
    with pytest.raises(ValueError):
        BathParams(4, 0.02, 1.5)
    with pytest.raises(ValueError):
        BathParams(-1, 0.02)
