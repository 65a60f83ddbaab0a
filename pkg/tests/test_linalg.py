import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import SX1, SY1, SZ1
from qresponse.exceptions import NonHermitianError
from qresponse.linalg import (check_hermitian, commutator, dagger, expectation, is_hermitian, kron,
                              spin_operators)

half_integers = st.integers(min_value=0, max_value=8).map(lambda k: k / 2)


def test_spin_one_matches_hand_written():
    s = spin_operators(1)
    np.testing.assert_allclose(s.sx, SX1, atol=1e-15)
    np.testing.assert_allclose(s.sy, SY1, atol=1e-15)
    np.testing.assert_allclose(s.sz, SZ1, atol=1e-15)
    assert s.dim == 3


@settings(max_examples=20, deadline=None)
@given(half_integers)
def test_su2_algebra(s):
    sx, sy, sz = spin_operators(s)
    np.testing.assert_allclose(commutator(sx, sy), 1j * sz, atol=1e-12)
    np.testing.assert_allclose(commutator(sy, sz), 1j * sx, atol=1e-12)
    casimir = sx @ sx + sy @ sy + sz @ sz
    np.testing.assert_allclose(casimir, s * (s + 1) * np.eye(int(2 * s + 1)), atol=1e-12)


def test_basis_order_descending():
    np.testing.assert_array_equal(spin_operators(1.5).sz.diagonal().real, [1.5, 0.5, -0.5, -1.5])


@pytest.mark.parametrize("bad", [-0.5, 0.3, 1.25])
def test_invalid_spin(bad):
    with pytest.raises(ValueError):
        spin_operators(bad)


def test_kron_dimensions():
    a, b = np.eye(3), np.ones((2, 2))
    assert kron(a, b).shape == (6, 6)


def test_hermitian_checks():
    assert is_hermitian(SY1)
    assert not is_hermitian(SY1 + 0.1 * np.triu(np.ones((3, 3)), 1))
    with pytest.raises(NonHermitianError):
        check_hermitian(np.array([[0, 1], [0, 0]]))
    np.testing.assert_array_equal(dagger(SY1), SY1)


def test_expectation_values():
    psi = np.array([1, 1j, 0]) / np.sqrt(2)
    assert expectation(psi, SZ1) == pytest.approx(0.5)
    block = np.eye(3)
    np.testing.assert_allclose(expectation(block, SZ1), [1, 0, -1])


def test_expectation_rejects_bad_input():
    with pytest.raises(ValueError):
        expectation(np.ones(2), SZ1)
    with pytest.raises(NonHermitianError):
        expectation(np.array([1, 1j, 0]) / np.sqrt(2), np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]]))
