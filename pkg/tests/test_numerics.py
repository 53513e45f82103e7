import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qndcavity.model import SIGMA_X, SIGMA_Z
from qndcavity.numerics import (
    DimensionMismatch,
    NotHermitian,
    Singular,
    adjoint,
    frobenius_norm,
    hermitian_eig,
    kron,
    linear_solve,
    matrix_apply,
    trace,
)

I2 = np.eye(2)


def test_kron_identity():
    np.testing.assert_array_equal(kron(I2, I2), np.eye(4))


def test_kron_diagonal():
    np.testing.assert_array_equal(kron(np.diag([1, 2]), np.diag([3, 4])), np.diag([3, 4, 6, 8]))


def test_kron_bit_flip():
    ket00 = np.array([1, 0, 0, 0])
    np.testing.assert_array_equal(matrix_apply(kron(SIGMA_X, SIGMA_X), ket00), [0, 0, 0, 1])


small = st.integers(1, 3)
entries = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_kron_associative(data):
    mats = [
        data.draw(arrays(complex, (data.draw(small), data.draw(small)), elements=entries))
        for _ in range(3)
    ]
    a, b, c = mats
    np.testing.assert_allclose(kron(kron(a, b), c), kron(a, kron(b, c)), atol=1e-12, rtol=0)


def test_eig_pauli_z():
    vals, _ = hermitian_eig(SIGMA_Z)
    np.testing.assert_allclose(vals, [-1, 1])


def test_eig_pauli_x_vectors():
    vals, vecs = hermitian_eig(SIGMA_X)
    np.testing.assert_allclose(vals, [-1, 1])
    expected = np.array([[1, 1], [-1, 1]]) / np.sqrt(2)
    for k in range(2):
        assert abs(abs(np.vdot(vecs[:, k], expected[:, k])) - 1) < 1e-12


def test_eig_one_excitation_block():
    # {|B,0>, |G,1>} block of the coupling: off-diagonal sqrt(2) g
    g = 0.37
    block = np.array([[0, np.sqrt(2) * g], [np.sqrt(2) * g, 0]])
    vals, _ = hermitian_eig(block)
    np.testing.assert_allclose(vals, [-np.sqrt(2) * g, np.sqrt(2) * g], atol=1e-14)


def test_eig_reconstruction_and_orthonormality(rng):
    z = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    m = z + z.conj().T
    vals, vecs = hermitian_eig(m)
    assert np.all(np.diff(vals) >= 0)
    assert frobenius_norm(vecs @ np.diag(vals) @ adjoint(vecs) - m) < 1e-9
    np.testing.assert_allclose(adjoint(vecs) @ vecs, np.eye(12), atol=1e-12)
    for k in range(12):
        assert np.linalg.norm(m @ vecs[:, k] - vals[k] * vecs[:, k]) < 1e-9


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        hermitian_eig(np.array([[0, 1], [0, 0]]))


def test_solve_identity():
    b = np.array([1 + 2j, -3, 0.5j])
    np.testing.assert_allclose(linear_solve(np.eye(3), b), b)


def test_solve_diagonal():
    np.testing.assert_allclose(linear_solve(np.diag([2, 4]), np.array([2, 4])), [1, 1])


def test_solve_random_residual(rng):
    a = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16)) + 8 * np.eye(16)
    b = rng.normal(size=16) + 1j * rng.normal(size=16)
    x = linear_solve(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_solve_singular():
    with pytest.raises(Singular):
        linear_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 1.0]))


def test_trace_and_adjoint(rng):
    assert trace(np.eye(4)) == 4
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    np.testing.assert_array_equal(adjoint(adjoint(m)), m)


def test_dimension_errors():
    with pytest.raises(DimensionMismatch):
        matrix_apply(np.eye(3), np.ones(2))
    with pytest.raises(DimensionMismatch):
        trace(np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        linear_solve(np.eye(3), np.ones(2))
