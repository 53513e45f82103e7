import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qndcavity.evolution import ket_to_dm
from qndcavity.model import ATOMIC_STATES, SystemParams, build_space
from qndcavity.numerics import DimensionMismatch
from qndcavity.observables import (
    ZeroProbe,
    concurrence,
    concurrence_of_kets,
    concurrence_wootters_direct,
    dark_projection,
    fidelity,
    mean_photon,
    mean_photon_kets,
    partial_trace_cavity,
    purity,
    top_fock_population,
    transmission,
)

from helpers import random_low_fock_state, random_two_qubit_state, random_unitary


def _werner(p):
    phi = ATOMIC_STATES["D"]
    return p * np.outer(phi, phi.conj()) + (1 - p) * np.eye(4) / 4


def _trace_loop(rho, nf):
    # index-by-index reference partial trace
    out = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        for k in range(4):
            out[i, k] = sum(rho[i * nf + n, k * nf + n] for n in range(nf))
    return out


def test_partial_trace_matches_loop(rng, space4):
    rho = random_low_fock_state(rng, space4, n_photons=5)
    np.testing.assert_allclose(partial_trace_cavity(rho), _trace_loop(rho, space4.n_fock), atol=1e-14)


def test_partial_trace_product(rng):
    a = random_two_qubit_state(rng)
    c = random_two_qubit_state(rng)[:3, :3]
    c /= np.trace(c)
    np.testing.assert_allclose(partial_trace_cavity(np.kron(a, c)), a, atol=1e-14)


def test_partial_trace_stack(rng, space4):
    rhos = np.stack([random_low_fock_state(rng, space4) for _ in range(3)])
    out = partial_trace_cavity(rhos)
    for r, o in zip(rhos, out):
        np.testing.assert_allclose(o, partial_trace_cavity(r), atol=1e-15)


def test_partial_trace_bad_shape():
    with pytest.raises(DimensionMismatch):
        partial_trace_cavity(np.eye(6))


@pytest.mark.parametrize("label, value", [("B", 1.0), ("D", 1.0), ("G", 0.0), ("E", 0.0), ("ge", 0.0)])
def test_concurrence_named(label, value):
    assert concurrence(ket_to_dm(ATOMIC_STATES[label])) == pytest.approx(value, abs=1e-12)


def test_concurrence_relaxed_mixture():
    # (|gg><gg| + |D><D|)/2 has C = 1/2 (worked by hand: lambdas 1/2, 0, 0, 0)
    rho = 0.5 * ket_to_dm(ATOMIC_STATES["G"]) + 0.5 * ket_to_dm(ATOMIC_STATES["D"])
    assert concurrence(rho) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.2, 1 / 3, 0.5, 0.8, 1.0])
def test_concurrence_werner(p):
    assert concurrence(_werner(p)) == pytest.approx(max(0.0, (3 * p - 1) / 2), abs=1e-12)


def test_concurrence_pure_closed_form(rng):
    # pure a|gg> + b|ge> + c|eg> + d|ee>: C = 2|ad - bc|
    for _ in range(20):
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        v /= np.linalg.norm(v)
        expected = 2 * abs(v[0] * v[3] - v[1] * v[2])
        assert concurrence(ket_to_dm(v)) == pytest.approx(expected, abs=1e-10)


def test_concurrence_matches_direct(rng):
    for rank in (1, 2, 3, 4):
        for _ in range(10):
            rho = random_two_qubit_state(rng, rank)
            assert concurrence(rho) == pytest.approx(concurrence_wootters_direct(rho), abs=1e-7)


def test_concurrence_stack(rng):
    rhos = np.stack([random_two_qubit_state(rng, 2) for _ in range(5)])
    np.testing.assert_allclose(concurrence(rhos), [concurrence(r) for r in rhos], atol=1e-13)


def test_concurrence_rejects_wrong_dim():
    with pytest.raises(DimensionMismatch):
        concurrence(np.eye(3))


def test_concurrence_of_kets_matches_density(rng, space4):
    psis = rng.normal(size=(space4.dim, 6)) + 1j * rng.normal(size=(space4.dim, 6))
    psis /= np.linalg.norm(psis, axis=0)
    batch = concurrence_of_kets(psis)
    for k in range(6):
        red = partial_trace_cavity(ket_to_dm(psis[:, k]))
        assert batch[k] == pytest.approx(concurrence(red), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 4))
def test_concurrence_local_unitary_invariance(seed, rank):
    rng = np.random.default_rng(seed)
    rho = random_two_qubit_state(rng, rank)
    u = np.kron(random_unitary(rng), random_unitary(rng))
    assert concurrence(u @ rho @ u.conj().T) == pytest.approx(concurrence(rho), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_concurrence_bounds(seed):
    c = concurrence(random_two_qubit_state(np.random.default_rng(seed), 2))
    assert 0.0 <= c <= 1.0 + 1e-12


def test_mean_photon(space4):
    rho = 0.25 * ket_to_dm(space4.ket("G", 3)) + 0.75 * ket_to_dm(space4.ket("D", 1))
    assert mean_photon(rho) == pytest.approx(1.5)
    psi = (space4.ket("G", 2) + space4.ket("E", 4)) / math.sqrt(2)
    assert mean_photon_kets(psi) == pytest.approx(3.0)
    assert mean_photon(ket_to_dm(psi)) == pytest.approx(3.0)


def test_transmission_normalization(space4):
    p = SystemParams(g=0.1, epsilon=0.01)
    rho = ket_to_dm(space4.ket("D", 1))
    assert transmission(rho, p) == pytest.approx(1e4)
    with pytest.raises(ZeroProbe):
        transmission(rho, p.replace(epsilon=0.0))


def test_top_fock_population(space4):
    rho = 0.1 * ket_to_dm(space4.ket("B", 4)) + 0.9 * ket_to_dm(space4.ket("G", 0))
    assert top_fock_population(rho) == pytest.approx(0.1)


def test_dark_projection(rng, space4):
    rho = 0.3 * ket_to_dm(space4.ket("D", 2)) + 0.7 * ket_to_dm(space4.ket("ge", 0))
    # |ge> = (|B> - |D>)/sqrt2 has singlet weight 1/2
    assert dark_projection(rho) == pytest.approx(0.3 + 0.35)
    assert dark_projection(partial_trace_cavity(rho)) == pytest.approx(0.65)


def test_purity():
    assert purity(np.eye(4) / 4) == pytest.approx(0.25)
    assert purity(ket_to_dm(ATOMIC_STATES["B"])) == pytest.approx(1.0)


def test_fidelity_commuting_closed_form(rng):
    p = rng.dirichlet(np.ones(4))
    q = rng.dirichlet(np.ones(4))
    u = np.kron(random_unitary(rng), random_unitary(rng))
    rho = u @ np.diag(p) @ u.conj().T
    sigma = u @ np.diag(q) @ u.conj().T
    assert fidelity(rho, sigma) == pytest.approx(np.sum(np.sqrt(p * q)) ** 2, abs=1e-12)


def test_fidelity_ket_shortcuts(rng):
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    rho = random_two_qubit_state(rng)
    expected = np.vdot(psi, rho @ psi).real
    assert fidelity(psi, rho) == pytest.approx(expected, abs=1e-12)
    assert fidelity(rho, psi) == pytest.approx(expected, abs=1e-12)
    assert fidelity(ket_to_dm(psi), rho) == pytest.approx(expected, abs=1e-10)
    phi = ATOMIC_STATES["B"]
    assert fidelity(psi, phi) == pytest.approx(abs(np.vdot(psi, phi)) ** 2, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_fidelity_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    a = random_two_qubit_state(rng)
    b = random_two_qubit_state(rng, 2)
    f = fidelity(a, b)
    assert 0.0 <= f <= 1.0 + 1e-10
    assert f == pytest.approx(fidelity(b, a), abs=1e-9)
    assert fidelity(a, a) == pytest.approx(1.0, abs=1e-9)


def test_partial_trace_named_examples(space4):
    np.testing.assert_allclose(partial_trace_cavity(ket_to_dm(space4.ket("D", 0))),
                               ket_to_dm(ATOMIC_STATES["D"]), atol=1e-15)
    np.testing.assert_allclose(partial_trace_cavity(np.eye(space4.dim) / space4.dim), np.eye(4) / 4, atol=1e-15)
    for p in (0.0, 0.25, 0.5, 1.0):
        rho = (1 - p) * ket_to_dm(space4.ket("G", 0)) + p * ket_to_dm(space4.ket("D", 0))
        red = partial_trace_cavity(rho)
        np.testing.assert_allclose(red, (1 - p) * ket_to_dm(ATOMIC_STATES["G"]) + p * ket_to_dm(ATOMIC_STATES["D"]),
                                   atol=1e-15)
        assert concurrence(red) == pytest.approx(p, abs=1e-12)
        assert dark_projection(rho) == pytest.approx(p, abs=1e-15)


def test_concurrence_range_many_states(rng):
    rhos = np.stack([random_two_qubit_state(rng, rank=1 + k % 4) for k in range(1000)])
    c = concurrence(rhos)
    assert c.min() >= 0.0 and c.max() <= 1.0 + 1e-12


def test_vacuum_and_linearity(rng, space4):
    p = SystemParams(g=0.1, epsilon=0.02)
    vac = ket_to_dm(space4.ket("G", 0))
    assert mean_photon(vac) == 0.0 and transmission(vac, p) == 0.0
    a = random_low_fock_state(rng, space4, 3)
    b = random_low_fock_state(rng, space4, 3)
    lam = 0.3
    assert transmission(lam * a + (1 - lam) * b, p) == pytest.approx(
        lam * transmission(a, p) + (1 - lam) * transmission(b, p), rel=1e-13)
