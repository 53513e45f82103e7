"""Random-state generators shared by the tests."""

import numpy as np

ACCEPTANCE_LINES = []


def random_low_fock_state(rng, space, n_photons=2, rank=None):
    """Random density matrix supported on cavity Fock states below `n_photons`."""
    nf = space.n_fock
    idx = [a * nf + n for a in range(4) for n in range(n_photons)]
    k = len(idx)
    rank = rank or k
    w = rng.normal(size=(k, rank)) + 1j * rng.normal(size=(k, rank))
    small = w @ w.conj().T
    small /= np.trace(small).real
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    rho[np.ix_(idx, idx)] = small
    return rho


def random_two_qubit_state(rng, rank=4):
    w = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = w @ w.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, n=2):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
