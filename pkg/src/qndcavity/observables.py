"""Measurements on composite and two-qubit states."""

import numpy as np

from .model import ATOMIC_STATES, SIGMA_Y
from .numerics import DimensionMismatch

SIGMA_YY = np.kron(SIGMA_Y, SIGMA_Y)
NEGATIVE_CLAMP = 1e-10


class ZeroProbe(ValueError):
    pass


def _n_fock(rho):
    d = rho.shape[-1]
    if rho.shape[-2] != d or d % 4:
        raise DimensionMismatch(f"shape {rho.shape} is not a composite atom-atom-cavity operator")
    return d // 4


def partial_trace_cavity(rho):
    """Reduced 4x4 atomic state; accepts a stack ``(..., d, d)``."""
    rho = np.asarray(rho, dtype=complex)
    nf = _n_fock(rho)
    r = rho.reshape(rho.shape[:-2] + (4, nf, 4, nf))
    return np.einsum("...inkn->...ik", r)


def _wootters_from_factor(w):
    """Wootters lambdas from a factor ``W`` with ``rho = W W^+``.

    The lambdas are the singular values of the symmetric matrix
    ``W^T (sy x sy) W``, which equal the square roots of the eigenvalues of
    ``rho (sy x sy) rho* (sy x sy)`` without taking square roots of tiny,
    noise-dominated eigenvalues.
    """
    m = np.swapaxes(w, -1, -2) @ SIGMA_YY @ w
    lam = np.linalg.svd(m, compute_uv=False)
    k = lam.shape[-1]
    if k < 4:
        lam = np.concatenate([lam, np.zeros(lam.shape[:-1] + (4 - k,))], axis=-1)
    lam = lam[..., :4]
    c = lam[..., 0] - lam[..., 1] - lam[..., 2] - lam[..., 3]
    return np.maximum(c, 0.0)


def concurrence(rho):
    """Wootters concurrence of a two-qubit density matrix (or a stack of them)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != (4, 4):
        raise DimensionMismatch(f"expected a 4x4 two-qubit state, got {rho.shape}")
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    vals, vecs = np.linalg.eigh(rho)
    # tiny negative eigenvalues are numerical slack
    vals = np.where((vals < 0) & (vals > -NEGATIVE_CLAMP), 0.0, vals)
    w = vecs * np.sqrt(np.abs(vals))[..., None, :]
    return _wootters_from_factor(w)


def concurrence_of_kets(psi):
    """Concurrence of the atomic reduced state of composite kets.

    `psi` has the composite dimension on its first axis; extra trailing axes
    are treated as a batch.
    """
    psi = np.asarray(psi, dtype=complex)
    nf = psi.shape[0] // 4
    w = np.moveaxis(psi.reshape((4, nf) + psi.shape[1:]), (0, 1), (-2, -1))
    return _wootters_from_factor(w)


def concurrence_wootters_direct(rho):
    """Textbook evaluation via eigenvalues of ``rho (sy x sy) rho* (sy x sy)``.

    Kept as an independent cross-check of `concurrence`.
    """
    rho = np.asarray(rho, dtype=complex)
    r = rho @ SIGMA_YY @ rho.conj() @ SIGMA_YY
    ev = np.sort(np.real(np.linalg.eigvals(r)))[::-1]
    ev = np.where((ev < 0) & (ev > -NEGATIVE_CLAMP), 0.0, ev)
    lam = np.sqrt(np.abs(ev))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def _number_diag(n_fock):
    return np.tile(np.arange(n_fock, dtype=float), 4)


def mean_photon(rho):
    """``Tr[rho a^+a]``; accepts a stack ``(..., d, d)``."""
    rho = np.asarray(rho)
    n = _number_diag(_n_fock(rho))
    return np.real(np.einsum("...ii,i->...", rho, n))


def mean_photon_kets(psi):
    psi = np.asarray(psi)
    n = _number_diag(psi.shape[0] // 4)
    return np.einsum("i...,i->...", np.abs(psi) ** 2, n)


def transmission_from_photons(nbar, params):
    if params.epsilon == 0:
        raise ZeroProbe("normalized transmission needs a nonzero probe amplitude")
    return np.asarray(nbar) / (params.epsilon / params.kappa) ** 2


def transmission(rho, params):
    """Normalized transmission ``<a^+a> / (eps/kappa)^2``."""
    return transmission_from_photons(mean_photon(rho), params)


def top_fock_population(rho):
    rho = np.asarray(rho)
    nf = _n_fock(rho)
    diag = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
    return diag.reshape(diag.shape[:-1] + (4, nf))[..., nf - 1].sum(axis=-1)


def dark_projection(rho):
    """Weight on the atomic singlet, ``Tr[rho (|D><D| (x) 1)]``."""
    rho = np.asarray(rho)
    if rho.shape[-1] == 4:
        red = rho
    else:
        red = partial_trace_cavity(rho)
    d = ATOMIC_STATES["D"]
    return np.real(np.einsum("i,...ij,j->...", d.conj(), red, d))


def purity(rho):
    return float(np.real(np.trace(rho @ rho)))


def _psd_factor(rho, cutoff=1e-14):
    """``A`` with ``rho = A A^+``; eigenvalues below `cutoff` times the largest are dropped."""
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    keep = vals > cutoff * max(vals[-1], 0.0)
    return vecs[:, keep] * np.sqrt(vals[keep])


def fidelity(rho, sigma):
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.

    Either argument may be a ket, which takes the ``<psi|sigma|psi>`` shortcut.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.ndim == 1 and sigma.ndim == 1:
        return float(abs(np.vdot(rho, sigma)) ** 2 / (np.vdot(rho, rho).real * np.vdot(sigma, sigma).real))
    if rho.ndim == 1:
        rho, sigma = sigma, rho
    if sigma.ndim == 1:
        return float(np.real(np.vdot(sigma, rho @ sigma)) / np.vdot(sigma, sigma).real)
    # sqrt(sqrt(rho) sigma sqrt(rho)) has the singular values of A^+ B, and
    # working with factors avoids square roots of rounding-level eigenvalues
    s = np.linalg.svd(_psd_factor(rho).conj().T @ _psd_factor(sigma), compute_uv=False)
    return float(min(np.sum(s) ** 2, 1.0))
