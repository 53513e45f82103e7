"""Dense complex linear algebra helpers.

Everything here works on plain ``numpy`` arrays of ``complex128``. The
composite Hilbert spaces in this package are tiny (a few dozen states), so
dense storage is used throughout.
"""

import warnings

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-10
SOLVE_RTOL = 1e-9


class DimensionMismatch(ValueError):
    pass


class NotHermitian(ValueError):
    pass


class Singular(np.linalg.LinAlgError):
    pass


def as_matrix(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def kron(*ops):
    """Kronecker product of one or more matrices (left factor slowest)."""
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, as_matrix(op))
    return out


def adjoint(m):
    return np.conj(as_matrix(m)).T


def trace(m):
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"trace of non-square matrix {m.shape}")
    return complex(np.trace(m))


def frobenius_norm(m):
    return float(np.linalg.norm(np.asarray(m)))


def matrix_apply(m, v):
    m = as_matrix(m)
    v = np.asarray(v, dtype=complex)
    if m.shape[1] != v.shape[0]:
        raise DimensionMismatch(f"cannot apply {m.shape} to vector of length {v.shape[0]}")
    return m @ v


def hermiticity_defect(m):
    m = np.asarray(m)
    return float(np.max(np.abs(m - np.conj(m).T))) if m.size else 0.0


def hermitian_eig(m, tol=HERMITIAN_TOL):
    """Eigen-decomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with real eigenvalues in ascending
    order and orthonormal eigenvectors stored as columns.

    Raises
    ------
    NotHermitian
        If ``max|m - m^H|`` exceeds `tol`.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"eigenproblem of non-square matrix {m.shape}")
    defect = hermiticity_defect(m)
    if defect > tol:
        raise NotHermitian(f"asymmetry {defect:.3e} exceeds tolerance {tol:.1e}")
    # symmetrize so the LAPACK routine sees an exactly Hermitian input
    vals, vecs = np.linalg.eigh(0.5 * (m + np.conj(m).T))
    return vals, vecs


def linear_solve(a, b, rtol=SOLVE_RTOL):
    """Solve ``a x = b`` by LU decomposition with partial pivoting.

    Raises `Singular` when a pivot vanishes or the residual
    ``|a x - b|`` exceeds ``rtol * |b|``.
    """
    a = as_matrix(a)
    b = np.asarray(b, dtype=complex)
    if a.shape[0] != a.shape[1] or a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot solve system {a.shape} with rhs {b.shape}")
    with warnings.catch_warnings():
        # an exactly zero pivot is reported below as Singular
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    scale = max(float(np.max(np.abs(a))), 1.0)
    if pivots.min() <= np.finfo(float).eps * scale * a.shape[0]:
        raise Singular(f"zero pivot encountered (min |pivot| = {pivots.min():.3e})")
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    residual = np.linalg.norm(a @ x - b)
    if residual > rtol * max(np.linalg.norm(b), np.finfo(float).tiny):
        raise Singular(f"residual {residual:.3e} above tolerance; system is ill-conditioned")
    return x
