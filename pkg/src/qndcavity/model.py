"""Two atoms in a single-mode leaky cavity: Hilbert space, operators and Hamiltonians.

Basis ordering is ``atom1 (x) atom2 (x) cavity`` with the cavity Fock index
varying fastest. Single-atom states are ordered ``(|g>, |e>)``. All rates and
frequencies are in units of the cavity field decay rate ``kappa``, which is
fixed to 1.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import kron

SQRT2 = math.sqrt(2.0)

# single-qubit operators in the (|g>, |e>) basis
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)

_g = np.array([1, 0], dtype=complex)
_e = np.array([0, 1], dtype=complex)

ATOMIC_STATES = {
    "G": np.kron(_g, _g),
    "B": (np.kron(_g, _e) + np.kron(_e, _g)) / SQRT2,
    "D": (np.kron(_g, _e) - np.kron(_e, _g)) / SQRT2,
    "E": np.kron(_e, _e),
    "ge": np.kron(_g, _e),
    "eg": np.kron(_e, _g),
}


class WeakProbeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters, all in units of ``kappa``.

    ``omega`` only enters the lab-frame Hamiltonian; every dynamical quantity
    is computed in the frame rotating at the probe frequency, where it drops
    out.
    """

    g: float
    epsilon: float = 0.0
    delta_p: float = 0.0
    gamma: float = 0.0
    n_max: int = 4
    omega: float = 100.0
    kappa: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        for name in ("g", "epsilon", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if not (math.isfinite(self.delta_p) and math.isfinite(self.omega)):
            raise ValueError("delta_p and omega must be finite")
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ValueError(f"n_max must be an integer >= 2, got {self.n_max}")
        if self.g > 0 and self.epsilon > self.g:
            warnings.warn(
                f"probe epsilon={self.epsilon} exceeds coupling g={self.g}; "
                "the weak-probe picture no longer holds",
                WeakProbeWarning,
                stacklevel=3,
            )

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class HilbertSpace:
    n_max: int
    dims: tuple = field(init=False)

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be a positive integer, got {self.n_max}")
        object.__setattr__(self, "dims", (2, 2, int(self.n_max) + 1))

    @property
    def n_fock(self):
        return self.dims[2]

    @property
    def dim(self):
        return 4 * self.n_fock

    def fock(self, n):
        if not 0 <= n < self.n_fock:
            raise ValueError(f"Fock state {n} outside truncation 0..{self.n_max}")
        v = np.zeros(self.n_fock, dtype=complex)
        v[n] = 1.0
        return v

    def ket(self, atoms, n=0):
        """Product state ``|atoms> (x) |n>``; `atoms` is a label or a 4-vector."""
        if isinstance(atoms, str):
            atoms = ATOMIC_STATES[atoms]
        return np.kron(np.asarray(atoms, dtype=complex), self.fock(n))

    def cavity_op(self, op):
        return kron(I2, I2, op)

    def atom_op(self, op, j):
        if j not in (1, 2):
            raise ValueError(f"atom index must be 1 or 2, got {j}")
        ops = [I2, I2]
        ops[j - 1] = op
        return kron(ops[0], ops[1], np.eye(self.n_fock))


def build_space(params):
    n_max = params.n_max if isinstance(params, SystemParams) else params
    return HilbertSpace(int(n_max))


def _space(params, space):
    return space if space is not None else build_space(params)


def destroy(n_fock):
    return np.diag(np.sqrt(np.arange(1, n_fock)), k=1).astype(complex)


def annihilation(space):
    return space.cavity_op(destroy(space.n_fock))


def number(space):
    a = annihilation(space)
    return a.conj().T @ a


def single_atom_sigma_minus(space, j):
    return space.atom_op(SIGMA_MINUS, j)


def collective_lower(space):
    return single_atom_sigma_minus(space, 1) + single_atom_sigma_minus(space, 2)


def collective_sz(space):
    return space.atom_op(SIGMA_Z, 1) + space.atom_op(SIGMA_Z, 2)


def excitation_number(space):
    return number(space) + 0.5 * (collective_sz(space) + 2 * np.eye(space.dim))


def singlet_projector(space):
    d = ATOMIC_STATES["D"]
    return kron(np.outer(d, d.conj()), np.eye(space.n_fock))


def _coupling(params, space):
    a = annihilation(space)
    s_minus = collective_lower(space)
    return params.g * (a @ s_minus.conj().T + a.conj().T @ s_minus)


def hamiltonian_lab(params, space=None):
    """``omega a^+a + (omega/2) S_z + g (a S_+ + a^+ S_-)``, no probe."""
    space = _space(params, space)
    return params.omega * number(space) + 0.5 * params.omega * collective_sz(space) + _coupling(params, space)


def hamiltonian_rotating(params, space=None):
    """Time-independent Hamiltonian in the frame rotating at the probe frequency.

    ``-dp a^+a - (dp/2) S_z + g (a S_+ + a^+ S_-) + eps (a + a^+)``
    """
    space = _space(params, space)
    a = annihilation(space)
    dp = params.delta_p
    return (
        -dp * number(space)
        - 0.5 * dp * collective_sz(space)
        + _coupling(params, space)
        + params.epsilon * (a + a.conj().T)
    )


@dataclass(frozen=True)
class NamedState:
    label: str
    vector: np.ndarray
    energy_lab: float
    energy_rotating: float


def dressed_states(params, space=None):
    """Closed-form eigenstates of the undriven Hamiltonian in the low-excitation sector.

    Returns ``|G,0>``, ``|+>``, ``|->`` and ``|D,n>`` for ``n = 0..n_max``.
    ``energy_lab`` is the eigenvalue of `hamiltonian_lab`; ``energy_rotating``
    is the eigenvalue in the frame rotating at ``omega`` (``omega -> 0``).
    """
    space = _space(params, space)
    root = SQRT2 * params.g
    b0 = space.ket("B", 0)
    g1 = space.ket("G", 1)
    states = [
        NamedState("G,0", space.ket("G", 0), -params.omega, 0.0),
        NamedState("+", (b0 + g1) / SQRT2, root, root),
        NamedState("-", (b0 - g1) / SQRT2, -root, -root),
    ]
    states += [
        NamedState(f"D,{n}", space.ket("D", n), n * params.omega, 0.0)
        for n in range(space.n_fock)
    ]
    return states


def transition_rates(params, space=None):
    """Golden-rule cavity-decay rates ``kappa |<f|a|i>|^2`` between dressed states.

    Returns a dict keyed by ``(initial_label, final_label)`` covering every
    ordered pair of distinct dressed states; most entries are zero.
    """
    space = _space(params, space)
    a = annihilation(space)
    states = dressed_states(params, space)
    rates = {}
    for i in states:
        ai = a @ i.vector
        for f in states:
            if f.label == i.label:
                continue
            amp = np.vdot(f.vector, ai)
            rates[(i.label, f.label)] = params.kappa * float(abs(amp) ** 2)
    return rates
