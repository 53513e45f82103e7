"""Lindblad dynamics for the driven two-atom cavity.

The master equation is

    drho/dt = -i[H, rho] + sum_k (r_k / 2) (2 L_k rho L_k^+ - L_k^+ L_k rho - rho L_k^+ L_k)

with the cavity channel ``L = a`` at ``r = 2 kappa`` (so the field amplitude
decays at ``kappa``) and, optionally, one ``sigma_-`` channel per atom at
``r = 2 gamma``. Superoperators act on row-major vectorized density matrices,
``vec(A rho B) = (A (x) B^T) vec(rho)``.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import model
from .model import ATOMIC_STATES, SystemParams, build_space
from .numerics import DimensionMismatch, hermiticity_defect, linear_solve
from .observables import dark_projection, top_fock_population

log = logging.getLogger(__name__)

DEFAULT_DT = 0.005
TRUNCATION_LIMIT = 1e-8
TRACE_DRIFT_LIMIT = 1e-8
SECTOR_COHERENCE_TOL = 1e-12
STEADY_RESIDUAL_TOL = 1e-8


class StepTooLarge(ValueError):
    pass


class TruncationBreach(RuntimeError):
    pass


class NumericalFailure(RuntimeError):
    pass


class InvalidState(ValueError):
    pass


class SectorLeak(ValueError):
    pass


class GammaNonzero(ValueError):
    pass


@dataclass(frozen=True)
class Channel:
    name: str
    operator: np.ndarray
    rate: float


@dataclass(frozen=True)
class LindbladSpec:
    hamiltonian: np.ndarray
    channels: tuple
    params: SystemParams = None
    space: model.HilbertSpace = None

    def __post_init__(self):
        for ch in self.channels:
            if ch.rate < 0:
                raise ValueError(f"channel {ch.name} has negative rate {ch.rate}")
            if ch.operator.shape != self.hamiltonian.shape:
                raise DimensionMismatch(f"channel {ch.name} does not match the Hamiltonian")

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    def effective_hamiltonian(self):
        """Non-Hermitian ``H - (i/2) sum_k r_k L_k^+ L_k`` used between jumps."""
        h = self.hamiltonian.astype(complex)
        for ch in self.channels:
            h = h - 0.5j * ch.rate * (ch.operator.conj().T @ ch.operator)
        return h


def lindblad_spec(params, space=None, probe=True):
    """Generator of the dynamics in the probe-rotating frame.

    With ``probe=False`` the probe amplitude is set to zero while the frame
    (and hence ``delta_p``) is kept.
    """
    space = space if space is not None else build_space(params)
    p = params if probe else params.replace(epsilon=0.0)
    channels = [Channel("cavity", model.annihilation(space), 2.0 * params.kappa)]
    if params.gamma > 0:
        channels += [
            Channel(f"atom{j}", model.single_atom_sigma_minus(space, j), 2.0 * params.gamma)
            for j in (1, 2)
        ]
    return LindbladSpec(model.hamiltonian_rotating(p, space), tuple(channels), p, space)


def liouvillian_apply(spec, rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != spec.hamiltonian.shape:
        raise DimensionMismatch(f"state shape {rho.shape} does not match generator {spec.hamiltonian.shape}")
    h = spec.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for ch in spec.channels:
        op = ch.operator
        op_dag = op.conj().T
        ldl = op_dag @ op
        out += 0.5 * ch.rate * (2.0 * op @ rho @ op_dag - ldl @ rho - rho @ ldl)
    return out


def _superoperator(h, channels):
    d = h.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op, rate in channels:
        ldl = op.conj().T @ op
        sup += 0.5 * rate * (2.0 * np.kron(op, op.conj()) - np.kron(ldl, eye) - np.kron(eye, ldl.T))
    return sup


def liouvillian_matrix(spec):
    """Dense superoperator acting on row-major ``vec(rho)``."""
    return _superoperator(spec.hamiltonian, [(ch.operator, ch.rate) for ch in spec.channels])


def ket_to_dm(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def check_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-9, pos_tol=1e-9):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidState(f"density matrix must be square, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidState("density matrix has non-finite entries")
    defect = hermiticity_defect(rho)
    if defect > herm_tol:
        raise InvalidState(f"not Hermitian (defect {defect:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise InvalidState(f"trace {tr} differs from 1")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -pos_tol:
        raise InvalidState(f"negative eigenvalue {lo:.2e}")
    return rho


# --- named states -----------------------------------------------------------


def coherent_amplitudes(alpha, n_fock):
    """Coherent-state Fock amplitudes truncated to `n_fock` levels and renormalized."""
    n = np.arange(n_fock)
    logfact = np.array([math.lgamma(k + 1) for k in n])
    amps = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * logfact) * alpha ** n
    amps = amps.astype(complex)
    return amps / np.linalg.norm(amps)


def relaxed_mixture(space, p):
    """``(1 - p)|G,0><G,0| + p|D,0><D,0|``."""
    return (1 - p) * ket_to_dm(space.ket("G", 0)) + p * ket_to_dm(space.ket("D", 0))


def initial_state(space, name):
    """Common preparations: ``'ge'`` is ``|g>_1|e>_2|0>``, ``'mixed'`` is ``(1_a/4)|0><0|``.

    Any label of `model.ATOMIC_STATES` gives that atomic state with the
    cavity in vacuum.
    """
    if name == "mixed":
        return np.kron(np.eye(4) / 4, ket_to_dm(space.fock(0)))
    if name in ATOMIC_STATES:
        return ket_to_dm(space.ket(name, 0))
    raise ValueError(f"unknown initial state {name!r}")


def cpt_state(params, space):
    """Normalized ``|G,0> - eps/(sqrt(2) g) |B,0>``, the weak-probe ground-branch state."""
    psi = space.ket("G", 0) - params.epsilon / (math.sqrt(2) * params.g) * space.ket("B", 0)
    return psi / np.linalg.norm(psi)


# --- time integration -------------------------------------------------------


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: np.ndarray
    flags: list = field(default_factory=list)
    max_trace_drift: float = 0.0

    @property
    def final(self):
        return self.states[-1]


def max_stable_dt(params):
    return 0.01 / max(params.kappa, params.g, abs(params.delta_p), params.epsilon)


def rk4_step_matrix(sup, dt):
    """One classic RK4 step for ``dx/dt = sup x`` written as a matrix.

    For a time-independent linear generator the four stages collapse to the
    degree-4 Taylor polynomial of ``exp(sup dt)``.
    """
    hl = dt * sup
    step = np.eye(sup.shape[0], dtype=complex)
    term = step
    for k in range(1, 5):
        term = term @ hl / k
        step = step + term
    return step


def _check_truncation(rho, t, flags, on_truncation):
    top = float(top_fock_population(rho))
    if top > TRUNCATION_LIMIT:
        msg = f"top Fock population {top:.2e} at t={t:g} exceeds {TRUNCATION_LIMIT:g}"
        if on_truncation == "raise":
            raise TruncationBreach(msg)
        if not flags or not flags[-1].startswith("truncation"):
            flags.append("truncation: " + msg)


def integrate(spec, rho0, t_end, dt=DEFAULT_DT, record_every=None, on_truncation="raise"):
    """Fixed-step RK4 integration of the master equation.

    Parameters
    ----------
    spec : LindbladSpec
    rho0 : array_like
        Initial density matrix.
    t_end : float
        Final time in units of ``1/kappa``.
    dt : float
        Step size; must satisfy ``dt <= 0.01 / max(kappa, g, |delta_p|, eps)``.
    record_every : float, optional
        Spacing of emitted snapshots (rounded to a multiple of `dt`). Defaults
        to about a hundred snapshots over the run.
    on_truncation : {'raise', 'flag'}
        What to do when the top Fock level holds more than 1e-8 population.

    Returns
    -------
    EvolutionResult
    """
    if spec.params is not None and dt > max_stable_dt(spec.params) * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} exceeds stability guard {max_stable_dt(spec.params):.3g}")
    rho = check_density_matrix(rho0).copy()
    d = spec.dim
    if rho.shape != (d, d):
        raise DimensionMismatch(f"initial state {rho.shape} does not match generator ({d}, {d})")
    n_steps = int(round(t_end / dt))
    if n_steps < 0 or abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a non-negative multiple of dt={dt}")
    if record_every is None:
        stride = max(1, n_steps // 100)
    else:
        stride = max(1, int(round(record_every / dt)))

    step = rk4_step_matrix(liouvillian_matrix(spec), dt)
    block = np.linalg.matrix_power(step, stride)

    flags = []
    times = [0.0]
    states = [rho.copy()]
    _check_truncation(rho, 0.0, flags, on_truncation)
    drift_max = 0.0
    done = 0
    x = rho.reshape(-1)
    while done < n_steps:
        k = min(stride, n_steps - done)
        x = (block if k == stride else np.linalg.matrix_power(step, k)) @ x
        done += k
        r = x.reshape(d, d)
        tr = np.trace(r).real
        drift = abs(tr - 1.0)
        drift_max = max(drift_max, drift)
        if drift > TRACE_DRIFT_LIMIT:
            raise NumericalFailure(f"trace drifted by {drift:.2e} at t={done * dt:g}")
        r = r / tr
        x = r.reshape(-1)
        t = done * dt
        _check_truncation(r, t, flags, on_truncation)
        times.append(t)
        states.append(r.copy())
    return EvolutionResult(np.array(times), np.array(states), flags, drift_max)


# --- steady states ----------------------------------------------------------


def sector_isometries(space):
    """Column-orthonormal maps onto the singlet ``|D>(x)cavity`` and triplet sectors."""
    nf = space.n_fock
    eye = np.eye(nf)
    singlet = np.kron(ATOMIC_STATES["D"][:, None], eye)
    triplet_atoms = np.stack([ATOMIC_STATES[k] for k in ("G", "B", "E")], axis=1)
    triplet = np.kron(triplet_atoms, eye)
    return singlet, triplet


def _sector_steady_state(spec, iso):
    h = iso.conj().T @ spec.hamiltonian @ iso
    chans = [(iso.conj().T @ ch.operator @ iso, ch.rate) for ch in spec.channels]
    m = h.shape[0]
    sup = _superoperator(h, chans)
    rhs = np.zeros(m * m, dtype=complex)
    sup[0, :] = np.eye(m).reshape(-1)
    rhs[0] = 1.0
    x = linear_solve(sup, rhs)
    r = x.reshape(m, m)
    r = 0.5 * (r + r.conj().T)
    r = r / np.trace(r).real
    return iso @ r @ iso.conj().T


def sector_steady_states(spec):
    """Steady states ``(triplet, singlet)`` of each dynamically closed sector."""
    if spec.params is not None and spec.params.gamma > 0:
        raise GammaNonzero("sectors are only conserved without atomic decay")
    if any(ch.name.startswith("atom") and ch.rate > 0 for ch in spec.channels):
        raise GammaNonzero("sectors are only conserved without atomic decay")
    singlet, triplet = sector_isometries(spec.space or build_space(spec.params))
    return _sector_steady_state(spec, triplet), _sector_steady_state(spec, singlet)


def steady_state_sectorized(spec, rho0, discard_coherences=True, on_truncation="raise"):
    """Steady state reached from `rho0` when atomic decay is absent.

    The Liouvillian has one steady state per sector; the singlet weight
    ``P = Tr[rho0 (|D><D| (x) 1)]`` is conserved, so the answer is
    ``(1 - P) rho_triplet + P rho_singlet``. Coherences between the sectors
    decay and are dropped (with a warning) unless `discard_coherences` is
    False, in which case `SectorLeak` is raised.
    """
    rho0 = check_density_matrix(rho0)
    singlet, triplet = sector_isometries(spec.space or build_space(spec.params))
    cross = np.abs(singlet.conj().T @ rho0 @ triplet).max()
    if cross > SECTOR_COHERENCE_TOL:
        if not discard_coherences:
            raise SectorLeak(f"initial state has singlet/triplet coherences up to {cross:.2e}")
        log.warning("discarding singlet/triplet coherences of size %.2e (they decay)", cross)
    p = float(dark_projection(rho0))
    rho_t, rho_s = sector_steady_states(spec)
    rho = (1 - p) * rho_t + p * rho_s
    residual = np.linalg.norm(liouvillian_apply(spec, rho))
    if residual > STEADY_RESIDUAL_TOL:
        raise NumericalFailure(f"steady-state residual {residual:.2e} above {STEADY_RESIDUAL_TOL:g}")
    _check_truncation(rho, math.inf, [], on_truncation)
    return rho


def linear_response_transmission(params, branch, delta_p):
    """Weak-drive transmission for an atomic state frozen in one branch.

    ``dark``: empty-cavity Lorentzian ``kappa^2 / (kappa^2 + dp^2)``.
    ``ground``: ``kappa^2 / (kappa^2 + (dp - 2 g^2 / dp)^2)``, zero at ``dp = 0``.
    """
    dp = np.asarray(delta_p, dtype=float)
    k2 = params.kappa ** 2
    if branch == "dark" or params.g == 0:
        if branch not in ("dark", "ground"):
            raise ValueError(f"branch must be 'dark' or 'ground', got {branch!r}")
        out = k2 / (k2 + dp ** 2)
    elif branch == "ground":
        # multiplied through by dp^2 so dp = 0 evaluates to 0
        num = k2 * dp ** 2
        out = num / (num + (dp ** 2 - 2 * params.g ** 2) ** 2)
    else:
        raise ValueError(f"branch must be 'dark' or 'ground', got {branch!r}")
    return float(out) if out.ndim == 0 else out
