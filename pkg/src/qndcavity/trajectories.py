"""Quantum-jump unraveling of the master equation.

Trajectories are propagated with the exact non-Hermitian propagator
``exp(-i H_eff dt)`` on a fixed time grid. A jump happens at the first grid
point where the squared norm of the unnormalized state falls below a uniform
random threshold; the channel is then picked with probability proportional
to ``r_k |L_k psi|^2``. Because the norm never increases between jumps, whole
recording blocks are advanced in one matrix product and only blocks that
contain a jump are bisected down to single steps.

Each trajectory ``k`` of an ensemble draws from its own Philox stream keyed
on ``(base_seed, k)``, and trajectories are processed in fixed chunks, so
results do not depend on the number of workers.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.stats

from .evolution import NumericalFailure, TRUNCATION_LIMIT, TruncationBreach
from .observables import concurrence, concurrence_of_kets, mean_photon_kets

CHUNK = 64
JACKKNIFE_GROUPS = 20
JUMP_PROB_GUARD = 0.01


class EmptyWindow(ValueError):
    pass


class Jump(NamedTuple):
    time: float
    channel: str
    state: np.ndarray  # normalized state right after the jump


def max_jump_rate(params):
    return 2 * params.kappa * params.n_max + 2 * params.gamma * 2


@dataclass(frozen=True)
class TrajectoryConfig:
    """Time grid and seed for a trajectory run.

    `record_stride` is the number of `dt` steps between stored snapshots.
    """

    seed: int
    dt: float
    t_end: float
    record_stride: int = 100

    def __post_init__(self):
        if not self.dt > 0 or not self.t_end >= 0:
            raise ValueError("need dt > 0 and t_end >= 0")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def check(self, params):
        if self.dt * max_jump_rate(params) > JUMP_PROB_GUARD * (1 + 1e-12):
            raise ValueError(
                f"dt={self.dt} too coarse: dt * max_rate must stay below {JUMP_PROB_GUARD} "
                f"(max dt {JUMP_PROB_GUARD / max_jump_rate(params):.3g})"
            )

    @classmethod
    def for_params(cls, params, seed, t_end, record_every=1.0):
        """Largest allowed `dt` that divides `record_every` evenly."""
        dt_max = JUMP_PROB_GUARD / max_jump_rate(params)
        stride = math.ceil(record_every / dt_max - 1e-9)
        return cls(seed=seed, dt=record_every / stride, t_end=t_end, record_stride=stride)


def stream(base_seed, index):
    """Counter-based generator for trajectory `index` of an ensemble."""
    key = (int(index) << 64) | (int(base_seed) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    jumps: list
    nbar: np.ndarray
    concurrence: np.ndarray
    transmission: np.ndarray
    jumps_so_far: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def jump_times(self):
        return np.array([j.time for j in self.jumps])

    def click_times(self, channel="cavity"):
        return np.array([j.time for j in self.jumps if j.channel == channel])


@dataclass
class EnsembleResult:
    n_traj: int
    times: np.ndarray
    mean: dict
    stderr: dict
    rho_mean: np.ndarray
    concurrence_of_mean: np.ndarray
    concurrence_of_mean_stderr: np.ndarray
    jumps: list
    per_trajectory: dict
    flags: list = field(default_factory=list)

    @property
    def jump_counts(self):
        return np.array([len(j) for j in self.jumps])


# --- propagation ------------------------------------------------------------


class _Phase:
    def __init__(self, spec, n_steps, dt, stride):
        self.spec = spec
        self.n_steps = n_steps
        heff = spec.effective_hamiltonian()
        n_pow = max(1, int(stride).bit_length())
        self.powers = [scipy.linalg.expm(-1j * heff * dt * (1 << j)) for j in range(n_pow)]
        self._blocks = {}
        self.heff = heff
        self.dt = dt
        self.ops = [(ch.name, ch.operator, ch.rate) for ch in spec.channels if ch.rate > 0]

    def block(self, k):
        if k not in self._blocks:
            self._blocks[k] = scipy.linalg.expm(-1j * self.heff * self.dt * k)
        return self._blocks[k]

    def advance(self, psi, m):
        j = 0
        while m:
            if m & 1:
                psi = self.powers[j] @ psi
            m >>= 1
            j += 1
        return psi


def _norm2(x):
    return float(np.vdot(x, x).real)


def _jump(phase, psi, rng):
    weights = np.array([rate * _norm2(op @ psi) for _, op, rate in phase.ops])
    total = weights.sum()
    if not total > 0:
        raise NumericalFailure("norm decayed but no jump channel is populated")
    idx = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
    idx = min(idx, len(weights) - 1)
    name, op, _ = phase.ops[idx]
    out = op @ psi
    return name, out / math.sqrt(_norm2(out))


def _refine_block(phase, psi, q, m, cand, rng, t0, dt, jumps):
    """Advance one column through `m` steps that are known to contain a jump."""
    offset = 0
    while True:
        n2 = _norm2(cand)
        if n2 > q:
            return cand / math.sqrt(n2), q / n2
        # largest pos < m whose state still lies above the threshold
        phi, pos = psi, 0
        for j in range(len(phase.powers) - 1, -1, -1):
            if pos + (1 << j) <= m - 1:
                trial = phase.powers[j] @ phi
                if _norm2(trial) > q:
                    phi, pos = trial, pos + (1 << j)
        pre = phase.powers[0] @ phi
        s = pos + 1
        name, psi = _jump(phase, pre, rng)
        offset += s
        m -= s
        jumps.append(Jump(t0 + offset * dt, name, psi.copy()))
        q = rng.random()
        if m == 0:
            return psi, q
        cand = phase.advance(psi, m)


def _sample_initial(psi0, rng):
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.ndim == 1:
        return psi0 / np.linalg.norm(psi0)
    vals, vecs = np.linalg.eigh(0.5 * (psi0 + psi0.conj().T))
    vals = np.clip(vals, 0.0, None)
    idx = int(np.searchsorted(np.cumsum(vals), rng.random() * vals.sum(), side="right"))
    return vecs[:, min(idx, len(vals) - 1)]


def _run_chunk(phases, psi0, keys, dt, stride, on_truncation):
    """Propagate the trajectories listed in `keys` side by side.

    Returns snapshot times, states ``(n_snap, d, n)``, per-trajectory jump
    lists and truncation flags.
    """
    rngs = [stream(*k) for k in keys]
    psi = np.stack([_sample_initial(psi0, r) for r in rngs], axis=1)
    q = np.array([r.random() for r in rngs])
    jumps = [[] for _ in keys]
    times = [0.0]
    snaps = [psi.copy()]
    step_count = 0
    for phase in phases:
        done = 0
        while done < phase.n_steps:
            k = min(stride, phase.n_steps - done)
            t0 = (step_count + done) * dt
            cand = phase.block(k) @ psi
            n2 = np.einsum("ij,ij->j", cand.conj(), cand).real
            hit = n2 <= q
            keep = ~hit
            psi[:, keep] = cand[:, keep] / np.sqrt(n2[keep])
            q[keep] = q[keep] / n2[keep]
            for c in np.flatnonzero(hit):
                psi[:, c], q[c] = _refine_block(phase, psi[:, c], q[c], k, cand[:, c], rngs[c], t0, dt, jumps[c])
            done += k
            times.append((step_count + done) * dt)
            snaps.append(psi.copy())
        step_count += phase.n_steps
    states = np.array(snaps)
    flags = []
    nf = states.shape[1] // 4
    top = (np.abs(states) ** 2).reshape(states.shape[0], 4, nf, -1)[:, :, nf - 1, :].sum(axis=1)
    if top.max() > TRUNCATION_LIMIT:
        msg = f"top Fock population {top.max():.2e} exceeds {TRUNCATION_LIMIT:g}"
        if on_truncation == "raise":
            raise TruncationBreach(msg)
        flags.append("truncation: " + msg)
    return np.array(times), states, jumps, flags


def _prepare(phases, cfg, params):
    cfg.check(params)
    out = []
    for spec, duration in phases:
        n = int(round(duration / cfg.dt))
        if abs(n * cfg.dt - duration) > 1e-9 * max(1.0, duration):
            raise ValueError(f"phase duration {duration} is not a multiple of dt={cfg.dt}")
        out.append(_Phase(spec, n, cfg.dt, cfg.record_stride))
    return out


def _observables(states, jumps, times, epsilon, kappa):
    nbar = mean_photon_kets(states)
    conc = concurrence_of_kets(states)
    if epsilon > 0:
        trans = nbar / (epsilon / kappa) ** 2
    else:
        trans = np.full_like(nbar, np.nan)
    jt = np.array([j.time for j in jumps])
    so_far = np.searchsorted(jt, times, side="right") if len(jt) else np.zeros(len(times), dtype=int)
    return nbar, conc, trans, so_far


def _chunks(n_traj):
    return [list(range(s, min(s + CHUNK, n_traj))) for s in range(0, n_traj, CHUNK)]


def _map(work, chunks, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(work, chunks))
    return [work(c) for c in chunks]


def run_trajectories(phases, psi0, cfg, n_traj, base_seed, params=None, workers=1, keep_states=True,
                     transform=None, on_truncation="raise"):
    """Independent trajectories through consecutive ``(spec, duration)`` phases.

    Returns one `TrajectoryRecord` per trajectory, ordered by index. `params`
    sets the step guard and the probe amplitude used for the normalized
    transmission; it defaults to the last phase's parameters. With
    ``keep_states=False`` the snapshot states are dropped to save memory;
    `transform`, if given, is applied to each record inside its chunk and
    its return value replaces the record.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    params = params or phases[-1][0].params
    prepared = _prepare(phases, cfg, params)

    def work(idx):
        keys = [(base_seed, k) for k in idx]
        times, states, jumps, flags = _run_chunk(prepared, psi0, keys, cfg.dt, cfg.record_stride, on_truncation)
        records = []
        for c in range(len(idx)):
            psi = states[:, :, c]
            obs = _observables(psi.T, jumps[c], times, params.epsilon, params.kappa)
            rec = TrajectoryRecord(times, psi if keep_states else None, jumps[c], *obs, list(flags))
            records.append(transform(rec) if transform is not None else rec)
        return records

    return [r for chunk in _map(work, _chunks(n_traj), workers) for r in chunk]


def evolve_phases(phases, psi0, cfg, params=None, on_truncation="raise"):
    """Single trajectory through consecutive ``(spec, duration)`` phases, seeded by ``cfg.seed``."""
    return run_trajectories(phases, psi0, cfg, 1, cfg.seed, params, on_truncation=on_truncation)[0]


def evolve_trajectory(spec, psi0, cfg, on_truncation="raise"):
    """One quantum-jump trajectory under a time-independent generator.

    `psi0` is a ket; a density matrix is accepted and one of its eigenvectors
    is drawn with probability equal to its eigenvalue. Deterministic for a
    given ``cfg.seed``; it draws from the same stream as trajectory 0 of
    `run_ensemble` with ``base_seed = cfg.seed`` and agrees with it up to
    rounding.
    """
    return evolve_phases([(spec, cfg.t_end)], psi0, cfg, spec.params, on_truncation)


def _group_jackknife(group_sums, group_counts):
    """Concurrence of the pooled atomic state and its delete-a-group jackknife error."""
    total = group_sums.sum(axis=0)
    n = group_counts.sum()
    full = concurrence(total / n)
    used = group_counts > 0
    g = int(used.sum())
    if g < 2:
        return full, np.zeros_like(full)
    loo = np.array([concurrence((total - group_sums[i]) / (n - group_counts[i])) for i in np.flatnonzero(used)])
    err = np.sqrt((g - 1) / g * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    return full, err


def run_ensemble_phases(phases, psi0, cfg, n_traj, base_seed, params=None, workers=1, on_truncation="raise"):
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    params = params or phases[-1][0].params
    prepared = _prepare(phases, cfg, params)
    chunks = _chunks(n_traj)
    groups = min(JACKKNIFE_GROUPS, n_traj)

    def work(idx):
        keys = [(base_seed, k) for k in idx]
        times, states, jumps, flags = _run_chunk(prepared, psi0, keys, cfg.dt, cfg.record_stride, on_truncation)
        obs = [_observables(states[:, :, c].T, jumps[c], times, params.epsilon, params.kappa) for c in range(len(idx))]
        rho_sum = np.einsum("tin,tjn->tij", states, states.conj())
        nf = states.shape[1] // 4
        psi = states.reshape(states.shape[0], 4, nf, -1)
        red = np.einsum("tanc,tbnc->ctab", psi, psi.conj())
        gsum = np.zeros((groups,) + red.shape[1:], dtype=complex)
        for c, k in enumerate(idx):
            gsum[k % groups] += red[c]
        return times, obs, rho_sum, gsum, jumps, flags

    results = _map(work, chunks, workers)

    times = results[0][0]
    rho_sum = np.zeros_like(results[0][2])
    gsum = np.zeros_like(results[0][3])
    per = {name: [] for name in ("nbar", "C", "T", "jumps")}
    jumps, flags = [], []
    for _, obs, rs, gs, js, fl in results:
        rho_sum = rho_sum + rs
        gsum = gsum + gs
        for nbar, conc, trans, so_far in obs:
            per["nbar"].append(nbar)
            per["C"].append(conc)
            per["T"].append(trans)
            per["jumps"].append(so_far)
        jumps.extend(js)
        flags.extend(fl)
    per = {k: np.array(v, dtype=float) for k, v in per.items()}
    mean = {k: v.mean(axis=0) for k, v in per.items()}
    if n_traj > 1:
        stderr = {k: v.std(axis=0, ddof=1) / math.sqrt(n_traj) for k, v in per.items()}
    else:
        stderr = {k: np.zeros_like(v[0]) for k, v in per.items()}
    counts = np.bincount(np.arange(n_traj) % groups, minlength=groups).astype(float)
    c_mean, c_err = _group_jackknife(gsum, counts)
    return EnsembleResult(
        n_traj, times, mean, stderr, rho_sum / n_traj, c_mean, c_err, jumps, per, sorted(set(flags))
    )


def run_ensemble(spec, psi0, cfg, n_traj, base_seed, workers=1, on_truncation="raise"):
    """Independent trajectories averaged into mean curves with standard errors.

    Trajectory ``k`` uses the stream keyed on ``(base_seed, k)``; the output
    is bitwise identical for any `workers`.
    """
    return run_ensemble_phases([(spec, cfg.t_end)], psi0, cfg, n_traj, base_seed, spec.params, workers, on_truncation)


# --- click statistics -------------------------------------------------------


@dataclass
class ClickStatistics:
    window: tuple
    counts: np.ndarray
    total: int
    rate: float
    rate_ci: tuple
    inter_click_times: np.ndarray
    first_click_times: np.ndarray

    @property
    def mean_count(self):
        return float(self.counts.mean())


def _click_lists(records, channel):
    if isinstance(records, EnsembleResult):
        return [np.array([j.time for j in js if j.channel == channel]) for js in records.jumps]
    out = []
    for r in records:
        if isinstance(r, TrajectoryRecord):
            out.append(r.click_times(channel))
        else:
            out.append(np.array([j[0] for j in r if j[1] == channel]))
    return out


def click_statistics(records, window, channel="cavity", confidence=0.95):
    """Photodetector clicks inside ``window = (t_start, t_stop)``.

    A click is any jump on the cavity channel. The rate is clicks per unit
    time per trajectory, with an exact (Garwood) Poisson confidence interval.
    `records` is an `EnsembleResult` or a sequence of `TrajectoryRecord` or
    ``(time, channel)`` jump lists.
    """
    t0, t1 = window
    if not t1 > t0:
        raise EmptyWindow(f"monitoring window {window} has no extent")
    lists = _click_lists(records, channel)
    if not lists:
        raise ValueError("no records given")
    inside = [c[(c >= t0) & (c <= t1)] for c in lists]
    counts = np.array([len(c) for c in inside])
    total = int(counts.sum())
    exposure = (t1 - t0) * len(inside)
    alpha = 1 - confidence
    lo = scipy.stats.chi2.ppf(alpha / 2, 2 * total) / 2 if total > 0 else 0.0
    hi = scipy.stats.chi2.ppf(1 - alpha / 2, 2 * total + 2) / 2
    inter = np.concatenate([np.diff(c) for c in inside]) if inside else np.array([])
    first = np.array([c[0] - t0 if len(c) else np.nan for c in inside])
    return ClickStatistics(
        (t0, t1), counts, total, total / exposure, (lo / exposure, hi / exposure), inter, first
    )
