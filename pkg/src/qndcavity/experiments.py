"""Transmission spectra, the heralded preparation protocol and the timing window."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evolution import (
    lindblad_spec,
    linear_response_transmission,
    relaxed_mixture,
    sector_steady_states,
    steady_state_sectorized,
)
from .model import ATOMIC_STATES, build_space
from .observables import concurrence, dark_projection, fidelity, partial_trace_cavity, transmission
from .trajectories import run_trajectories


@dataclass(frozen=True)
class SpectrumRow:
    delta_p: float
    T_ground: float
    T_dark: float
    T_mixed: float = None


def _me_row(params, dp, p_mixed):
    p = params.replace(delta_p=float(dp))
    rho_t, rho_s = sector_steady_states(lindblad_spec(p))
    tg = float(transmission(rho_t, p))
    td = float(transmission(rho_s, p))
    mixed = None if p_mixed is None else (1 - p_mixed) * tg + p_mixed * td
    return SpectrumRow(float(dp), tg, td, mixed)


def default_grid(lo=-0.5, hi=0.5, step=0.005):
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def spectrum_scan(params, delta_grid=None, method="master_equation", p_mixed=None, workers=1):
    """Probe transmission versus detuning for the ground and dark branches.

    ``method='master_equation'`` solves the driven steady state of each
    sector at every grid point; ``'linear_response'`` evaluates the closed
    weak-drive forms. `p_mixed`, when given, adds the transmission of the
    mixture with singlet weight `p_mixed`.
    """
    grid = default_grid() if delta_grid is None else np.asarray(delta_grid, dtype=float)
    if not np.all(np.isfinite(grid)):
        raise ValueError("detuning grid must be finite")
    if params.epsilon <= 0:
        raise ValueError("spectrum needs a nonzero probe amplitude")
    if method in ("master_equation", "me"):
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(lambda dp: _me_row(params, dp, p_mixed), grid))
        return [_me_row(params, dp, p_mixed) for dp in grid]
    if method in ("linear_response", "lr"):
        tg = linear_response_transmission(params, "ground", grid)
        td = linear_response_transmission(params, "dark", grid)
        return [
            SpectrumRow(float(d), float(a), float(b), None if p_mixed is None else (1 - p_mixed) * a + p_mixed * b)
            for d, a, b in zip(grid, tg, td)
        ]
    raise ValueError(f"unknown method {method!r}")


def spectrum_peaks(rows, column="T_ground"):
    """Detunings of local maxima of one spectrum column."""
    t = np.array([getattr(r, column) for r in rows])
    d = np.array([r.delta_p for r in rows])
    idx = [i for i in range(1, len(t) - 1) if t[i] >= t[i - 1] and t[i] > t[i + 1]]
    return d[idx]


@dataclass(frozen=True)
class ProtocolSchedule:
    """Phase durations (units of ``1/kappa``).

    The atoms relax with the probe off for `relax`, the probe is switched on
    and left to settle for `settle`, then clicks are counted for `monitor`.
    """

    relax: float
    settle: float
    monitor: float

    def __post_init__(self):
        if min(self.relax, self.settle, self.monitor) < 0:
            raise ValueError("phase durations must be non-negative")

    @property
    def total(self):
        return self.relax + self.settle + self.monitor

    @property
    def boundaries(self):
        return {
            "preparation": 0.0,
            "stabilization": (0.0, self.relax),
            "probe_on": self.relax,
            "monitoring": (self.relax + self.settle, self.total),
        }


@dataclass
class ProtocolResult:
    branch: str
    clicks: int
    heralded: bool
    post_click_fidelity: float
    times: np.ndarray
    concurrence: np.ndarray
    transmission: np.ndarray
    nbar: np.ndarray
    click_times: np.ndarray
    phase_boundaries: dict
    flags: list = field(default_factory=list)


def _atomic_dark_fidelity(psi):
    nf = psi.shape[0] // 4
    amps = ATOMIC_STATES["D"].conj() @ psi.reshape(4, nf)
    return float(np.vdot(amps, amps).real / np.vdot(psi, psi).real)


def _protocol_result(rec, schedule):
    t_lo, t_hi = schedule.boundaries["monitoring"]
    clicks = [j for j in rec.jumps if j.channel == "cavity" and t_lo <= j.time <= t_hi]
    fid = _atomic_dark_fidelity(clicks[0].state) if clicks else math.nan
    branch = "dark" if _atomic_dark_fidelity(rec.states[-1]) > 0.5 else "ground"
    return ProtocolResult(
        branch=branch,
        clicks=len(clicks),
        heralded=bool(clicks),
        post_click_fidelity=fid,
        times=rec.times,
        concurrence=rec.concurrence,
        transmission=rec.transmission,
        nbar=rec.nbar,
        click_times=np.array([j.time for j in clicks]),
        phase_boundaries=schedule.boundaries,
        flags=rec.flags,
    )


def _protocol_phases(params, schedule):
    space = build_space(params)
    off = lindblad_spec(params, space, probe=False)
    on = lindblad_spec(params, space)
    return [(off, schedule.relax), (on, schedule.settle), (on, schedule.monitor)]


def protocol_ensemble(params, rho0, schedule, cfg, n_runs, base_seed, workers=1, on_truncation="raise"):
    """`n_runs` independent protocol runs; run ``k`` uses stream ``(base_seed, k)``."""
    return run_trajectories(
        _protocol_phases(params, schedule), rho0, cfg, n_runs, base_seed, params, workers,
        transform=lambda rec: _protocol_result(rec, schedule), on_truncation=on_truncation,
    )


def protocol_run(params, rho0, schedule, cfg, on_truncation="raise"):
    """One simulated experimental run: relax, switch the probe on, then monitor.

    The run is heralded as entangled iff the detector clicks at least once in
    the monitoring window. `rho0` may be a ket or a density matrix (sampled
    per run). ``cfg.t_end`` is ignored in favour of the schedule.
    """
    return protocol_ensemble(params, rho0, schedule, cfg, 1, cfg.seed, on_truncation=on_truncation)[0]


def protocol_summary(results):
    n = len(results)
    heralded = sum(r.heralded for r in results)
    frac = heralded / n
    fids = [r.post_click_fidelity for r in results if r.heralded]
    return {
        "runs": n,
        "heralded": heralded,
        "heralded_fraction": frac,
        "binomial_stderr": math.sqrt(frac * (1 - frac) / n),
        "dark_branch_runs": sum(r.branch == "dark" for r in results),
        "ground_branch_clicks": sum(r.clicks for r in results if r.branch == "ground"),
        "min_post_click_fidelity": min(fids) if fids else math.nan,
    }


def concurrence_via_transmission(params, rho0):
    """Compare the probe transmission with the atomic concurrence.

    T is read from the driven steady state at zero detuning; C is the
    concurrence of the cavity-traced undriven steady state. Returns
    ``(T, C, |T - C|)``.
    """
    if params.gamma != 0 or params.delta_p != 0:
        raise ValueError("the transmission/concurrence identity needs gamma = 0 and delta_p = 0")
    space = build_space(params)
    driven = steady_state_sectorized(lindblad_spec(params, space), rho0)
    undriven = steady_state_sectorized(lindblad_spec(params, space, probe=False), rho0)
    t = float(transmission(driven, params))
    c = float(concurrence(partial_trace_cavity(undriven)))
    return t, c, abs(t - c)


@dataclass(frozen=True)
class ValidityReport:
    t_min: float
    t_max: float
    window_ok: bool
    ratio: float


def validity_window(params, c1=10.0, c2=1.0):
    """Monitoring window ``c1 kappa/g^2 < t < c2/gamma`` and the ratio ``g^2/(kappa gamma)``."""
    t_min = c1 * params.kappa / params.g ** 2 if params.g > 0 else math.inf
    t_max = c2 / params.gamma if params.gamma > 0 else math.inf
    ratio = params.g ** 2 / (params.kappa * params.gamma) if params.gamma > 0 else math.inf
    return ValidityReport(t_min, t_max, t_min < t_max, ratio)


def steady_report(params, rho0):
    """P, transmission, concurrence and agreement of the undriven steady state with the closed form."""
    space = build_space(params)
    p = float(dark_projection(rho0))
    undriven = steady_state_sectorized(lindblad_spec(params, space, probe=False), rho0)
    report = {
        "P": p,
        "C": float(concurrence(partial_trace_cavity(undriven))),
        "fidelity_closed_form": fidelity(undriven, relaxed_mixture(space, p)),
    }
    if params.epsilon > 0:
        driven = steady_state_sectorized(lindblad_spec(params, space), rho0)
        report["T"] = float(transmission(driven, params))
    else:
        report["T"] = None
    return report
