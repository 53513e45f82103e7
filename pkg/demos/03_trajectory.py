"""
A single experimental record
============================

Quantum-jump trajectories replace the density matrix with one pure state per
run, interrupted by photon escapes. Averaging many runs recovers the master
equation; a single run shows what a detector would see.
"""

import numpy as np

from qndcavity.evolution import initial_state, lindblad_spec
from qndcavity.model import SystemParams, build_space
from qndcavity.trajectories import TrajectoryConfig, click_statistics, evolve_trajectory, run_ensemble

params = SystemParams(g=0.5, epsilon=0.025)
space = build_space(params)
spec = lindblad_spec(params, space)
rho0 = initial_state(space, "ge")

# dt is chosen so that a jump is unlikely within one step
cfg = TrajectoryConfig.for_params(params, seed=3, t_end=2000.0, record_every=100.0)

rec = evolve_trajectory(spec, rho0, cfg)
print("   t     nbar        C")
for t, n, c in zip(rec.times, rec.nbar, rec.concurrence):
    print(f"{t:5.0f}   {n:.3e}   {c:.4f}")
print(f"\n{len(rec.jumps)} photons detected; first at t = "
      f"{rec.jumps[0].time:.2f}" if rec.jumps else "\nno photons detected")

###############################################################################
# The run picks a branch: a transmitting cavity (atoms in the singlet,
# concurrence 1) or a dark one (atoms in the ground state, concurrence 0).
# Over many runs the two branches are equally likely.

short = TrajectoryConfig.for_params(params, seed=3, t_end=200.0, record_every=20.0)
ens = run_ensemble(spec, rho0, short, 200, base_seed=3, workers=2)
stats = click_statistics(ens, (100.0, 200.0))
dark = np.mean(ens.per_trajectory["C"][:, -1] > 0.5)
print(f"\nfraction of runs ending in the singlet: {dark:.2f}")
print(f"click rate in [100, 200]: {stats.rate:.2e} per unit time, 95% interval "
      f"({stats.rate_ci[0]:.2e}, {stats.rate_ci[1]:.2e})")
print(f"concurrence of the averaged state at t=200: {ens.concurrence_of_mean[-1]:.3f} "
      f"+- {ens.concurrence_of_mean_stderr[-1]:.3f}")
