"""Dissipative entanglement of two atoms in a leaky cavity, read out by probe transmission.

Submodules:

- ``numerics``: dense complex linear algebra helpers
- ``model``: parameters, Hilbert space, operators, Hamiltonians, dressed states
- ``evolution``: master equation, RK4 integration, sector-resolved steady states
- ``trajectories``: quantum-jump unraveling and reproducible ensembles
- ``observables``: partial trace, concurrence, photon number, transmission
- ``experiments``: spectra, the heralding protocol, timing-window advisory
"""

from .model import SystemParams, build_space
from .evolution import integrate, lindblad_spec, steady_state_sectorized
from .observables import concurrence, dark_projection, partial_trace_cavity, transmission
from .trajectories import TrajectoryConfig, evolve_trajectory, run_ensemble

__version__ = "0.1.0"
