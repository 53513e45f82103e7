"""
Reading the atoms with a weak probe
===================================

A weak coherent probe drives the cavity at detuning ``delta_p``. If the atoms
sit in the singlet, the cavity behaves as if it were empty and transmits a
Lorentzian. If they sit in the ground state, two absorption paths interfere
and the transmission vanishes at resonance, with peaks at the dressed-state
energies ``+-sqrt(2) g``.
"""

import numpy as np

from qndcavity.experiments import default_grid, spectrum_peaks, spectrum_scan
from qndcavity.model import SystemParams

params = SystemParams(g=0.1, epsilon=0.01, n_max=4)
grid = default_grid(-0.5, 0.5, 0.005)

me = spectrum_scan(params, grid, method="master_equation", p_mixed=0.5)
lr = spectrum_scan(params, grid, method="linear_response")

print(" delta_p   T_ground   T_dark   T_mixed(P=1/2)")
for row in me[::20]:
    print(f"{row.delta_p:+7.3f}   {row.T_ground:.5f}   {row.T_dark:.5f}   {row.T_mixed:.5f}")

###############################################################################
# The master-equation spectra sit close to the closed weak-drive forms; the
# residual difference comes from the finite probe strength.

diff = max(max(abs(a.T_ground - b.T_ground), abs(a.T_dark - b.T_dark)) for a, b in zip(me, lr))
print(f"\nground-branch peaks at {np.round(spectrum_peaks(me), 4)} (sqrt(2) g = {np.sqrt(2) * params.g:.4f})")
print(f"largest master-equation vs linear-response difference: {diff:.4f}")

zero = int(np.argmin(np.abs(grid)))
print(f"at resonance: T_ground = {me[zero].T_ground:.2e}, T_dark = {me[zero].T_dark:.4f}")
