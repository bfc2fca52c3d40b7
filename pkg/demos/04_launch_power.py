"""Finding the best launch power.

Linear noise falls relative to the signal as power rises while nonlinear
noise grows as ``P^3``, so the SNR has a single maximum. With ``eta`` fixed
by the format and link, the optimum has a closed form, and the peak SNR
sits 1.76 dB below the ASE-limited line at that power.

Run:  python3 demos/04_launch_power.py
"""

import numpy as np

from nli4d.integrator import IntegralCache
from nli4d.link import FiberSpec, LinkSpec, WdmGrid, dispersion_to_beta2
from nli4d.nli import ChannelPlan, ase_variance, optimum_power, snr_db, total_nli

fiber = FiberSpec(1.3e-3, dispersion_to_beta2(16.5), 0.2)
link = LinkSpec(fiber, 100e3, 10, noise_figure_db=5.0)
R = 32e9
cache = IntegralCache(link, 1 / R, seed=0, budgets={"XZ": 400_000})

for fmt in ("PM-QPSK", "SO-PM-QPSK"):
    grid = WdmGrid.uniform(R, 50e9, 9, 1e-3, fmt)
    ase = ase_variance(link, grid)
    eta = total_nli(ChannelPlan.from_grid(grid), cache, link).eta
    p_opt = optimum_power(eta, ase)
    print(f"{fmt}: optimum {10 * np.log10(p_opt / 1e-3):.2f} dBm, "
          f"peak SNR {snr_db(p_opt, ase, eta * p_opt**3):.2f} dB")
    for p_dbm in np.arange(-4, 5, 2.0):
        p = 1e-3 * 10 ** (p_dbm / 10)
        print(f"   {p_dbm:+.0f} dBm  SNR {snr_db(p, ase, eta * p**3):6.2f} dB")
