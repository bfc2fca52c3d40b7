"""Nonlinear noise on the center channel of a fully loaded 80-channel link.

Ten 100 km spans of standard fiber, 32 GBd channels on a 50 GHz grid, all at
0 dBm. The integrals depend only on the link and are shared by every format,
so the loop over formats costs almost nothing once the cache is warm.
Expect about half a minute on one core.

Run:  python3 demos/03_wdm_nli_budget.py
"""

import time

from nli4d.integrator import IntegralCache
from nli4d.link import FiberSpec, LinkSpec, WdmGrid, dispersion_to_beta2
from nli4d.nli import ChannelPlan, ase_variance, to_db, total_nli

fiber = FiberSpec(1.3e-3, dispersion_to_beta2(16.5), 0.2)
link = LinkSpec(fiber, 100e3, 10, noise_figure_db=5.0)
R, spacing, n_ch = 32e9, 50e9, 80

t0 = time.perf_counter()
cache = IntegralCache(link, 1 / R, seed=0)

print(f"{'format':<14}{'mode':<8}{'eta [dB]':>10}{'SNR [dB]':>10}{'XPM share':>11}")
for fmt in ("gaussian", "PM-QPSK", "PM-16QAM", "SO-PM-QPSK", "dicyclic4_16"):
    grid = WdmGrid.uniform(R, spacing, n_ch, 1e-3, fmt)
    plan = ChannelPlan.from_grid(grid, coi=n_ch // 2)
    ase = ase_variance(link, grid)
    for mode in ("fourd", "egn"):
        r = total_nli(plan, cache, link, mode, sigma2_ase=ase)
        share = r.sigma2_xpm_total / r.sigma2_nli
        print(f"{fmt:<14}{mode:<8}{r.eta_db:>10.2f}{r.snr_db:>10.2f}{share:>10.0%}")

print(f"ASE per channel: {to_db(ase / 1e-3):.2f} dBm")
print(f"elapsed: {time.perf_counter() - t0:.1f} s")
