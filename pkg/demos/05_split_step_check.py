"""Cross-checking the model against a split-step simulation.

Five channels, 2^14 symbols each, two 100 km spans at 0 dBm. The simulation
measures each channel's nonlinear noise from the scatter of received symbols
around their conditional means; the model predicts it from the integrals.
Each simulated format takes roughly twenty seconds on one core.

Run:  python3 demos/05_split_step_check.py
"""

import numpy as np

from nli4d.formats import builtin_format
from nli4d.integrator import IntegralCache
from nli4d.link import FiberSpec, LinkSpec, WdmGrid, dispersion_to_beta2
from nli4d.nli import ChannelPlan, nli_sweep
from nli4d.ssfm import SimConfig, simulate

fiber = FiberSpec(1.3e-3, dispersion_to_beta2(16.5), 0.2)
link = LinkSpec(fiber, 100e3, 2)
R = 32e9
cache = IntegralCache(link, 1 / R, seed=0)

for fmt in ("PM-QPSK", "SO-PM-QPSK"):
    grid = WdmGrid.uniform(R, 50e9, 5, 1e-3, fmt)
    plan = ChannelPlan.from_grid(grid)
    model_4d = [r.eta_db for r in nli_sweep(plan, cache, link, "fourd")]
    model_egn = [r.eta_db for r in nli_sweep(plan, cache, link, "egn")]
    est, _ = simulate(SimConfig(grid, link, (builtin_format(fmt),) * 5, num_symbols=1 << 14))
    sim = [e.eta_db for e in est]
    print(fmt)
    print("  channel   ssfm    4D     EGN")
    for n, (s, a, b) in enumerate(zip(sim, model_4d, model_egn), 1):
        print(f"  {n:>5}  {s:6.2f}  {a:6.2f}  {b:6.2f}")
    print(f"  mean |ssfm - 4D|  = {np.mean(np.abs(np.subtract(sim, model_4d))):.2f} dB")
    print(f"  mean |ssfm - EGN| = {np.mean(np.abs(np.subtract(sim, model_egn))):.2f} dB")
