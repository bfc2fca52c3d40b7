"""Coherent build-up of nonlinear noise across identical spans.

Each span contributes a complex field term; with ideal amplification the
terms add with a phase that depends on the dispersion-induced frequency
mismatch ``kappa``. Their sum is the array factor, which peaks at ``Ns``
wherever ``kappa * L`` is a multiple of ``2 pi`` and otherwise averages out.

Run:  python3 demos/02_span_coherence.py
"""

import numpy as np

from nli4d.link import FiberSpec, LinkSpec, array_factor, dispersion_to_beta2, loss_phase_integral

fiber = FiberSpec(1.3e-3, dispersion_to_beta2(16.5), 0.2)
L = 100e3
kappa = 2 * np.pi / L * np.array([0, 0.02, 0.05, 0.1, 0.3, 0.5, 0.9, 0.98, 1.0])

print("kappa*L/2pi   |AF|^2 for Ns = 1, 5, 20")
for k in kappa:
    af = [abs(array_factor(k, L, ns)) ** 2 for ns in (1, 5, 20)]
    print(f"{k * L / (2 * np.pi):9.2f}   " + "  ".join(f"{a:8.2f}" for a in af))

# The full loss/phase integral is the array factor times a single-span term,
# so it shrinks quickly once the phase mismatch outpaces the attenuation.
link = LinkSpec(fiber, L, 10)
for k in (0.0, 1e-5, 1e-4, 1e-3):
    print(f"kappa = {k:7.0e} 1/m   |integral| = {abs(loss_phase_integral(link, k)):10.1f} m")
