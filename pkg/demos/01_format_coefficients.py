"""How much nonlinear noise does a constellation generate?

The model reduces a 4D alphabet to a handful of moment ratios. This script
prints, for every built-in format, whether the alphabet satisfies the
symmetry conditions and what XPM weight it earns under the 4D model and
under the EGN model, which treats the two polarizations as independent.
A Gaussian alphabet scores zero; more negative means less interference.

Run:  python3 demos/01_format_coefficients.py
"""

from nli4d.constellation import Mode, kerr_coefficients, moments, validate_assumptions
from nli4d.formats import available_formats, builtin_format

print(f"{'format':<14}{'size':>6}{'psi1':>8}{'psi2':>8}{'psi3':>8}{'Phi1 4D':>10}{'Phi1 EGN':>10}")
for name in available_formats():
    c = builtin_format(name)
    report = validate_assumptions(c)
    if not report.eligible:
        failed = ", ".join(chk.name for chk in report.failures)
        print(f"{name:<14}{c.size:>6}   not eligible ({failed})")
        continue
    m = moments(c)
    k4 = kerr_coefficients(m, Mode.FOURD)
    ke = kerr_coefficients(m, Mode.EGN)
    print(f"{name:<14}{c.size:>6}{k4.psi1:>8.3f}{k4.psi2:>8.3f}{k4.psi3:>8.3f}"
          f"{k4.phi1_factor:>10.3f}{ke.phi1_factor:>10.3f}")

# Formats built as a product of two identical 2D alphabets give the same
# answer under both models; formats that correlate the polarizations do not.
