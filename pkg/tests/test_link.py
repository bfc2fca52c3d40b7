"""Link model: unit conversions, loss/phase integral, kernels and the WDM grid."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import constants, integrate

from nli4d.link import (
    Amplification,
    FiberSpec,
    LinkSpec,
    PulseSpectrum,
    WdmGrid,
    array_factor,
    db_per_km_to_alpha,
    dispersion_to_beta2,
    loss_phase_integral,
    rho_s,
    rho_xp,
    span_factor,
)

from conftest import T


def quad_loss_phase(link: LinkSpec, kappa: float) -> complex:
    """Numerical integral of f(z) exp(i kappa z) span by span."""
    total = 0j
    for s in range(link.num_spans):
        z0 = s * link.span_length

        def f(z, part):
            v = link.power_profile(np.array(z))[()] * np.exp(1j * kappa * z)
            return v.real if part == 0 else v.imag

        lim = 400
        re = integrate.quad(f, z0, z0 + link.span_length, args=(0,), limit=lim, epsabs=1e-10)[0]
        im = integrate.quad(f, z0, z0 + link.span_length, args=(1,), limit=lim, epsabs=1e-10)[0]
        total += re + 1j * im
    return total


def test_dispersion_conversion():
    # D = 16.5 ps/nm/km at 1550 nm is about -21.04 ps^2/km.
    b2 = dispersion_to_beta2(16.5)
    D_si = 16.5e-12 / (1e-9 * 1e3)  # s/m^2
    assert b2 == pytest.approx(-D_si * (1550e-9) ** 2 / (2 * math.pi * constants.c), rel=1e-12)
    assert b2 * 1e27 == pytest.approx(-21.04, abs=0.01)


def test_attenuation_conversion():
    alpha = db_per_km_to_alpha(0.2)
    # 0.2 dB/km over 100 km is 20 dB of power loss.
    assert 10 * math.log10(math.exp(alpha * 100e3)) == pytest.approx(20.0, rel=1e-12)


def test_fiber_validation():
    with pytest.raises(ValueError):
        FiberSpec(-1.0, 0.0, 0.2)
    with pytest.raises(ValueError):
        FiberSpec(1e-3, 0.0, -0.1)
    with pytest.raises(ValueError):
        FiberSpec(1e-3, float("nan"), 0.2)


def test_link_validation(smf):
    with pytest.raises(ValueError):
        LinkSpec(smf, 100e3, 0)
    with pytest.raises(ValueError):
        LinkSpec(smf, -1.0, 1)
    assert LinkSpec(smf, 1.0, 1, "ideal_distributed").amplification is Amplification.IDEAL_DISTRIBUTED


def test_link_derived_quantities(long_link):
    assert long_link.total_length == 1000e3
    assert 10 * math.log10(long_link.span_gain) == pytest.approx(20.0)
    assert long_link.power_profile(np.array([0.0, 100e3]))[1] == pytest.approx(1.0)


@pytest.mark.parametrize("kappa", [0.0, 1e-9, 3e-6, 1e-4, 2 * math.pi / 100e3, 7e-3])
@pytest.mark.parametrize("fixture", ["desk_link", "short_link", "zero_disp_link"])
def test_loss_phase_integral_against_quadrature(request, fixture, kappa):
    link = request.getfixturevalue(fixture)
    got = complex(loss_phase_integral(link, kappa))
    want = quad_loss_phase(link, kappa)
    assert abs(got - want) <= 1e-7 * max(abs(want), link.span_length * 1e-3)


def test_loss_phase_at_zero_is_effective_length(long_link):
    a = long_link.fiber.alpha
    leff = (1 - math.exp(-a * 100e3)) / a
    assert complex(loss_phase_integral(long_link, 0.0)) == pytest.approx(10 * leff, rel=1e-12)


@given(st.floats(-1e-2, 1e-2), st.integers(1, 20), st.floats(1e3, 150e3))
def test_array_factor_matches_direct_sum(kappa, n, Ls):
    direct = np.sum(np.exp(1j * kappa * Ls * np.arange(n)))
    assert abs(complex(array_factor(kappa, Ls, n)) - direct) <= 1e-7 * n


@pytest.mark.parametrize("m", [1, 2, 5])
def test_array_factor_peaks(m):
    Ls, n = 100e3, 7
    kappa = 2 * math.pi * m / Ls
    for eps in (0.0, 1e-12, 1e-9):
        k = kappa * (1 + eps)
        direct = np.sum(np.exp(1j * k * Ls * np.arange(n)))
        assert abs(complex(array_factor(k, Ls, n)) - direct) < 1e-8


@given(st.floats(0.0, 1e-4), st.floats(-1e-3, 1e-3))
def test_span_factor_series_branch_is_continuous(alpha, kappa):
    Ls = 50e3
    p = complex(span_factor(alpha, kappa, Ls))
    re = integrate.quad(lambda z: math.exp(-alpha * z) * math.cos(kappa * z), 0, Ls, limit=400)[0]
    im = integrate.quad(lambda z: math.exp(-alpha * z) * math.sin(kappa * z), 0, Ls, limit=400)[0]
    assert abs(p - complex(re, im)) <= 1e-9 * Ls


def test_loss_phase_vectorised(desk_link):
    k = np.linspace(-1e-3, 1e-3, 11)
    v = loss_phase_integral(desk_link, k)
    assert v.shape == (11,)
    assert all(v[i] == pytest.approx(complex(loss_phase_integral(desk_link, k[i]))) for i in range(11))


def test_loss_phase_conjugate_symmetry(desk_link):
    for k in (1e-6, 3e-4):
        a = complex(loss_phase_integral(desk_link, k))
        b = complex(loss_phase_integral(desk_link, -k))
        assert a == pytest.approx(b.conjugate(), rel=1e-12)


def test_pulse_spectrum():
    g = PulseSpectrum(T)
    assert g(0.0) == pytest.approx(math.sqrt(T))
    assert g(1.01 * math.pi / T) == 0.0
    assert g.energy() == pytest.approx(1.0)
    # Parseval on a fine grid.
    w = np.linspace(-math.pi / T, math.pi / T, 200001)
    assert integrate.trapezoid(g(w) ** 2, w) / (2 * math.pi) == pytest.approx(1.0, rel=1e-4)


def test_rho_support_and_value(desk_link):
    lim = math.pi / T
    assert rho_s(0.5 * lim, 0.0, 0.0, T, desk_link) != 0
    # w1 - w2 + w3 outside the band
    assert rho_s(0.9 * lim, -0.9 * lim, 0.0, T, desk_link) == 0
    v = rho_xp(0.1 * lim, 0.2 * lim, -0.3 * lim, 2 * math.pi * 50e9, T, desk_link)
    kappa = desk_link.fiber.beta2 * (0.2 * lim + 0.3 * lim + 2 * math.pi * 50e9) * (0.1 * lim)
    assert complex(v) == pytest.approx(T * T * complex(loss_phase_integral(desk_link, kappa)))


def test_wdm_grid():
    g = WdmGrid.uniform(32e9, 50e9, 5, 1e-3, "PM-16QAM")
    assert g.center_frequency(3) == 0.0
    assert g.center_frequency(1) == -100e9
    assert g.offset(1, 4) == pytest.approx(3 * 2 * math.pi * 50e9)
    assert g.total_bandwidth == pytest.approx(232e9)
    assert g.symbol_period == pytest.approx(T)
    assert g.formats == ("PM-16QAM",) * 5


def test_wdm_grid_validation():
    with pytest.raises(ValueError):
        WdmGrid(32e9, 30e9, 3)
    with pytest.raises(ValueError):
        WdmGrid(32e9, 50e9, 3, (1e-3, 1e-3))
    with pytest.raises(ValueError):
        WdmGrid(32e9, 50e9, 2, (1e-3, 0.0))
    with pytest.raises(ValueError):
        WdmGrid(0.0, 50e9, 2)
    # a single channel needs no spacing constraint
    assert WdmGrid(32e9, 1.0, 1).num_channels == 1
