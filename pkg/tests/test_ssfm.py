"""Split-step simulator: waveform generation, propagation, receiver and dumps."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nli4d.formats import builtin_format
from nli4d.link import FiberSpec, LinkSpec, WdmGrid
from nli4d.ssfm import (
    DUMP_MAGIC,
    NL_FACTOR,
    FieldSamples,
    GridTooWide,
    InsufficientSymbolsPerPoint,
    SimConfig,
    StepUnderflow,
    compensate_dispersion,
    conditional_mean_snr,
    generate_wdm,
    matched_filter,
    propagate,
    read_symbol_dump,
    receive,
    simulate,
    write_symbol_dump,
)

from conftest import SYMBOL_RATE

DF = 50e9


def config(link, n_ch=1, fmt="PM-QPSK", power=1e-3, num_symbols=1 << 12, **kw):
    grid = WdmGrid.uniform(SYMBOL_RATE, DF, n_ch, power, fmt)
    c = builtin_format(fmt)
    return SimConfig(grid, link, (c,) * n_ch, num_symbols=num_symbols, **kw)


def rel_diff(a: FieldSamples, b: FieldSamples) -> float:
    num = np.sum(np.abs(a.ex - b.ex) ** 2 + np.abs(a.ey - b.ey) ** 2)
    den = np.sum(np.abs(b.ex) ** 2 + np.abs(b.ey) ** 2)
    return float(math.sqrt(num / den))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_default_oversampling_covers_twice_the_comb(desk_link):
    cfg = config(desk_link, 5)
    assert cfg.samples_per_symbol == 16  # 2 * 5 * 50 / 32 = 15.6 -> 16
    assert config(desk_link, 1).samples_per_symbol == 4
    assert cfg.guard_symbols == round(0.05 * cfg.num_symbols)
    assert cfg.fft_size == cfg.num_symbols * cfg.samples_per_symbol


def test_config_validation(desk_link):
    with pytest.raises(ValueError):
        config(desk_link, num_symbols=100, guard_symbols=50)
    with pytest.raises(ValueError):
        config(desk_link, max_nl_phase=0.0)
    with pytest.raises(ValueError):
        SimConfig(WdmGrid.uniform(SYMBOL_RATE, DF, 2, 1e-3), desk_link, (builtin_format("PM-QPSK"),))


# ---------------------------------------------------------------------------
# transmitter
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("fmt", ["PM-QPSK", "PM-16QAM", "SO-PM-QPSK"])
def test_launch_power(desk_link, fmt):
    cfg = config(desk_link, fmt=fmt, power=2e-3, num_symbols=1 << 14)
    field, _ = generate_wdm(cfg)
    assert field.mean_power == pytest.approx(2e-3, rel=5e-3)


def test_power_is_sum_over_channels(desk_link):
    cfg = config(desk_link, 3, num_symbols=1 << 12)
    field, _ = generate_wdm(cfg)
    assert field.mean_power == pytest.approx(3e-3, rel=5e-3)
    # channels occupy disjoint bins, so their powers add exactly
    f = np.fft.fftfreq(cfg.fft_size, 1 / cfg.sample_rate)
    X = np.abs(np.fft.fft(field.ex)) ** 2 + np.abs(np.fft.fft(field.ey)) ** 2
    parts = [X[np.abs(f - cfg.grid.center_frequency(n)) <= DF / 2].sum() for n in (1, 2, 3)]
    assert sum(parts) == pytest.approx(X.sum(), rel=1e-12)


def test_generation_is_deterministic(desk_link):
    cfg = config(desk_link, 3)
    a, ta = generate_wdm(cfg)
    b, tb = generate_wdm(cfg)
    assert np.array_equal(a.ex, b.ex) and np.array_equal(a.ey, b.ey)
    for r, s in zip(ta, tb):
        assert np.array_equal(r.indices, s.indices)
    c, _ = generate_wdm(config(desk_link, 3, seed=1))
    assert not np.array_equal(a.ex, c.ex)


def test_channels_draw_independent_streams(desk_link):
    _, tx = generate_wdm(config(desk_link, 3))
    assert not np.array_equal(tx[0].indices, tx[1].indices)
    # channel n's symbols do not depend on the number of channels
    _, tx5 = generate_wdm(config(desk_link, 5))
    assert np.array_equal(tx[0].indices, tx5[0].indices)


def test_two_rectangular_spectra(desk_link):
    cfg = config(desk_link, 2, num_symbols=1 << 12)
    field, _ = generate_wdm(cfg)
    f = np.fft.fftfreq(cfg.fft_size, 1 / cfg.sample_rate)
    psd = np.abs(np.fft.fft(field.ex)) ** 2 + np.abs(np.fft.fft(field.ey)) ** 2
    half = SYMBOL_RATE / 2 * (1 + 1e-9)
    band1 = np.abs(f + DF / 2) <= half
    band2 = np.abs(f - DF / 2) <= half
    outside = ~(band1 | band2)
    total = psd.sum()
    assert psd[outside].sum() <= 1e-24 * total
    assert psd[band1].sum() == pytest.approx(total / 2, rel=0.05)
    assert psd[band2].sum() == pytest.approx(total / 2, rel=0.05)
    # both bands are R wide: occupied bins span one symbol rate
    occ = f[band1 & (psd > 1e-12 * psd.max())]
    assert occ.max() - occ.min() == pytest.approx(SYMBOL_RATE, rel=1e-3)


def test_grid_too_wide(desk_link):
    with pytest.raises(GridTooWide):
        generate_wdm(config(desk_link, 3, oversampling=1))


def test_off_grid_channel(desk_link):
    grid = WdmGrid.uniform(SYMBOL_RATE, 50.3e9, 2, 1e-3)
    cfg = SimConfig(grid, desk_link, (builtin_format("PM-QPSK"),) * 2, num_symbols=1 << 10)
    with pytest.raises(ValueError):
        generate_wdm(cfg)


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

def test_linear_propagation_is_invertible(smf):
    link = LinkSpec(FiberSpec(0.0, smf.beta2, smf.alpha_db_per_km), 100e3, 3)
    cfg = config(link, 3)
    field, _ = generate_wdm(cfg)
    out = propagate(field, cfg)
    back = compensate_dispersion(out, link.fiber.beta2, link.total_length)
    assert rel_diff(back, field) < 1e-9


def test_dispersion_actually_acts(smf):
    link = LinkSpec(FiberSpec(0.0, smf.beta2, 0.2), 100e3, 1)
    cfg = config(link, 1)
    field, _ = generate_wdm(cfg)
    assert rel_diff(propagate(field, cfg), field) > 0.1


@pytest.mark.parametrize("spans", [1, 4])
def test_energy_conserved_without_loss_and_kerr(smf, spans):
    link = LinkSpec(FiberSpec(0.0, smf.beta2, 0.0), 80e3, spans)
    cfg = config(link, 2)
    field, _ = generate_wdm(cfg)
    out = propagate(field, cfg)
    assert out.energy == pytest.approx(field.energy, rel=1e-9)


@pytest.mark.parametrize("alpha_db", [0.0, 0.2])
def test_spm_phase_of_constant_envelope(alpha_db):
    gamma, P, Ls, spans = 1.3e-3, 5e-3, 60e3, 2
    link = LinkSpec(FiberSpec(gamma, 0.0, alpha_db), Ls, spans)
    cfg = config(link, 1)
    n = cfg.fft_size
    field = FieldSamples(np.full(n, math.sqrt(P), complex), np.zeros(n, complex), cfg.sample_rate)
    out = propagate(field, cfg)
    a = link.fiber.alpha
    leff = Ls if a == 0 else (1 - math.exp(-a * Ls)) / a
    want = NL_FACTOR * gamma * P * leff * spans
    phase = np.angle(out.ex / field.ex)
    assert np.allclose(phase, want, rtol=1e-9, atol=0)
    assert np.allclose(np.abs(out.ex) ** 2, P, rtol=1e-9)
    assert np.all(out.ey == 0)


def test_steps_follow_phase_budget(desk_link):
    cfg = config(desk_link, 1)
    field, _ = generate_wdm(cfg)
    s1, s2 = {}, {}
    propagate(field, cfg, stats=s1)
    propagate(field, cfg, max_nl_phase=cfg.max_nl_phase / 2, stats=s2)
    assert s2["steps"] > 1.8 * s1["steps"]


def test_step_underflow(desk_link):
    cfg = config(desk_link, 1, power=50.0)
    field, _ = generate_wdm(cfg)
    with pytest.raises(StepUnderflow):
        propagate(field, cfg)


def test_propagation_is_deterministic(desk_link):
    cfg = config(desk_link, 3, num_symbols=1 << 10, ase=True)
    a, _ = simulate(cfg)
    b, _ = simulate(cfg)
    assert [e.snr_linear for e in a] == [e.snr_linear for e in b]
    assert np.array_equal(a[1].symbols, b[1].symbols)


# ---------------------------------------------------------------------------
# receiver
# ---------------------------------------------------------------------------

def test_back_to_back_snr(smf):
    link = LinkSpec(smf, 0.0, 1)
    est, _ = simulate(config(link, 3))
    assert min(e.snr_db for e in est) > 40


def test_linear_link_snr(smf):
    link = LinkSpec(FiberSpec(0.0, smf.beta2, 0.2), 100e3, 2)
    est, _ = simulate(config(link, 3))
    assert min(e.snr_db for e in est) > 50


def test_matched_filter_recovers_symbols(smf):
    link = LinkSpec(FiberSpec(0.0, smf.beta2, 0.2), 100e3, 2)
    cfg = config(link, 3, fmt="PM-16QAM")
    field, tx = generate_wdm(cfg)
    out = propagate(field, cfg)
    for n in (1, 2, 3):
        rx = matched_filter(out, cfg, n)
        assert np.allclose(rx, tx[n - 1].symbols, atol=1e-9 * math.sqrt(1e-3))


def test_ase_lowers_snr(long_link):
    est, _ = simulate(config(long_link, 1, power=1e-4, ase=True))
    # 10 spans, NF 5 dB: ASE about -18.9 dBm, so SNR near 8.9 dB at -10 dBm
    assert est[0].snr_db == pytest.approx(8.9, abs=0.3)


@given(st.floats(-math.pi, math.pi))
def test_snr_estimate_ignores_constant_phase(theta):
    rng = np.random.default_rng(5)
    idx = rng.integers(16, size=4000)
    pts = builtin_format("PM-QPSK").points
    rx = pts[idx] + 0.1 * (rng.standard_normal((4000, 2)) + 1j * rng.standard_normal((4000, 2)))
    s0, _, _ = conditional_mean_snr(rx, idx, 16)
    s1, _, _ = conditional_mean_snr(rx * np.exp(1j * theta), idx, 16)
    assert s1 == pytest.approx(s0, rel=1e-12)


def test_snr_estimate_exact_under_quarter_turn():
    rng = np.random.default_rng(6)
    idx = rng.integers(16, size=4000)
    rx = builtin_format("SO-PM-QPSK").points[idx] + 0.2 * rng.standard_normal((4000, 2))
    assert conditional_mean_snr(rx * 1j, idx, 16)[0] == conditional_mean_snr(rx, idx, 16)[0]


def test_snr_estimator_on_known_noise():
    rng = np.random.default_rng(7)
    K = 200_000
    idx = rng.integers(16, size=K)
    pts = builtin_format("PM-QPSK").points  # 2 per polarization, 4 in total
    sigma2 = 0.04  # complex noise variance per polarization
    noise = math.sqrt(sigma2 / 2) * (rng.standard_normal((K, 2)) + 1j * rng.standard_normal((K, 2)))
    s, means, counts = conditional_mean_snr(pts[idx] + noise, idx, 16)
    assert 10 * math.log10(s) == pytest.approx(10 * math.log10(4 / (2 * sigma2)), abs=0.05)
    assert counts.sum() == K
    assert np.allclose(means, pts, atol=0.01)


def test_insufficient_symbols_per_point():
    idx = np.array([0] * 30 + [1] * 5)
    rx = np.ones((35, 2), complex)
    with pytest.raises(InsufficientSymbolsPerPoint):
        conditional_mean_snr(rx, idx, 2)


def test_eta_estimate_definition(desk_link):
    est, _ = simulate(config(desk_link, 1, num_symbols=1 << 11))
    e = est[0]
    assert e.eta_est == pytest.approx(1 / (e.snr_linear * 1e-6))
    assert e.eta_db == pytest.approx(10 * math.log10(e.eta_est))


def test_receive_accepts_record_list(desk_link):
    cfg = config(desk_link, 2, num_symbols=1 << 10)
    field, tx = generate_wdm(cfg)
    a = receive(field, cfg, 2, tx)
    b = receive(field, cfg, 2, tx[1])
    assert a.snr_linear == b.snr_linear


# ---------------------------------------------------------------------------
# symbol dump
# ---------------------------------------------------------------------------

def test_symbol_dump_roundtrip(tmp_path, desk_link):
    cfg = config(desk_link, 2, num_symbols=1 << 10)
    est, tx = simulate(cfg)
    p = tmp_path / "dump.bin"
    write_symbol_dump(p, tx, est)
    raw = p.read_bytes()
    assert raw.startswith(DUMP_MAGIC)
    d = read_symbol_dump(p)
    assert d["version"] == 1
    assert [c["n"] for c in d["channels"]] == [1, 2]
    for c, r, e in zip(d["channels"], tx, est):
        assert c["power"] == r.power
        assert np.array_equal(c["tx"], r.symbols)
        assert np.array_equal(c["rx"], e.symbols)


def test_symbol_dump_rejects_garbage(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"hello world")
    with pytest.raises(ValueError):
        read_symbol_dump(p)
