"""Split-step Fourier simulation of dual-polarization WDM propagation.

The Manakov equation with Kerr coefficient ``(8/9) gamma`` is integrated with
a symmetric split-step scheme.  Channels use exact rectangular spectra on the
FFT grid (periodic sinc pulses), so the receiver's matched filter and
symbol-rate sampling are exact in the linear regime.

The receiver estimates the SNR from conditional means per transmitted
constellation point, which absorbs any constant nonlinear phase rotation,
and converts it to ``eta = 1 / (SNR P^2)``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import constants, fft as sfft

from .constellation import Constellation4D, normalize_power
from .link import REFERENCE_WAVELENGTH, Amplification, LinkSpec, WdmGrid

__all__ = [
    "FieldSamples",
    "SimConfig",
    "TxRecord",
    "SnrEstimate",
    "GridTooWide",
    "StepUnderflow",
    "InsufficientSymbolsPerPoint",
    "generate_wdm",
    "propagate",
    "compensate_dispersion",
    "receive",
    "matched_filter",
    "conditional_mean_snr",
    "simulate",
    "write_symbol_dump",
    "read_symbol_dump",
    "DUMP_MAGIC",
    "DUMP_VERSION",
    "NL_FACTOR",
]

NL_FACTOR = 8.0 / 9.0
MIN_SYMBOLS_PER_POINT = 20
DUMP_MAGIC = b"NLI4DSYM\0"
DUMP_VERSION = 1


class GridTooWide(ValueError):
    """The WDM comb does not fit inside the simulated bandwidth."""


class StepUnderflow(RuntimeError):
    """The adaptive step fell below the minimum step length."""


class InsufficientSymbolsPerPoint(ValueError):
    """Too few received symbols for some constellation point."""


@dataclass(frozen=True)
class FieldSamples:
    """Sampled dual-polarization field in sqrt(W)."""

    ex: np.ndarray
    ey: np.ndarray
    sample_rate: float
    center_frequency_offset: float = 0.0

    def __post_init__(self) -> None:
        if np.shape(self.ex) != np.shape(self.ey):
            raise ValueError("ex and ey must have equal lengths")

    @property
    def num_samples(self) -> int:
        return int(np.size(self.ex))

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.ex) ** 2 + np.abs(self.ey) ** 2))

    @property
    def energy(self) -> float:
        return self.mean_power * self.num_samples / self.sample_rate


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    grid : WdmGrid
        Symbol rate, spacing and per-channel powers.
    link : LinkSpec
    constellations : sequence of Constellation4D
        One alphabet per channel.
    num_symbols : int
        Symbols per channel; the simulated time window is periodic.
    guard_symbols : int, optional
        Symbols dropped at each end before estimation (default 5 %).
    oversampling : int, optional
        Samples per symbol; by default the smallest power of two covering
        twice the WDM comb width.
    max_nl_phase : float
        Largest peak nonlinear phase per step in rad.
    seed : int
    ase : bool
        Add per-span amplifier noise.
    min_step : float
        Adaptive steps shorter than this (m) raise :class:`StepUnderflow`.
    """

    grid: WdmGrid
    link: LinkSpec
    constellations: tuple[Constellation4D, ...]
    num_symbols: int = 1 << 14
    guard_symbols: int | None = None
    oversampling: int | None = None
    max_nl_phase: float = 3e-3
    seed: int = 0
    ase: bool = False
    min_step: float = 1.0

    def __post_init__(self) -> None:
        cons = tuple(self.constellations)
        if len(cons) != self.grid.num_channels:
            raise ValueError("one constellation per channel required")
        object.__setattr__(self, "constellations", cons)
        if self.guard_symbols is None:
            object.__setattr__(self, "guard_symbols", int(round(0.05 * self.num_symbols)))
        if self.num_symbols <= 2 * self.guard_symbols:
            raise ValueError("num_symbols must exceed twice the guard length")
        if not self.max_nl_phase > 0:
            raise ValueError("max_nl_phase must be positive")

    @property
    def samples_per_symbol(self) -> int:
        if self.oversampling is not None:
            return int(self.oversampling)
        width = 2 * self.grid.num_channels * self.grid.channel_spacing / self.grid.symbol_rate
        return max(2, 1 << math.ceil(math.log2(max(width, 1.0))))

    @property
    def sample_rate(self) -> float:
        return self.samples_per_symbol * self.grid.symbol_rate

    @property
    def fft_size(self) -> int:
        return self.num_symbols * self.samples_per_symbol


@dataclass(frozen=True)
class TxRecord:
    """Transmitted data of one channel."""

    n: int
    power: float
    center_frequency: float
    constellation: Constellation4D
    indices: np.ndarray
    symbols: np.ndarray


@dataclass(frozen=True)
class SnrEstimate:
    """SNR estimate of one received channel."""

    n: int
    power: float
    snr_linear: float
    conditional_means: np.ndarray
    counts: np.ndarray
    symbols: np.ndarray | None = field(default=None, repr=False)

    @property
    def snr_db(self) -> float:
        return 10 * math.log10(self.snr_linear) if self.snr_linear > 0 else -math.inf

    @property
    def eta_est(self) -> float:
        return 1.0 / (self.snr_linear * self.power**2)

    @property
    def eta_db(self) -> float:
        return 10 * math.log10(self.eta_est)


def _bin_offset(cfg: SimConfig, n: int) -> int:
    df = cfg.sample_rate / cfg.fft_size
    f = cfg.grid.center_frequency(n)
    s = f / df
    if abs(s - round(s)) > 1e-6:
        raise ValueError(
            f"channel {n} center {f:.6g} Hz is not on the FFT grid (bin spacing {df:.6g} Hz)"
        )
    return int(round(s))


def _symbol_bins(K: int) -> np.ndarray:
    return (np.fft.fftfreq(K) * K).round().astype(np.int64)


def generate_wdm(cfg: SimConfig) -> tuple[FieldSamples, list[TxRecord]]:
    """Draw symbols for every channel and build the transmitted field.

    Each channel's symbols come from the substream
    ``SeedSequence(seed, spawn_key=(n,))``.

    Raises
    ------
    GridTooWide
        If the comb does not fit inside the simulated bandwidth.
    """
    grid = cfg.grid
    fs = cfg.sample_rate
    N, K, sps = cfg.fft_size, cfg.num_symbols, cfg.samples_per_symbol
    half_span = 0.5 * (grid.num_channels - 1) * grid.channel_spacing + 0.5 * grid.symbol_rate
    if half_span > fs / 2:
        raise GridTooWide(
            f"comb half-width {half_span:.4g} Hz exceeds Nyquist frequency {fs / 2:.4g} Hz"
        )
    spec = np.zeros((2, N), dtype=complex)
    rel = _symbol_bins(K)
    records = []
    for n in range(1, grid.num_channels + 1):
        P = grid.powers[n - 1]
        c = normalize_power(cfg.constellations[n - 1], P)
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(n,)))
        idx = rng.integers(c.size, size=K)
        sym = c.points[idx]
        A = sfft.fft(sym, axis=0).T * sps
        s = _bin_offset(cfg, n)
        if K % 2 == 0:
            nyq = K // 2
            body = rel != -nyq
            np.add.at(spec, (slice(None), (s + rel[body]) % N), A[:, body])
            j = np.flatnonzero(~body)[0]
            spec[:, (s + nyq) % N] += 0.5 * A[:, j]
            spec[:, (s - nyq) % N] += 0.5 * A[:, j]
        else:
            spec[:, (s + rel) % N] += A
        records.append(TxRecord(n, P, grid.center_frequency(n), c, idx, sym))
    t = sfft.ifft(spec, axis=1)
    return FieldSamples(t[0], t[1], fs), records


def _omega(num: int, fs: float) -> np.ndarray:
    return 2 * math.pi * sfft.fftfreq(num, 1.0 / fs)


def compensate_dispersion(field: FieldSamples, beta2: float, length: float) -> FieldSamples:
    """Undo the dispersion phase accumulated over ``length``."""
    w = _omega(field.num_samples, field.sample_rate)
    H = np.exp(-0.5j * beta2 * w * w * length)
    ex = sfft.ifft(sfft.fft(field.ex) * H)
    ey = sfft.ifft(sfft.fft(field.ey) * H)
    return FieldSamples(ex, ey, field.sample_rate, field.center_frequency_offset)


def _ase_sigma(cfg: SimConfig) -> float:
    link = cfg.link
    F = 10 ** (link.noise_figure_db / 10)
    nu = constants.c / REFERENCE_WAVELENGTH
    density = (link.span_gain - 1) * F * constants.h * nu  # W/Hz, both polarizations
    return math.sqrt(density * cfg.sample_rate / 2)


def propagate(
    field: FieldSamples,
    cfg: SimConfig,
    *,
    max_nl_phase: float | None = None,
    stats: dict | None = None,
) -> FieldSamples:
    """Propagate through all spans with the adaptive symmetric split-step method.

    Each step applies half the linear operator (dispersion and loss), the
    nonlinear phase ``(8/9) gamma (|ex|^2 + |ey|^2) z_eff`` and the second
    half of the linear operator.  The step length keeps the peak nonlinear
    phase below ``max_nl_phase``.  Lumped amplifiers restore the span loss at
    the end of each span.

    Parameters
    ----------
    field : FieldSamples
    cfg : SimConfig
    max_nl_phase : float, optional
        Overrides ``cfg.max_nl_phase``.
    stats : dict, optional
        Receives ``steps`` and ``min_step``.

    Raises
    ------
    StepUnderflow
    """
    link = cfg.link
    beta2, gamma = link.fiber.beta2, link.fiber.gamma
    alpha = link.effective_alpha
    phi_max = cfg.max_nl_phase if max_nl_phase is None else max_nl_phase
    k_nl = NL_FACTOR * gamma
    w2 = _omega(field.num_samples, field.sample_rate) ** 2
    X = sfft.fft(field.ex)
    Y = sfft.fft(field.ey)
    peak = float(np.max(np.abs(field.ex) ** 2 + np.abs(field.ey) ** 2))
    ase_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0, 1)))
    n_steps = 0
    smallest = math.inf
    Ls = link.span_length

    for _ in range(link.num_spans):
        z = 0.0
        while Ls - z > 1e-9 * max(Ls, 1.0):
            remaining = Ls - z
            if k_nl > 0 and peak > 0:
                dz = min(remaining, phi_max / (k_nl * peak))
            else:
                dz = remaining
            if dz < cfg.min_step and remaining > cfg.min_step:
                raise StepUnderflow(f"adaptive step {dz:.3g} m below {cfg.min_step} m")
            H = np.exp((0.25j * beta2 * w2 - 0.25 * alpha) * dz)
            X *= H
            Y *= H
            if k_nl > 0:
                ex = sfft.ifft(X)
                ey = sfft.ifft(Y)
                p = np.abs(ex) ** 2 + np.abs(ey) ** 2
                z_eff = dz if alpha == 0 else 2 * math.sinh(0.5 * alpha * dz) / alpha
                rot = np.exp(1j * (k_nl * z_eff) * p)
                X = sfft.fft(ex * rot)
                Y = sfft.fft(ey * rot)
                peak = float(p.max()) * math.exp(-0.5 * alpha * dz)
            X *= H
            Y *= H
            z += dz
            n_steps += 1
            smallest = min(smallest, dz)
        if link.amplification is Amplification.LUMPED:
            g = math.exp(0.5 * link.fiber.alpha * Ls)
            X *= g
            Y *= g
            peak *= g * g
            if cfg.ase:
                sig = _ase_sigma(cfg) * math.sqrt(field.num_samples)
                for arr in (X, Y):
                    arr += sig * (
                        ase_rng.standard_normal(arr.size) + 1j * ase_rng.standard_normal(arr.size)
                    ) / math.sqrt(2)
    if stats is not None:
        stats["steps"] = n_steps
        stats["min_step"] = smallest
    return FieldSamples(sfft.ifft(X), sfft.ifft(Y), field.sample_rate, field.center_frequency_offset)


def conditional_mean_snr(
    rx: np.ndarray, indices: np.ndarray, num_points: int, min_count: int = MIN_SYMBOLS_PER_POINT
) -> tuple[float, np.ndarray, np.ndarray]:
    """SNR from per-point conditional means.

    ``SNR = sum_i |ybar_i|^2 / sum_i E{|Y - ybar_i|^2 | X = x_i}`` where
    ``ybar_i`` is the mean received 4D symbol given transmitted point ``i``.

    Parameters
    ----------
    rx : ndarray, shape (K, 2), complex
    indices : ndarray, shape (K,), int
    num_points : int
    min_count : int

    Returns
    -------
    snr : float
    means : ndarray, shape (num_points, 2)
    counts : ndarray, shape (num_points,)

    Raises
    ------
    InsufficientSymbolsPerPoint
    """
    idx = np.asarray(indices)
    counts = np.bincount(idx, minlength=num_points)
    if counts.min() < min_count:
        bad = int(np.argmin(counts))
        raise InsufficientSymbolsPerPoint(
            f"point {bad} received {counts[bad]} times, need {min_count}"
        )
    means = np.empty((num_points, 2), dtype=complex)
    for p in range(2):
        means[:, p] = (
            np.bincount(idx, rx[:, p].real, num_points)
            + 1j * np.bincount(idx, rx[:, p].imag, num_points)
        ) / counts
    dev = np.abs(rx - means[idx]) ** 2
    noise = np.bincount(idx, dev.sum(axis=1), num_points) / counts
    signal = (np.abs(means) ** 2).sum(axis=1)
    return float(signal.sum() / noise.sum()), means, counts


def matched_filter(field: FieldSamples, cfg: SimConfig, n: int) -> np.ndarray:
    """Recover the symbol-rate samples of channel ``n``.

    Dispersion is compensated over the full link length, the channel's
    ``num_symbols`` in-band bins are cut out (the two half-weight edge bins
    are recombined) and an inverse DFT returns the symbols.

    Returns
    -------
    ndarray, shape (num_symbols, 2), complex
    """
    K, sps, N = cfg.num_symbols, cfg.samples_per_symbol, cfg.fft_size
    w = _omega(N, cfg.sample_rate)
    H = np.exp(-0.5j * cfg.link.fiber.beta2 * w * w * cfg.link.total_length)
    s = _bin_offset(cfg, n)
    rel = _symbol_bins(K)
    rx = np.empty((K, 2), dtype=complex)
    for p, e in enumerate((field.ex, field.ey)):
        S = sfft.fft(e) * H
        Yk = S[(s + rel) % N]
        if K % 2 == 0:
            nyq = K // 2
            j = np.flatnonzero(rel == -nyq)[0]
            Yk[j] = S[(s + nyq) % N] + S[(s - nyq) % N]
        rx[:, p] = sfft.ifft(Yk) / sps
    return rx


def receive(field: FieldSamples, cfg: SimConfig, n: int, tx: TxRecord | Sequence[TxRecord]) -> SnrEstimate:
    """Demodulate channel ``n`` and estimate its SNR.

    Applies :func:`matched_filter`, drops the guard symbols and runs
    :func:`conditional_mean_snr`.
    """
    if not isinstance(tx, TxRecord):
        tx = next(r for r in tx if r.n == n)
    rx = matched_filter(field, cfg, n)
    g = cfg.guard_symbols
    sl = slice(g, cfg.num_symbols - g)
    snr_lin, means, counts = conditional_mean_snr(
        rx[sl], tx.indices[sl], tx.constellation.size
    )
    return SnrEstimate(n, tx.power, snr_lin, means, counts, rx)


def simulate(
    cfg: SimConfig,
    *,
    channels: Sequence[int] | None = None,
    max_nl_phase: float | None = None,
    stats: dict | None = None,
) -> tuple[list[SnrEstimate], list[TxRecord]]:
    """Transmit, propagate and receive; returns estimates and transmit records."""
    field0, tx = generate_wdm(cfg)
    out = propagate(field0, cfg, max_nl_phase=max_nl_phase, stats=stats)
    chans = range(1, cfg.grid.num_channels + 1) if channels is None else channels
    return [receive(out, cfg, n, tx[n - 1]) for n in chans], tx


def write_symbol_dump(
    path: str | Path, tx: Sequence[TxRecord], rx: Sequence[SnrEstimate]
) -> None:
    """Write transmitted and received symbols to a binary file.

    Layout (little-endian): the 9-byte magic ``NLI4DSYM\\0``; ``u32`` version;
    ``u32`` channel count; ``u32`` symbols per channel.  Then per channel:
    ``u32`` channel number, ``f64`` launch power in W, and two blocks of
    ``K x 4`` ``f64`` values ``(x_re, x_im, y_re, y_im)``, transmitted first
    and received second.
    """
    rx_by_n = {r.n: r for r in rx}
    K = len(tx[0].indices)
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC)
        fh.write(struct.pack("<III", DUMP_VERSION, len(tx), K))
        for rec in tx:
            est = rx_by_n[rec.n]
            fh.write(struct.pack("<Id", rec.n, rec.power))
            for block in (rec.symbols, est.symbols):
                arr = np.empty((K, 4), dtype="<f8")
                arr[:, 0], arr[:, 1] = block[:, 0].real, block[:, 0].imag
                arr[:, 2], arr[:, 3] = block[:, 1].real, block[:, 1].imag
                fh.write(arr.tobytes())


def read_symbol_dump(path: str | Path) -> dict:
    """Read a file written by :func:`write_symbol_dump`.

    Returns a dict with ``version`` and ``channels``, a list of dicts holding
    ``n``, ``power``, ``tx`` and ``rx`` (complex arrays of shape (K, 2)).
    """
    data = Path(path).read_bytes()
    if not data.startswith(DUMP_MAGIC):
        raise ValueError("not a symbol dump (bad magic)")
    off = len(DUMP_MAGIC)
    version, nch, K = struct.unpack_from("<III", data, off)
    off += 12
    if version != DUMP_VERSION:
        raise ValueError(f"unsupported dump version {version}")
    chans = []
    for _ in range(nch):
        n, P = struct.unpack_from("<Id", data, off)
        off += 12
        blocks = []
        for _ in range(2):
            arr = np.frombuffer(data, dtype="<f8", count=4 * K, offset=off).reshape(K, 4)
            off += 32 * K
            blocks.append(np.stack([arr[:, 0] + 1j * arr[:, 1], arr[:, 2] + 1j * arr[:, 3]], 1))
        chans.append({"n": n, "power": P, "tx": blocks[0], "rx": blocks[1]})
    return {"version": version, "channels": chans}
