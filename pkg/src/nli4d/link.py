"""Fiber, span and WDM-grid descriptions and the first-order perturbation kernels.

All quantities are SI: seconds, hertz, metres, watts.  Engineering-unit
helpers (ps/nm/km, dB/km, GBd) live at the bottom of the module.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants

__all__ = [
    "Amplification",
    "FiberSpec",
    "LinkSpec",
    "WdmGrid",
    "PulseSpectrum",
    "loss_phase_integral",
    "span_factor",
    "array_factor",
    "rho_s",
    "rho_xp",
    "dispersion_to_beta2",
    "db_per_km_to_alpha",
    "REFERENCE_WAVELENGTH",
]

REFERENCE_WAVELENGTH = 1550e-9
_SERIES = 1e-6


class Amplification(str, enum.Enum):
    LUMPED = "lumped"
    IDEAL_DISTRIBUTED = "ideal_distributed"


def dispersion_to_beta2(D_ps_nm_km: float, wavelength: float = REFERENCE_WAVELENGTH) -> float:
    """Convert a dispersion parameter in ps/(nm km) to beta2 in s^2/m."""
    D = D_ps_nm_km * 1e-6  # s/m^2
    return -D * wavelength**2 / (2 * math.pi * constants.c)


def db_per_km_to_alpha(alpha_db_per_km: float) -> float:
    """Power attenuation coefficient in 1/m."""
    return alpha_db_per_km * math.log(10) / 10 / 1000


@dataclass(frozen=True)
class FiberSpec:
    """Fiber constants.

    Attributes
    ----------
    gamma : float
        Nonlinearity coefficient in 1/(W m).
    beta2 : float
        Group-velocity dispersion in s^2/m.
    alpha_db_per_km : float
        Attenuation in dB/km.
    """

    gamma: float
    beta2: float
    alpha_db_per_km: float

    def __post_init__(self) -> None:
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")
        if not self.alpha_db_per_km >= 0:
            raise ValueError("attenuation must be non-negative")
        if not math.isfinite(self.beta2):
            raise ValueError("beta2 must be finite")

    @property
    def alpha(self) -> float:
        return db_per_km_to_alpha(self.alpha_db_per_km)


@dataclass(frozen=True)
class LinkSpec:
    """Multi-span link made of identical spans."""

    fiber: FiberSpec
    span_length: float
    num_spans: int = 1
    amplification: Amplification = Amplification.LUMPED
    noise_figure_db: float = 5.0

    def __post_init__(self) -> None:
        if not self.span_length >= 0:
            raise ValueError("span length must be non-negative")
        if int(self.num_spans) != self.num_spans or self.num_spans < 1:
            raise ValueError("num_spans must be a positive integer")
        object.__setattr__(self, "amplification", Amplification(self.amplification))

    @property
    def total_length(self) -> float:
        return self.span_length * self.num_spans

    @property
    def span_gain(self) -> float:
        """Power gain that restores one span's loss."""
        return math.exp(self.fiber.alpha * self.span_length)

    @property
    def effective_alpha(self) -> float:
        """Loss seen by the signal: zero for ideal distributed amplification."""
        return self.fiber.alpha if self.amplification is Amplification.LUMPED else 0.0

    def with_fiber(self, **changes) -> "LinkSpec":
        return replace(self, fiber=replace(self.fiber, **changes))

    def power_profile(self, z: np.ndarray) -> np.ndarray:
        """Normalized power ``f(z)`` along the link."""
        z = np.asarray(z, dtype=float)
        if self.amplification is Amplification.IDEAL_DISTRIBUTED:
            return np.ones_like(z)
        return np.exp(-self.fiber.alpha * np.mod(z, self.span_length))


@dataclass(frozen=True)
class WdmGrid:
    """Uniform WDM grid with per-channel powers and format labels.

    Channels are numbered ``1..N``; channel ``n`` sits at
    ``(n - (N + 1) / 2) * channel_spacing`` from the grid center.
    """

    symbol_rate: float
    channel_spacing: float
    num_channels: int
    powers: tuple[float, ...] = ()
    formats: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.symbol_rate <= 0:
            raise ValueError("symbol rate must be positive")
        if self.num_channels < 1:
            raise ValueError("need at least one channel")
        if self.num_channels > 1 and self.channel_spacing < self.symbol_rate * (1 - 1e-12):
            raise ValueError("channel spacing must be at least the symbol rate")
        powers = tuple(float(p) for p in self.powers) or (1e-3,) * self.num_channels
        if len(powers) != self.num_channels:
            raise ValueError("one power per channel required")
        if any(not p > 0 for p in powers):
            raise ValueError("all channel powers must be positive")
        formats = tuple(self.formats) or ("PM-QPSK",) * self.num_channels
        if len(formats) != self.num_channels:
            raise ValueError("one format label per channel required")
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "formats", formats)

    @classmethod
    def uniform(
        cls,
        symbol_rate: float,
        channel_spacing: float,
        num_channels: int,
        power: float,
        fmt: str = "PM-QPSK",
    ) -> "WdmGrid":
        return cls(
            symbol_rate,
            channel_spacing,
            num_channels,
            (power,) * num_channels,
            (fmt,) * num_channels,
        )

    @property
    def symbol_period(self) -> float:
        return 1.0 / self.symbol_rate

    def center_frequency(self, n: int) -> float:
        return (n - (self.num_channels + 1) / 2) * self.channel_spacing

    def offset(self, n: int, j: int) -> float:
        """Angular frequency separation ``|j - n| 2 pi df`` in rad/s."""
        return abs(j - n) * 2 * math.pi * self.channel_spacing

    @property
    def total_bandwidth(self) -> float:
        return (self.num_channels - 1) * self.channel_spacing + self.symbol_rate


@dataclass(frozen=True)
class PulseSpectrum:
    """Unit-energy Nyquist pulse: ``sqrt(T)`` on ``|w| <= pi/T``."""

    T: float
    shape: str = field(default="NyquistSinc")

    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return np.where(np.abs(w) <= math.pi / self.T, math.sqrt(self.T), 0.0)

    def energy(self) -> float:
        """``(1/2pi) int |g(w)|^2 dw``; equals one by construction."""
        return (2 * math.pi / self.T) * self.T / (2 * math.pi)


def span_factor(alpha: float, kappa, span_length: float) -> np.ndarray:
    """``int_0^Ls exp((-alpha + i kappa) z) dz`` with a series branch near zero."""
    k = np.asarray(kappa, dtype=float)
    p = (alpha - 1j * k) * span_length
    small = np.abs(p) < _SERIES
    ps = np.where(small, 1.0, p)
    exact = span_length * (-np.expm1(-ps)) / ps
    series = span_length * (1 - p / 2 + p * p / 6)
    return np.where(small, series, exact)


def array_factor(kappa, span_length: float, num_spans: int) -> np.ndarray:
    """Coherent span sum ``sum_{s<Ns} exp(i kappa s Ls)``.

    Written as ``exp(i (Ns-1) y) sin(Ns y) / sin(y)`` with ``y = kappa Ls / 2``;
    near the array peaks ``y = m pi`` a series branch replaces the ratio.
    """
    k = np.asarray(kappa, dtype=float)
    n = int(num_spans)
    if n == 1:
        return np.ones_like(k, dtype=complex)
    y = 0.5 * k * span_length
    m = np.round(y / math.pi)
    r = y - m * math.pi
    sign = np.where((m * (n - 1)) % 2 == 0, 1.0, -1.0)
    small = np.abs(r) < _SERIES
    rs = np.where(small, 1.0, r)
    ratio = np.where(
        small,
        n * (1 - (n * n - 1) * r * r / 6),
        np.sin(n * rs) / np.sin(rs),
    )
    return np.exp(1j * (n - 1) * y) * sign * ratio


def loss_phase_integral(link: LinkSpec, kappa) -> np.ndarray:
    """``int_0^{Ns Ls} f(z) exp(i kappa z) dz`` in metres.

    Parameters
    ----------
    link : LinkSpec
    kappa : float or ndarray
        Phase-mismatch rate in rad/m.

    Returns
    -------
    complex or ndarray of complex
    """
    k = np.asarray(kappa, dtype=float)
    if link.amplification is Amplification.IDEAL_DISTRIBUTED:
        L = link.total_length
        x = k * L
        small = np.abs(x) < _SERIES
        xs = np.where(small, 1.0, x)
        exact = L * np.expm1(1j * xs) / (1j * xs)
        series = L * (1 + 1j * x / 2 - x * x / 6)
        out = np.where(small, series, exact)
    else:
        out = span_factor(link.fiber.alpha, k, link.span_length) * array_factor(
            k, link.span_length, link.num_spans
        )
    return out[()] if out.ndim == 0 else out


def _support(*ws, T: float) -> np.ndarray:
    lim = math.pi / T
    ok = True
    for w in ws:
        ok = ok & (np.abs(w) <= lim)
    return ok


def rho_xp(w1, w2, w3, Omega, T: float, link: LinkSpec) -> np.ndarray:
    """Cross-channel kernel for an interferer at angular offset ``Omega``.

    ``g*(w1-w2+w3) g(w1) g*(w2) g(w3)`` times the loss/phase integral at
    ``kappa = beta2 (w2 - w3 + Omega) (w2 - w1)``.
    """
    w1, w2, w3 = (np.asarray(w, dtype=float) for w in (w1, w2, w3))
    inside = _support(w1 - w2 + w3, w1, w2, w3, T=T)
    kappa = link.fiber.beta2 * (w2 - w3 + Omega) * (w2 - w1)
    val = np.where(inside, T * T * loss_phase_integral(link, kappa), 0.0)
    return val[()] if val.ndim == 0 else val


def rho_s(w1, w2, w3, T: float, link: LinkSpec) -> np.ndarray:
    """Self-channel kernel; the ``Omega = 0`` case of :func:`rho_xp`."""
    return rho_xp(w1, w2, w3, 0.0, T, link)
