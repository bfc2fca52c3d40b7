"""Per-channel NLI variance, eta and SNR assembly.

The NLI on channel ``n`` is the self-channel term plus one cross-phase term
per interferer, summed incoherently.  Contributions from channel triplets
(MCI) and the remaining cross-channel terms are not modelled.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Union

from scipy import constants

from .constellation import (
    Constellation4D,
    KerrCoeffs,
    Mode,
    MomentSet,
    gaussian_moments,
    kerr_coefficients,
    moments,
    validate_assumptions,
)
from .integrator import IntegralCache, IntegralEstimate, IntegralSet, _omega_key_value
from .link import REFERENCE_WAVELENGTH, Amplification, LinkSpec, WdmGrid

__all__ = [
    "GAUSSIAN",
    "ChannelPlan",
    "XpmTerm",
    "NliReport",
    "MissingIntegral",
    "DegenerateDenominator",
    "IneligibleFormat",
    "NegativeVarianceWarning",
    "PREFACTOR",
    "sci_variance",
    "xpm_variance",
    "total_nli",
    "nli_sweep",
    "ase_variance",
    "snr",
    "snr_db",
    "optimum_power",
    "to_db",
]

GAUSSIAN = "gaussian"
PREFACTOR = 8.0 / 81.0


class MissingIntegral(KeyError):
    """No XPM integral is available for a required offset."""

    def __init__(self, Omega: float):
        self.Omega = Omega
        super().__init__(f"no XPM integrals for Omega = {Omega:.6g} rad/s")


class DegenerateDenominator(ZeroDivisionError):
    """ASE and NLI variances are both zero."""


class IneligibleFormat(ValueError):
    """A format fails the symmetry checks the model relies on."""


class NegativeVarianceWarning(RuntimeWarning):
    """Monte-Carlo noise drove a weighted variance below zero."""


def to_db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


@dataclass(frozen=True)
class ChannelPlan:
    """Resolved WDM plan: grid, per-channel moments and the channel of interest.

    Parameters
    ----------
    grid : WdmGrid
    moments : tuple of MomentSet
        One entry per channel.
    coi : int
        Channel of interest, numbered ``1..N``.
    constellations : tuple
        Optional per-channel alphabets (``None`` for the Gaussian preset),
        needed only by the split-step simulator.
    inactive : frozenset of int
        Channels excluded from the interferer sum.
    """

    grid: WdmGrid
    moments: tuple[MomentSet, ...]
    coi: int = 1
    constellations: tuple[Constellation4D | None, ...] = ()
    inactive: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        N = self.grid.num_channels
        if len(self.moments) != N:
            raise ValueError("one MomentSet per channel required")
        if not 1 <= self.coi <= N:
            raise ValueError(f"channel of interest must lie in 1..{N}")
        if self.constellations and len(self.constellations) != N:
            raise ValueError("one constellation per channel required")

    @classmethod
    def from_grid(
        cls,
        grid: WdmGrid,
        resolver: Callable[[str], Constellation4D] | None = None,
        *,
        coi: int | None = None,
        force: bool = False,
        tol: float = 1e-9,
    ) -> "ChannelPlan":
        """Resolve the grid's format labels into moments.

        The label ``"gaussian"`` selects the analytic Gaussian preset; every
        other label goes through ``resolver`` (built-in names or file paths
        by default).  Formats failing the symmetry checks raise
        :class:`IneligibleFormat` unless ``force`` is set.
        """
        if resolver is None:
            from .formats import resolve_format as resolver
        cache: dict[str, tuple[MomentSet, Constellation4D | None]] = {}
        for label in grid.formats:
            if label in cache:
                continue
            if label.lower() == GAUSSIAN:
                cache[label] = (gaussian_moments(), None)
                continue
            c = resolver(label)
            rep = validate_assumptions(c, tol)
            if not rep.eligible and not force:
                names = ", ".join(f.name for f in rep.failures)
                raise IneligibleFormat(f"{label}: failed checks {names}")
            cache[label] = (moments(c), c)
        return cls(
            grid,
            tuple(cache[f][0] for f in grid.formats),
            coi if coi is not None else (grid.num_channels + 1) // 2,
            tuple(cache[f][1] for f in grid.formats),
        )

    def with_coi(self, n: int) -> "ChannelPlan":
        return replace(self, coi=n)

    def without_channel(self, j: int) -> "ChannelPlan":
        """Plan with interferer ``j`` switched off."""
        if j == self.coi:
            raise ValueError("cannot remove the channel of interest")
        return replace(self, inactive=self.inactive | {j})

    @property
    def powers(self) -> tuple[float, ...]:
        return self.grid.powers

    def active(self, j: int) -> bool:
        return j not in self.inactive


@dataclass(frozen=True)
class XpmTerm:
    j: int
    Omega: float
    sigma2: float
    std_err: float


@dataclass(frozen=True)
class NliReport:
    """NLI budget of one channel.

    Variances are in W; ``eta`` is ``sigma2_nli / P^3`` in 1/W^2 and
    ``eta_db`` is ``10 log10(eta * 1 W^2)``.
    """

    n: int
    power: float
    mode: Mode
    sigma2_sci: float
    sigma2_xpm_total: float
    xpm_terms: tuple[XpmTerm, ...]
    std_err: float
    sci_std_err: float
    sigma2_ase: float | None = None
    clamped: bool = False

    @property
    def sigma2_nli(self) -> float:
        return self.sigma2_sci + self.sigma2_xpm_total

    @property
    def eta(self) -> float:
        return self.sigma2_nli / self.power**3

    @property
    def eta_db(self) -> float:
        return to_db(self.eta)

    @property
    def eta_std_err_db(self) -> float:
        if self.sigma2_nli <= 0:
            return math.inf
        return 10 / math.log(10) * self.std_err / self.sigma2_nli

    @property
    def snr(self) -> float | None:
        if self.sigma2_ase is None:
            return None
        return snr(self.power, self.sigma2_ase, self.sigma2_nli)

    @property
    def snr_db(self) -> float | None:
        s = self.snr
        return None if s is None else to_db(s)

    def scaled(self, factor: float) -> "NliReport":
        """Report for all launch powers multiplied by ``factor`` (same integrals)."""
        f3 = factor**3
        return replace(
            self,
            power=self.power * factor,
            sigma2_sci=self.sigma2_sci * f3,
            sigma2_xpm_total=self.sigma2_xpm_total * f3,
            xpm_terms=tuple(
                XpmTerm(t.j, t.Omega, t.sigma2 * f3, t.std_err * f3) for t in self.xpm_terms
            ),
            std_err=self.std_err * f3,
            sci_std_err=self.sci_std_err * f3,
        )

    def with_ase(self, sigma2_ase: float | None) -> "NliReport":
        return replace(self, sigma2_ase=sigma2_ase)


def _guard(value: float, what: str) -> tuple[float, bool]:
    if value < 0:
        warnings.warn(
            f"{what} evaluated to {value:.6g} W; clamped to 0", NegativeVarianceWarning,
            stacklevel=3,
        )
        return 0.0, True
    return value, False


def _sci_parts(coeffs: KerrCoeffs, ints: IntegralSet):
    A = coeffs.psi1 + coeffs.psi1_y
    B = coeffs.psi2 + coeffs.psi2_y
    C = coeffs.psi3 + coeffs.psi3_y
    D = 6.0
    val = A * ints.S1.value + B * ints.X1.value + C * ints.X2.value + D * ints.Z1.value
    var = (
        (A * ints.S1.std_err) ** 2
        + (B * ints.X1.std_err) ** 2
        + (C * ints.X2.std_err) ** 2
        + (D * ints.Z1.std_err) ** 2
        + 2 * B * D * ints.cov_x1_z1
    )
    return val, math.sqrt(max(var, 0.0))


def sci_variance(coeffs: KerrCoeffs, ints: IntegralSet, gamma: float, P_coi: float) -> float:
    """Self-channel NLI variance in W, both polarizations.

    ``(8/81) gamma^2 P^3 T^2 sum_roles (Psi1 S1 + Psi2 X1 + Psi3 X2 + 3 Z1)``;
    the ``T^2`` converts the integrals' ``1/T^2`` normalization to watts.
    """
    val, _ = _sci_parts(coeffs, ints)
    pref = PREFACTOR * gamma**2 * P_coi**3 * ints.T**2
    return _guard(pref * val, "SCI variance")[0]


def xpm_variance(
    phi1: float,
    Xint: IntegralEstimate,
    Zint: IntegralEstimate,
    gamma: float,
    P_coi: float,
    P_int: float,
    T: float,
) -> float:
    """Cross-phase NLI variance in W from one interferer, both polarizations.

    ``2 (8/81) gamma^2 P_coi P_int^2 T^2 (Phi1 X + 6 Z)``.
    """
    pref = 2 * PREFACTOR * gamma**2 * P_coi * P_int**2 * T**2
    return _guard(pref * (phi1 * Xint.value + 6 * Zint.value), "XPM variance")[0]


def _lookup(ints, Omega):
    if isinstance(ints, IntegralCache):
        return ints.xpm(Omega), ints.integrals.xpm_cov.get(_omega_key_value(Omega), 0.0)
    key = _omega_key_value(Omega)
    if key not in ints.xpm:
        raise MissingIntegral(Omega)
    return ints.xpm[key], ints.xpm_cov.get(key, 0.0)


def total_nli(
    plan: ChannelPlan,
    ints: Union[IntegralSet, IntegralCache],
    link: LinkSpec,
    mode: Mode | str = Mode.FOURD,
    *,
    sigma2_ase: float | None = None,
) -> NliReport:
    """NLI budget of the plan's channel of interest.

    Parameters
    ----------
    plan : ChannelPlan
    ints : IntegralSet or IntegralCache
        With a plain :class:`IntegralSet` every needed offset must be
        present; a cache computes missing ones on demand.
    link : LinkSpec
        Supplies ``gamma``.
    mode : {"fourd", "egn", "gn"}
    sigma2_ase : float, optional
        ASE variance in W; enables the SNR fields.

    Raises
    ------
    MissingIntegral
    """
    mode = Mode.parse(mode)
    sci_set = ints.integrals if isinstance(ints, IntegralCache) else ints
    T = sci_set.T
    gamma = link.fiber.gamma
    n = plan.coi
    P = plan.powers[n - 1]
    coeffs = kerr_coefficients(plan.moments[n - 1], mode)
    sval, serr = _sci_parts(coeffs, sci_set)
    pref_s = PREFACTOR * gamma**2 * P**3 * T**2
    s_sci, clamped = _guard(pref_s * sval, "SCI variance")
    sci_err = pref_s * serr

    terms = []
    var = sci_err**2
    for j in range(1, plan.grid.num_channels + 1):
        if j == n or not plan.active(j):
            continue
        Omega = plan.grid.offset(n, j)
        (X, Z), cov = _lookup(ints, Omega)
        k = kerr_coefficients(plan.moments[j - 1], mode)
        phi1 = 0.5 * (k.phi1_factor + k.phi1_factor_y)
        Pj = plan.powers[j - 1]
        pref = 2 * PREFACTOR * gamma**2 * P * Pj**2 * T**2
        raw = pref * (phi1 * X.value + 6 * Z.value)
        val, c = _guard(raw, f"XPM variance from channel {j}")
        clamped = clamped or c
        err = pref * math.sqrt(
            max((phi1 * X.std_err) ** 2 + (6 * Z.std_err) ** 2 + 12 * phi1 * cov, 0.0)
        )
        var += err**2
        terms.append(XpmTerm(j, Omega, val, err))
    return NliReport(
        n=n,
        power=P,
        mode=mode,
        sigma2_sci=s_sci,
        sigma2_xpm_total=math.fsum(t.sigma2 for t in terms),
        xpm_terms=tuple(terms),
        std_err=math.sqrt(var),
        sci_std_err=sci_err,
        sigma2_ase=sigma2_ase,
        clamped=clamped,
    )


def nli_sweep(
    plan: ChannelPlan,
    cache: IntegralCache,
    link: LinkSpec,
    mode: Mode | str = Mode.FOURD,
    *,
    channels: Iterable[int] | None = None,
    sigma2_ase: float | None = None,
    workers: int = 1,
) -> list[NliReport]:
    """Reports for several channels sharing one integral cache.

    With ``workers > 1`` the rows are computed on a thread pool; the cache
    serializes insertion, and every integral depends only on the seed and
    its offset, so the output does not depend on scheduling.
    """
    N = plan.grid.num_channels
    chans = list(range(1, N + 1)) if channels is None else list(channels)
    cache.prepare([plan.grid.offset(1, N)] if N > 1 else [0.0])
    _ = cache.integrals  # computed up front so worker threads share it

    def row(n: int) -> NliReport:
        return total_nli(plan.with_coi(n), cache, link, mode, sigma2_ase=sigma2_ase)

    if workers <= 1:
        return [row(n) for n in chans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(row, chans))


def ase_variance(link: LinkSpec, grid: WdmGrid, channel: int | None = None,
                 wavelength: float = REFERENCE_WAVELENGTH) -> float:
    """Accumulated ASE power in W within one channel's matched-filter bandwidth.

    ``Ns (G - 1) F h nu R`` for dual polarization, with span gain ``G``,
    noise factor ``F`` and the symbol rate ``R`` as noise bandwidth.
    """
    if link.amplification is not Amplification.LUMPED:
        raise ValueError("ASE model requires lumped amplification")
    F = 10 ** (link.noise_figure_db / 10) if math.isfinite(link.noise_figure_db) else 0.0
    nu = constants.c / wavelength
    return link.num_spans * (link.span_gain - 1) * F * constants.h * nu * grid.symbol_rate


def snr(P: float, sigma2_ase: float, sigma2_nli: float) -> float:
    """Linear SNR ``P / (sigma2_ase + sigma2_nli)``."""
    if sigma2_ase < 0 or sigma2_nli < 0:
        raise ValueError("variances must be non-negative")
    den = sigma2_ase + sigma2_nli
    if den == 0:
        raise DegenerateDenominator("ASE and NLI variances are both zero")
    return P / den


def snr_db(P: float, sigma2_ase: float, sigma2_nli: float) -> float:
    return to_db(snr(P, sigma2_ase, sigma2_nli))


def optimum_power(eta: float, sigma2_ase: float) -> float:
    """Launch power maximizing ``P / (sigma2_ase + eta P^3)``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return (sigma2_ase / (2 * eta)) ** (1.0 / 3.0)
