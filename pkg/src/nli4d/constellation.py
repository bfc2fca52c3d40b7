"""Four-dimensional constellations, their moments and Kerr coefficients.

A 4D constellation is an equiprobable alphabet of points ``(ax, ay)``, one
complex symbol per polarization.  The nonlinear-interference model needs only
a handful of moment ratios of this alphabet; they are collected in
:class:`MomentSet` and mapped to the SCI/XPM weighting factors in
:class:`KerrCoeffs`.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Mode",
    "Constellation4D",
    "MomentSet",
    "KerrCoeffs",
    "AssumptionCheck",
    "AssumptionReport",
    "ConstellationError",
    "MalformedLine",
    "TooFewPoints",
    "ZeroPowerConstellation",
    "ZeroPolarizationPower",
    "UnknownPattern",
    "parse_constellation",
    "load_constellation",
    "format_constellation",
    "normalize_power",
    "moments",
    "gaussian_moments",
    "validate_assumptions",
    "kerr_coefficients",
    "moment_table_oracle",
    "SCI_PATTERNS",
    "XPM_PATTERNS",
]


class Mode(str, enum.Enum):
    """Coefficient model.

    ``FOURD`` keeps polarization correlations, ``EGN`` assumes independent
    polarizations and ``GN`` drops every modulation-dependent correction.
    """

    FOURD = "fourd"
    EGN = "egn"
    GN = "gn"

    @classmethod
    def parse(cls, value: "Mode | str") -> "Mode":
        if isinstance(value, Mode):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown mode {value!r}; expected one of "
                + ", ".join(m.value for m in cls)
            ) from None


class ConstellationError(ValueError):
    """Base class for constellation input errors."""


class MalformedLine(ConstellationError):
    """A data line without exactly four finite numbers."""

    def __init__(self, line_no: int, reason: str = "", source: str | None = None):
        self.line_no = line_no
        self.reason = reason
        self.source = source
        where = f"{source}:{line_no}" if source else f"line {line_no}"
        msg = f"malformed constellation data at {where}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class TooFewPoints(ConstellationError):
    """Fewer than two points in a constellation."""


class ZeroPowerConstellation(ConstellationError):
    """Every point sits at the origin, so the power cannot be set."""


class ZeroPolarizationPower(ConstellationError):
    """One polarization carries no power, so the moment ratios are undefined."""

    def __init__(self, pol: str):
        self.pol = pol
        super().__init__(f"polarization {pol} has zero mean power")


class UnknownPattern(ValueError):
    """Index-coincidence pattern outside the supported tables."""


@dataclass(frozen=True)
class Constellation4D:
    """Equiprobable 4D alphabet.

    Parameters
    ----------
    points : ndarray, shape (M, 2), complex
        Column 0 holds ``ax`` and column 1 holds ``ay``.
    label : str
        Free-form name.
    """

    points: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=complex, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ConstellationError("points must have shape (M, 2)")
        if pts.shape[0] < 2:
            raise TooFewPoints(f"need at least 2 points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts.view(float))):
            raise ConstellationError("points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_real(cls, coords: np.ndarray, label: str = "") -> "Constellation4D":
        """Build from an (M, 4) array of ``(x_re, x_im, y_re, y_im)`` rows."""
        c = np.asarray(coords, dtype=float)
        if c.ndim != 2 or c.shape[1] != 4:
            raise ConstellationError("coordinates must have shape (M, 4)")
        pts = np.stack([c[:, 0] + 1j * c[:, 1], c[:, 2] + 1j * c[:, 3]], axis=1)
        return cls(pts, label)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def ax(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def ay(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def mean_power(self) -> float:
        return _mean(np.abs(self.ax) ** 2 + np.abs(self.ay) ** 2)

    def to_real(self) -> np.ndarray:
        """Return the (M, 4) real coordinate array."""
        return np.stack(
            [self.ax.real, self.ax.imag, self.ay.real, self.ay.imag], axis=1
        )

    def swap_polarizations(self) -> "Constellation4D":
        return Constellation4D(self.points[:, ::-1], self.label)


@dataclass(frozen=True)
class MomentSet:
    """Moment ratios of a constellation.

    ``phi1``..``phi5`` describe the alphabet in the channel-of-interest x
    role and ``phi6``, ``phi7`` in the interferer role.  The ``*y`` fields are
    the same quantities with the polarizations swapped.
    """

    mu2x: float
    mu2y: float
    phi1: float
    phi2: float
    phi3: float
    phi4: float
    phi5: float
    phi6: float
    phi7: float
    phi1y: float
    phi2y: float
    phi3y: float
    phi4y: float
    phi5y: float
    phi6y: float
    phi7y: float
    label: str = ""

    @property
    def x_role(self) -> tuple[float, ...]:
        return (self.phi1, self.phi2, self.phi3, self.phi4, self.phi5, self.phi6, self.phi7)

    @property
    def y_role(self) -> tuple[float, ...]:
        return (
            self.phi1y, self.phi2y, self.phi3y, self.phi4y,
            self.phi5y, self.phi6y, self.phi7y,
        )


@dataclass(frozen=True)
class KerrCoeffs:
    """SCI weights ``psi1..psi3`` and XPM weight ``phi1_factor`` per polarization role."""

    psi1: float
    psi2: float
    psi3: float
    phi1_factor: float
    psi1_y: float
    psi2_y: float
    psi3_y: float
    phi1_factor_y: float
    mode: Mode

    @property
    def psi(self) -> tuple[float, float, float]:
        return (self.psi1, self.psi2, self.psi3)

    @property
    def psi_y(self) -> tuple[float, float, float]:
        return (self.psi1_y, self.psi2_y, self.psi3_y)

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.psi1, self.psi2, self.psi3, self.phi1_factor,
            self.psi1_y, self.psi2_y, self.psi3_y, self.phi1_factor_y,
        )


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    magnitude: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.magnitude < self.threshold


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the symmetry checks the model relies on."""

    checks: tuple[AssumptionCheck, ...] = field(default_factory=tuple)
    label: str = ""

    @property
    def eligible(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> list[dict]:
        return [
            {
                "name": c.name,
                "magnitude": c.magnitude,
                "threshold": c.threshold,
                "pass": c.passed,
            }
            for c in self.checks
        ]


def _mean(values: np.ndarray) -> float:
    """Compensated mean of a real array."""
    return math.fsum(np.asarray(values, dtype=float).ravel()) / np.size(values)


def _cmean(values: np.ndarray) -> complex:
    v = np.asarray(values, dtype=complex).ravel()
    return complex(math.fsum(v.real), math.fsum(v.imag)) / v.size


_COMMENT = re.compile(r"\s*#")


def parse_constellation(text: str, label: str = "", source: str | None = None) -> Constellation4D:
    """Parse a whitespace-separated coordinate list.

    Each data line holds ``x_re x_im y_re y_im``.  Blank lines and lines
    starting with ``#`` are ignored.

    Parameters
    ----------
    text : str
        File contents.
    label : str, optional
        Name attached to the result.
    source : str, optional
        File name used in error messages.

    Returns
    -------
    Constellation4D

    Raises
    ------
    MalformedLine
        A data line does not contain exactly four finite numbers.
    TooFewPoints
        Fewer than two data lines.
    """
    rows: list[list[float]] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or _COMMENT.match(line):
            continue
        tokens = line.split()
        if len(tokens) != 4:
            raise MalformedLine(line_no, f"expected 4 fields, got {len(tokens)}", source)
        try:
            row = [float(t) for t in tokens]
        except ValueError:
            raise MalformedLine(line_no, "non-numeric token", source) from None
        if not all(math.isfinite(v) for v in row):
            raise MalformedLine(line_no, "non-finite value", source)
        rows.append(row)
    if len(rows) < 2:
        raise TooFewPoints(f"need at least 2 points, got {len(rows)}")
    return Constellation4D.from_real(np.array(rows), label)


def load_constellation(path: str | Path, label: str | None = None) -> Constellation4D:
    """Read a constellation file; the label defaults to the file stem."""
    p = Path(path)
    return parse_constellation(
        p.read_text(), label=p.stem if label is None else label, source=str(p)
    )


def format_constellation(c: Constellation4D, header: str | None = None) -> str:
    """Serialize to the coordinate-list text format."""
    lines = []
    if header:
        lines.extend("# " + h for h in header.splitlines())
    for row in c.to_real():
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def normalize_power(c: Constellation4D, P: float) -> Constellation4D:
    """Scale ``c`` so that the mean of ``|ax|^2 + |ay|^2`` equals ``P``."""
    if not (P > 0 and math.isfinite(P)):
        raise ValueError(f"power must be positive and finite, got {P!r}")
    p0 = c.mean_power
    if p0 == 0.0:
        raise ZeroPowerConstellation("all points are at the origin")
    return Constellation4D(c.points * math.sqrt(P / p0), c.label)


def _ratios(u: np.ndarray, v: np.ndarray) -> tuple[float, ...]:
    """phi1..phi7 with ``u = |a_role|^2`` and ``v = |a_other|^2``."""
    m = _mean(u)
    return (
        _mean(u**3) / m**3,
        _mean(u**2) / m**2,
        _mean(u**2 * v) / m**3,
        _mean(v**2 * u) / m**3,
        _mean(u * v) / m**2,
        _mean(u**2) / m**2,
        _mean(u * v) / m**2,
    )


def moments(c: Constellation4D) -> MomentSet:
    """Compute the moment ratios of a constellation.

    The same alphabet serves as channel of interest (``phi1``..``phi5``) and
    as interferer (``phi6``, ``phi7``).

    Raises
    ------
    ZeroPolarizationPower
        If either polarization has zero mean power.
    """
    px = np.abs(c.ax) ** 2
    py = np.abs(c.ay) ** 2
    mu2x, mu2y = _mean(px), _mean(py)
    if mu2x == 0.0:
        raise ZeroPolarizationPower("x")
    if mu2y == 0.0:
        raise ZeroPolarizationPower("y")
    rx = _ratios(px, py)
    ry = _ratios(py, px)
    return MomentSet(mu2x, mu2y, *rx, *ry, label=c.label)


def gaussian_moments(power: float = 1.0) -> MomentSet:
    """Analytic moments of independent circular Gaussian symbols per polarization."""
    half = power / 2.0
    ratios = (6.0, 2.0, 2.0, 2.0, 1.0, 2.0, 1.0)
    return MomentSet(half, half, *ratios, *ratios, label="gaussian")


def validate_assumptions(c: Constellation4D, tol: float = 1e-9) -> AssumptionReport:
    """Check the zero-mean and polarization-symmetry conditions.

    Each magnitude is normalized by ``s**(k/2)`` where ``s`` is the mean
    per-polarization power and ``k`` the order of the moment, so the
    threshold is scale free.
    """
    ax, ay = c.ax, c.ay
    s = 0.5 * c.mean_power
    if s == 0.0:
        s = 1.0

    def chk(name: str, value: complex, order: int) -> AssumptionCheck:
        return AssumptionCheck(name, float(abs(value)) / s ** (order / 2), tol)

    ax2, ay2 = np.abs(ax) ** 2, np.abs(ay) ** 2
    checks = [
        chk("E{ax}", _cmean(ax), 1),
        chk("E{ay}", _cmean(ay), 1),
        chk("E{ax^2}", _cmean(ax**2), 2),
        chk("E{ay^2}", _cmean(ay**2), 2),
        chk("E{ax ay*}", _cmean(ax * np.conj(ay)), 2),
        chk("E{ax ay}", _cmean(ax * ay), 2),
        chk("E{|ax|^2 ax}", _cmean(ax2 * ax), 3),
        chk("E{|ay|^2 ay}", _cmean(ay2 * ay), 3),
        chk("E{|ay|^2 ax}", _cmean(ay2 * ax), 3),
        chk("E{|ax|^2 ay}", _cmean(ax2 * ay), 3),
        chk("E|ax|^2 - E|ay|^2", _mean(ax2) - _mean(ay2), 2),
        chk("E|ax|^4 - E|ay|^4", _mean(ax2**2) - _mean(ay2**2), 4),
    ]
    return AssumptionReport(tuple(checks), c.label)


def _coeffs_4d(p: tuple[float, ...]) -> tuple[float, float, float, float]:
    f1, f2, f3, f4, f5, f6, f7 = p
    return (
        f1 - 12 * f2 + 24 + 2 * f3 + f4 - 12 * f5,
        5 * f2 - 15 + 5 * f5,
        f2 - 3 + f5,
        5 * f6 - 15 + 5 * f7,
    )


def _coeffs_egn(p: tuple[float, ...]) -> tuple[float, float, float, float]:
    f1, f2, _, _, _, f6, _ = p
    return (f1 - 9 * f2 + 12, 5 * f2 - 10, f2 - 2, 5 * f6 - 10)


def kerr_coefficients(m: MomentSet, mode: Mode | str = Mode.FOURD) -> KerrCoeffs:
    """Map moment ratios to the SCI weights and the XPM weight.

    Parameters
    ----------
    m : MomentSet
    mode : {"fourd", "egn", "gn"}
        ``"egn"`` assumes statistically independent polarizations and
        ``"gn"`` returns all-zero weights.
    """
    mode = Mode.parse(mode)
    if mode is Mode.GN:
        return KerrCoeffs(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, mode)
    fn = _coeffs_4d if mode is Mode.FOURD else _coeffs_egn
    x = fn(m.x_role)
    y = fn(m.y_role)
    return KerrCoeffs(x[0], x[1], x[2], x[3], y[0], y[1], y[2], y[3], mode)


# Sixth-order index-coincidence cases for
# E{a_h,y a*_k,y a_l,x a*_h',y a_k',y a*_l',x}.
SCI_PATTERNS: tuple[str, ...] = (
    "h=k=l=h'=k'=l'",
    "h=h'≠l=k=k'=l'",
    "h=k≠l=h'=k'=l'",
    "h=l'≠l=k=h'=k'",
    "k=l≠h=h'=k'=l'",
    "l=h'≠h=k=k'=l'",
    "l=l'≠h=k=h'=k'",
    "h'=k'≠h=k=l=l'",
    "k'=l'≠h=k=l=h'",
    "h=h'≠k=k'≠l=l'",
    "h=k≠l=h'≠k'=l'",
    "h=k≠l=l'≠k'=h'",
    "h=h'≠k=l≠k'=l'",
    "h=l'≠k=l≠h'=k'",
    "h=l'≠k=k'≠l=h'",
    "k=k'≠h=l=h'=l'",
)

# Fourth-order cases for E{b_h,x b*_k,x b*_h',x b_k',x}.
XPM_PATTERNS: tuple[str, ...] = ("h=k=h'=k'", "h=k≠h'=k'", "h=h'≠k=k'")

_SCI_INDICES = ("h", "k", "l", "h'", "k'", "l'")
_XPM_INDICES = ("h", "k", "h'", "k'")


def _parse_pattern(pattern: str) -> frozenset[frozenset[str]]:
    text = pattern.replace("!=", "≠").replace(" ", "").replace("’", "'")
    groups = []
    for part in text.split("≠"):
        names = [n for n in part.split("=") if n]
        if not names:
            raise UnknownPattern(pattern)
        groups.append(frozenset(names))
    seen: list[str] = [n for g in groups for n in g]
    if len(seen) != len(set(seen)):
        raise UnknownPattern(pattern)
    return frozenset(groups)


def _sci_table(c: Constellation4D) -> dict:
    ax, ay = c.ax, c.ay
    X, Y = np.abs(ax) ** 2, np.abs(ay) ** 2
    E = _cmean
    cj = np.conj
    exy = E(ay * cj(ax))   # E{a_y a_x*}
    eyx = E(cj(ay) * ax)   # E{a_y* a_x}
    rows = {
        "h=k=l=h'=k'=l'": lambda: E(X * Y**2),
        "h=h'≠l=k=k'=l'": lambda: E(Y) * E(X * Y),
        "h=k≠l=h'=k'=l'": lambda: E(Y) * E(X * Y),
        "h=l'≠l=k=h'=k'": lambda: exy * E(Y * cj(ay) * ax),
        "k=l≠h=h'=k'=l'": lambda: eyx * E(Y * ay * cj(ax)),
        "l=h'≠h=k=k'=l'": lambda: eyx * E(Y * ay * cj(ax)),
        "l=l'≠h=k=h'=k'": lambda: E(X) * E(Y**2),
        "h'=k'≠h=k=l=l'": lambda: E(Y) * E(X * Y),
        "k'=l'≠h=k=l=h'": lambda: exy * E(Y * cj(ay) * ax),
        "h=h'≠k=k'≠l=l'": lambda: E(Y) ** 2 * E(X),
        "h=k≠l=h'≠k'=l'": lambda: E(Y) * eyx * exy,
        "h=k≠l=l'≠k'=h'": lambda: E(Y) ** 2 * E(X),
        "h=h'≠k=l≠k'=l'": lambda: E(Y) * eyx * exy,
        "h=l'≠k=l≠h'=k'": lambda: E(Y) * eyx * exy,
        "h=l'≠k=k'≠l=h'": lambda: E(Y) * eyx * exy,
        "k=k'≠h=l=h'=l'": lambda: E(Y) * E(X * Y),
    }
    return {_parse_pattern(k): v for k, v in rows.items()}


def _xpm_table(c: Constellation4D) -> dict:
    B = np.abs(c.ax) ** 2
    rows = {
        "h=k=h'=k'": lambda: complex(_mean(B**2)),
        "h=k≠h'=k'": lambda: complex(_mean(B) ** 2),
        "h=h'≠k=k'": lambda: complex(_mean(B) ** 2),
    }
    return {_parse_pattern(k): v for k, v in rows.items()}


def moment_table_oracle(c: Constellation4D, pattern: str) -> complex:
    """Factored moment product for one index-coincidence case.

    Patterns over ``h, k, l, h', k', l'`` address the sixth-order SCI
    expectation ``E{a_h,y a*_k,y a_l,x a*_h',y a_k',y a*_l',x}``; patterns
    over ``h, k, h', k'`` address the fourth-order XPM expectation
    ``E{b_h,x b*_k,x b*_h',x b_k',x}``.  Groups of equal indices are
    separated by ``≠`` (``!=`` is accepted too).

    Raises
    ------
    UnknownPattern
        The pattern is not one of the tabulated cases.
    """
    key = _parse_pattern(pattern)
    names = {n for g in key for n in g}
    if names == set(_SCI_INDICES):
        table = _sci_table(c)
    elif names == set(_XPM_INDICES):
        table = _xpm_table(c)
    else:
        raise UnknownPattern(pattern)
    if key not in table:
        raise UnknownPattern(pattern)
    return complex(table[key]())
