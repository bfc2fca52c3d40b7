"""Built-in library of 4D modulation formats.

The coordinate files shipped in ``nli4d/data/formats`` are generated by the
builders below (see :func:`write_library`).  Files can also be addressed by
path, so any external coordinate list in the same text format works too.
"""

from __future__ import annotations

import itertools
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .constellation import (
    Constellation4D,
    format_constellation,
    load_constellation,
    parse_constellation,
)

__all__ = [
    "pm_qam",
    "set_partitioned_qam",
    "so_pm_qpsk",
    "biorthogonal",
    "tetra4_9",
    "dicyclic",
    "cell24",
    "BUILDERS",
    "available_formats",
    "builtin_format",
    "resolve_format",
    "write_library",
]

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def _levels(m: int) -> np.ndarray:
    """Odd-integer PAM levels ``-(m-1), ..., -1, 1, ..., m-1``."""
    return np.arange(-(m - 1), m, 2, dtype=float)


def pm_qam(m_per_dim: int, label: str | None = None) -> Constellation4D:
    """Polarization-multiplexed square QAM with ``m_per_dim`` levels per dimension."""
    lv = _levels(m_per_dim)
    pts = np.array(list(itertools.product(lv, repeat=4)))
    return Constellation4D.from_real(pts, label or f"PM-{m_per_dim**2}QAM")


def set_partitioned_qam(m_per_dim: int, label: str | None = None) -> Constellation4D:
    """Even-parity half of PM-QAM (sum of the four level indices is even)."""
    lv = _levels(m_per_dim)
    idx = np.array(list(itertools.product(range(m_per_dim), repeat=4)))
    keep = idx.sum(axis=1) % 2 == 0
    return Constellation4D.from_real(
        lv[idx[keep]], label or f"SP-QAM4_{int(keep.sum())}"
    )


def so_pm_qpsk(ratio: float = GOLDEN) -> Constellation4D:
    """Two-ring PM-QPSK variant.

    Points of PM-QPSK with an even number of negative coordinates keep unit
    amplitude; the odd-parity half is scaled by ``ratio``.  The golden ratio
    maximizes the minimum distance of the resulting 16-point set.
    """
    base = np.array(list(itertools.product((-1.0, 1.0), repeat=4)))
    parity = np.prod(base, axis=1)
    pts = np.where(parity[:, None] > 0, base, ratio * base)
    return Constellation4D.from_real(pts, "SO-PM-QPSK")


def biorthogonal() -> Constellation4D:
    """The 8 signed unit vectors of R^4."""
    eye = np.eye(4)
    return Constellation4D.from_real(np.vstack([eye, -eye]), "biortho4_8")


def tetra4_9() -> Constellation4D:
    """Biorthogonal set plus the origin."""
    eye = np.eye(4)
    return Constellation4D.from_real(np.vstack([np.zeros(4), eye, -eye]), "tetra4_9")


def dicyclic(n: int) -> Constellation4D:
    """``n``-PSK on one polarization with the other silent, for both polarizations."""
    ang = 2 * np.pi * np.arange(n) / n
    c, s = np.cos(ang), np.sin(ang)
    z = np.zeros(n)
    pts = np.vstack([np.stack([c, s, z, z], 1), np.stack([z, z, c, s], 1)])
    return Constellation4D.from_real(pts, f"dicyclic4_{2 * n}")


def cell24() -> Constellation4D:
    """Vertices of the 24-cell: permutations of (±2,0,0,0) and all (±1,±1,±1,±1)."""
    axes = np.vstack([2 * np.eye(4), -2 * np.eye(4)])
    cube = np.array(list(itertools.product((-1.0, 1.0), repeat=4)))
    return Constellation4D.from_real(np.vstack([axes, cube]), "24cell4_24")


BUILDERS: dict[str, Callable[[], Constellation4D]] = {
    "PM-QPSK": lambda: pm_qam(2, "PM-QPSK"),
    "PM-16QAM": lambda: pm_qam(4, "PM-16QAM"),
    "PM-64QAM": lambda: pm_qam(8, "PM-64QAM"),
    "biortho4_8": biorthogonal,
    "SO-PM-QPSK": so_pm_qpsk,
    "tetra4_9": tetra4_9,
    "SP-QAM4_128": lambda: set_partitioned_qam(4, "SP-QAM4_128"),
    "dicyclic4_16": lambda: dicyclic(8),
    "dicyclic4_24": lambda: dicyclic(12),
    "24cell4_24": cell24,
    "SP-QAM4_2048": lambda: set_partitioned_qam(8, "SP-QAM4_2048"),
}


def _data_dir():
    return resources.files("nli4d").joinpath("data", "formats")


def available_formats() -> list[str]:
    """Names of the shipped coordinate files."""
    return sorted(
        p.name[:-4] for p in _data_dir().iterdir() if p.name.endswith(".txt")
    )


def builtin_format(name: str) -> Constellation4D:
    """Load a shipped format by name (case-insensitive)."""
    lookup = {n.lower(): n for n in available_formats()}
    key = lookup.get(name.lower())
    if key is None:
        raise KeyError(f"no built-in format named {name!r}")
    text = _data_dir().joinpath(key + ".txt").read_text()
    return parse_constellation(text, label=key, source=key + ".txt")


def resolve_format(spec: str | Path, base: Path | None = None) -> Constellation4D:
    """Resolve a built-in name or a path to a coordinate file.

    Relative paths are interpreted against ``base`` when given.
    """
    s = str(spec)
    p = Path(s)
    if base is not None and not p.is_absolute():
        p = base / p
    if p.is_file():
        return load_constellation(p)
    try:
        return builtin_format(s)
    except KeyError:
        raise FileNotFoundError(
            f"{s!r} is neither a readable file nor a built-in format"
        ) from None


def write_library(directory: str | Path) -> list[Path]:
    """Write every built-in format as a coordinate file into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = []
    for name, build in BUILDERS.items():
        c = build()
        header = f"{name}: {c.size} points\ncolumns: x_re x_im y_re y_im"
        path = d / f"{name}.txt"
        path.write_text(format_constellation(c, header))
        out.append(path)
    return out
