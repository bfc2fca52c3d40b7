"""JSON run configuration: schema validation and conversion to SI objects.

Engineering units (km, dBm, GBd, ps/nm/km, 1/W/km) appear only in the JSON
document; everything returned from here is SI.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .constellation import Mode
from .formats import resolve_format
from .integrator import DEFAULT_BUDGETS, IntegralCache
from .link import (
    Amplification,
    FiberSpec,
    LinkSpec,
    WdmGrid,
    dispersion_to_beta2,
)
from .nli import GAUSSIAN, ChannelPlan

__all__ = [
    "ConfigError",
    "RunConfig",
    "SsfmSettings",
    "SweepSettings",
    "load_schema",
    "load_config",
    "parse_config",
    "dbm_to_w",
    "w_to_dbm",
    "FULL_SCALE",
]


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def dbm_to_w(p_dbm: float) -> float:
    return 1e-3 * 10 ** (p_dbm / 10)


def w_to_dbm(p_w: float) -> float:
    return 10 * math.log10(p_w / 1e-3)


def load_schema() -> dict:
    text = resources.files("nli4d").joinpath("data/config.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class SsfmSettings:
    num_symbols: int = 1 << 14
    guard_symbols: int | None = None
    oversampling: int | None = None
    max_nl_phase: float = 3e-3
    seed: int = 0
    ase: bool = False
    channels: tuple[int, ...] | None = None


# Larger validation run: 10 channels, 30000 symbols with 1500 guard symbols
# on each side, five 100 km spans.
FULL_SCALE = {"num_channels": 10, "num_symbols": 30000, "guard_symbols": 1500, "num_spans": 5}


@dataclass(frozen=True)
class SweepSettings:
    pmin_dbm: float = -4.0
    pmax_dbm: float = 4.0
    step_db: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration in SI units."""

    link: LinkSpec
    grid: WdmGrid
    mode: Mode = Mode.FOURD
    seed: int = 0
    budgets: dict = field(default_factory=dict)
    channels: tuple[int, ...] | None = None
    ssfm: SsfmSettings = SsfmSettings()
    sweep: SweepSettings = SweepSettings()
    tolerance_db: float = 0.5
    output: str | None = None
    dump_symbols: str | None = None
    base_dir: Path = Path(".")

    def resolve(self, label: str):
        return resolve_format(label, self.base_dir)

    def plan(self, *, force: bool = False) -> ChannelPlan:
        return ChannelPlan.from_grid(self.grid, self.resolve, force=force)

    def cache(self, workers: int | None = None) -> IntegralCache:
        return IntegralCache(
            self.link, self.grid.symbol_period, self.seed, budgets=self.budgets, workers=workers
        )

    def report_channels(self) -> list[int]:
        return list(self.channels) if self.channels else list(range(1, self.grid.num_channels + 1))


def _check_files(grid_doc: dict, base: Path) -> None:
    labels = grid_doc.get("formats") or [grid_doc.get("format", "PM-QPSK")]
    for label in labels:
        if label.lower() == GAUSSIAN:
            continue
        try:
            resolve_format(label, base)
        except FileNotFoundError as exc:
            raise ConfigError(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(f"format {label!r}: {exc}") from None


def parse_config(doc: dict[str, Any], base_dir: str | Path = ".") -> RunConfig:
    """Validate ``doc`` against the schema and build a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        Schema violations, unknown keys, inconsistent list lengths and
        unresolvable format references.
    """
    base = Path(base_dir)
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None

    ld = doc["link"]
    if "dispersion_ps_nm_km" in ld:
        beta2 = dispersion_to_beta2(ld["dispersion_ps_nm_km"])
    else:
        beta2 = ld["beta2_ps2_per_km"] * 1e-27
    try:
        fiber = FiberSpec(ld["gamma_per_w_km"] * 1e-3, beta2, ld["alpha_db_per_km"])
        link = LinkSpec(
            fiber,
            ld["span_length_km"] * 1e3,
            ld["num_spans"],
            Amplification(ld.get("amplification", "lumped")),
            ld.get("noise_figure_db", 5.0),
        )
    except ValueError as exc:
        raise ConfigError(f"link: {exc}") from None

    gd = doc["grid"]
    N = gd["num_channels"]
    if "powers_dbm" in gd:
        powers = tuple(dbm_to_w(p) for p in gd["powers_dbm"])
    else:
        powers = (dbm_to_w(gd.get("launch_power_dbm", 0.0)),) * N
    formats = tuple(gd["formats"]) if "formats" in gd else (gd.get("format", "PM-QPSK"),) * N
    if len(powers) != N or len(formats) != N:
        raise ConfigError("grid: powers_dbm and formats need one entry per channel")
    try:
        grid = WdmGrid(gd["symbol_rate_gbd"] * 1e9, gd["channel_spacing_ghz"] * 1e9, N, powers, formats)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    _check_files(gd, base)

    channels = tuple(doc["channels"]) if "channels" in doc else None
    sd = doc.get("ssfm", {})
    ssfm_channels = tuple(sd["channels"]) if "channels" in sd else None
    for chans in (channels, ssfm_channels):
        if chans and max(chans) > N:
            raise ConfigError(f"channel index out of range 1..{N}")

    integ = doc.get("integrator", {})
    budgets = dict(DEFAULT_BUDGETS["reduced"])
    for key, name in (("budget_xz", "XZ"), ("budget_s1", "S1"), ("budget_x2", "X2")):
        if key in integ:
            budgets[name] = integ[key]

    ssfm = SsfmSettings(
        num_symbols=sd.get("num_symbols", 1 << 14),
        guard_symbols=sd.get("guard_symbols"),
        oversampling=sd.get("oversampling"),
        max_nl_phase=sd.get("max_nl_phase_rad", 3e-3),
        seed=sd.get("seed", 0),
        ase=sd.get("ase", False),
        channels=ssfm_channels,
    )
    sw = doc.get("sweep", {})
    sweep = SweepSettings(sw.get("pmin_dbm", -4.0), sw.get("pmax_dbm", 4.0), sw.get("step_db", 0.5))
    if sweep.pmax_dbm < sweep.pmin_dbm:
        raise ConfigError("sweep: pmax_dbm must not be below pmin_dbm")
    out = doc.get("output", {})
    return RunConfig(
        link=link,
        grid=grid,
        mode=Mode.parse(doc.get("mode", "fourd")),
        seed=integ.get("seed", 0),
        budgets=budgets,
        channels=channels,
        ssfm=ssfm,
        sweep=sweep,
        tolerance_db=doc.get("validate", {}).get("tolerance_db", 0.5),
        output=out.get("path"),
        dump_symbols=out.get("dump_symbols"),
        base_dir=base,
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a JSON configuration file."""
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{p}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return parse_config(doc, p.parent)
