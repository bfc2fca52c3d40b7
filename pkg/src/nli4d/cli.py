"""Command-line front end.

Subcommands::

    nli4d moments FILE [FILE ...]
    nli4d nli --config run.json
    nli4d snr-sweep --config run.json [--pmin DBM --pmax DBM --step DB]
    nli4d ssfm --config run.json [--dump-symbols PATH] [--paper-scale]
    nli4d validate --config run.json [--tolerance DB] [--paper-scale]

Exit codes: 0 success, 1 runtime failure, 2 configuration or input error,
3 validation failure (tolerance exceeded, or a format failing the symmetry
checks in ``moments``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import FULL_SCALE, ConfigError, RunConfig, dbm_to_w, load_config, w_to_dbm
from .constellation import (
    ConstellationError,
    Mode,
    ZeroPolarizationPower,
    kerr_coefficients,
    moments,
    validate_assumptions,
)
from .formats import resolve_format
from .integrator import default_workers
from .nli import GAUSSIAN, IneligibleFormat, NliReport, ase_variance, nli_sweep
from .ssfm import (
    GridTooWide,
    InsufficientSymbolsPerPoint,
    SimConfig,
    simulate,
    write_symbol_dump,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_VALIDATION = 3

CSV_VERSION = 1
JSON_VERSION = 1
NLI_COLUMNS = ("n", "sigma2_sci", "sigma2_xpm", "eta_db", "snr_db")
SWEEP_COLUMNS = ("power_dbm", "n", "sigma2_sci", "sigma2_xpm", "sigma2_ase", "eta_db", "snr_db")


def _db(x: float | None) -> float | None:
    return None if x is None else round(x, 2)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(command: str, columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# nli4d {command} v{CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if v is None else v for v in r])
    return buf.getvalue()


def read_csv(text: str) -> tuple[str, list[dict]]:
    """Parse CSV emitted by this tool; returns the version tag and the rows."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# nli4d "):
        raise ValueError("missing nli4d header line")
    rows = list(csv.DictReader(lines[1:]))
    return lines[0][2:], rows


def _json(obj) -> str:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, Mode):
            return o.value
        raise TypeError(type(o).__name__)

    return json.dumps(obj, indent=2, default=default, allow_nan=False) + "\n"


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def cmd_moments(args) -> int:
    results = []
    ok = True
    for spec in args.files:
        try:
            c = resolve_format(spec)
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except ConstellationError as exc:
            print(f"error: {spec}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        rep = validate_assumptions(c)
        entry = {"file": str(spec), "label": c.label, "size": c.size,
                 "assumptions": {"eligible": rep.eligible, "checks": rep.to_dict()}}
        try:
            m = moments(c)
        except ZeroPolarizationPower as exc:
            # Still an assumption failure: report it rather than abort.
            entry["moments"] = entry["kerr"] = None
            entry["assumptions"]["eligible"] = False
            print(f"{spec}: {exc}", file=sys.stderr)
            ok = False
            results.append(entry)
            continue
        entry["moments"] = {k: v for k, v in asdict(m).items() if k != "label"}
        entry["kerr"] = {}
        for mode in (Mode.FOURD, Mode.EGN):
            k = kerr_coefficients(m, mode)
            entry["kerr"][mode.value] = {
                "psi1": k.psi1, "psi2": k.psi2, "psi3": k.psi3, "phi1": k.phi1_factor,
                "psi1_y": k.psi1_y, "psi2_y": k.psi2_y, "psi3_y": k.psi3_y,
                "phi1_y": k.phi1_factor_y,
            }
        if not rep.eligible:
            ok = False
            names = ", ".join(f.name for f in rep.failures)
            print(f"{spec}: fails symmetry checks: {names}", file=sys.stderr)
        results.append(entry)
    _emit(_json({"version": JSON_VERSION, "formats": results}), args.out)
    return EXIT_OK if ok else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# analytical commands
# ---------------------------------------------------------------------------

def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        changes["mode"] = Mode.parse(args.mode)
    if getattr(args, "budget", None) is not None:
        changes["budgets"] = {**cfg.budgets, "XZ": args.budget}
    return replace(cfg, **changes) if changes else cfg


def _reports(cfg: RunConfig, force: bool, sigma2_ase=None) -> list[NliReport]:
    plan = cfg.plan(force=force)
    workers = default_workers()
    cache = cfg.cache(workers)
    return nli_sweep(
        plan, cache, cfg.link, cfg.mode, channels=cfg.report_channels(),
        sigma2_ase=sigma2_ase, workers=workers,
    )


def _ase_or_none(cfg: RunConfig) -> float | None:
    try:
        return ase_variance(cfg.link, cfg.grid)
    except ValueError:
        return None


def cmd_nli(args) -> int:
    cfg = _load(args)
    reports = _reports(cfg, args.force, _ase_or_none(cfg))
    rows = [
        (r.n, f"{r.sigma2_sci:.6e}", f"{r.sigma2_xpm_total:.6e}", _db(r.eta_db), _db(r.snr_db))
        for r in reports
    ]
    _emit(_csv("nli", NLI_COLUMNS, rows), args.out or cfg.output)
    return EXIT_OK


def cmd_snr_sweep(args) -> int:
    cfg = _load(args)
    ase = _ase_or_none(cfg)
    if ase is None:
        raise ConfigError("snr-sweep needs lumped amplification for the ASE model")
    pmin = cfg.sweep.pmin_dbm if args.pmin is None else args.pmin
    pmax = cfg.sweep.pmax_dbm if args.pmax is None else args.pmax
    step = cfg.sweep.step_db if args.step is None else args.step
    if step <= 0 or pmax < pmin:
        raise ConfigError("sweep needs step > 0 and pmax >= pmin")
    ref = cfg.grid.powers
    if any(abs(p - ref[0]) > 1e-12 * ref[0] for p in ref):
        raise ConfigError("snr-sweep requires a uniform launch power")
    base = _reports(cfg, args.force, ase)
    levels = np.arange(pmin, pmax + 0.5 * step, step)
    rows = []
    for p_dbm in levels:
        # Every channel is set to the same launch power; the integrals do not
        # depend on power, so each report is rescaled rather than recomputed.
        target = dbm_to_w(float(p_dbm))
        for r in base:
            s = r.scaled(target / r.power)
            rows.append((round(float(p_dbm), 4), s.n, f"{s.sigma2_sci:.6e}",
                         f"{s.sigma2_xpm_total:.6e}", f"{ase:.6e}", _db(s.eta_db), _db(s.snr_db)))
    _emit(_csv("snr-sweep", SWEEP_COLUMNS, rows), args.out or cfg.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# split-step commands
# ---------------------------------------------------------------------------

def _full_scale(cfg: RunConfig) -> RunConfig:
    fmts = set(cfg.grid.formats)
    pw = set(cfg.grid.powers)
    if len(fmts) != 1 or len(pw) != 1:
        raise ConfigError("--paper-scale needs a uniform format and power")
    grid = type(cfg.grid).uniform(
        cfg.grid.symbol_rate, cfg.grid.channel_spacing, FULL_SCALE["num_channels"],
        cfg.grid.powers[0], cfg.grid.formats[0],
    )
    link = replace(cfg.link, num_spans=FULL_SCALE["num_spans"])
    ssfm = replace(
        cfg.ssfm,
        num_symbols=FULL_SCALE["num_symbols"],
        guard_symbols=FULL_SCALE["guard_symbols"],
        channels=None,
    )
    return replace(cfg, grid=grid, link=link, ssfm=ssfm, channels=None)


def sim_config(cfg: RunConfig) -> SimConfig:
    """Build the split-step settings for a run configuration."""
    cons = []
    for label in cfg.grid.formats:
        if label.lower() == GAUSSIAN:
            raise ConfigError("the split-step simulator needs explicit constellations, not 'gaussian'")
        cons.append(cfg.resolve(label))
    s = cfg.ssfm
    return SimConfig(
        cfg.grid, cfg.link, tuple(cons), num_symbols=s.num_symbols,
        guard_symbols=s.guard_symbols, oversampling=s.oversampling,
        max_nl_phase=s.max_nl_phase, seed=s.seed, ase=s.ase,
    )


def _ssfm_channels(cfg: RunConfig) -> list[int]:
    if cfg.ssfm.channels:
        return list(cfg.ssfm.channels)
    return cfg.report_channels()


def _settings_echo(cfg: RunConfig, sim: SimConfig) -> dict:
    return {
        "num_channels": cfg.grid.num_channels,
        "symbol_rate_gbd": cfg.grid.symbol_rate / 1e9,
        "channel_spacing_ghz": cfg.grid.channel_spacing / 1e9,
        "launch_power_dbm": [round(w_to_dbm(p), 4) for p in cfg.grid.powers],
        "formats": list(cfg.grid.formats),
        "span_length_km": cfg.link.span_length / 1e3,
        "num_spans": cfg.link.num_spans,
        "num_symbols": sim.num_symbols,
        "guard_symbols": sim.guard_symbols,
        "samples_per_symbol": sim.samples_per_symbol,
        "max_nl_phase_rad": sim.max_nl_phase,
        "seed": sim.seed,
        "ase": sim.ase,
    }


def cmd_ssfm(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, ssfm=replace(cfg.ssfm, seed=args.seed))
    if args.paper_scale:
        cfg = _full_scale(cfg)
    sim = sim_config(cfg)
    stats: dict = {}
    est, tx = simulate(sim, channels=_ssfm_channels(cfg), stats=stats)
    dump = args.dump_symbols or cfg.dump_symbols
    if dump:
        write_symbol_dump(dump, [tx[e.n - 1] for e in est], est)
    doc = {
        "version": JSON_VERSION,
        "per_channel": [
            {"n": e.n, "snr_db": _db(_finite(e.snr_db)), "eta_db": _db(_finite(e.eta_db))}
            for e in est
        ],
        "settings": {**_settings_echo(cfg, sim), "steps": stats.get("steps")},
    }
    _emit(_json(doc), args.out or cfg.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    if args.paper_scale:
        cfg = _full_scale(cfg)
    tol = cfg.tolerance_db if args.tolerance is None else args.tolerance
    out = args.out or cfg.output
    if cfg.link.fiber.gamma == 0:
        print("notice: gamma = 0, the simulated SNR is unbounded and eta is zero; "
              "validation skipped", file=sys.stderr)
        _emit(_json({"version": JSON_VERSION, "skipped": True,
                     "reason": "gamma is zero"}), out)
        return EXIT_OK
    sim = sim_config(cfg)
    chans = _ssfm_channels(cfg)
    model = {
        r.n: r for r in nli_sweep(
            cfg.plan(force=args.force), cfg.cache(default_workers()), cfg.link, cfg.mode,
            channels=chans,
        )
    }
    est, _ = simulate(sim, channels=chans)
    rows = []
    for e in est:
        d = model[e.n].eta_db - e.eta_db
        rows.append({
            "n": e.n,
            "eta_model_db": _db(model[e.n].eta_db),
            "eta_ssfm_db": _db(e.eta_db),
            "delta_db": _db(d),
        })
    mean_abs = float(np.mean([abs(model[e.n].eta_db - e.eta_db) for e in est]))
    passed = mean_abs <= tol
    doc = {
        "version": JSON_VERSION,
        "mode": cfg.mode.value,
        "tolerance_db": tol,
        "per_channel": rows,
        "mean_abs_delta_db": _db(mean_abs),
        "pass": passed,
        "settings": _settings_echo(cfg, sim),
    }
    _emit(_json(doc), out)
    return EXIT_OK if passed else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nli4d",
        description="Nonlinear interference model for 4D formats and split-step validator.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("moments", help="moment ratios, Kerr coefficients and symmetry checks")
    m.add_argument("files", nargs="+", help="coordinate files or built-in format names")
    m.add_argument("--out", help="write JSON here instead of stdout")
    m.set_defaults(func=cmd_moments)

    def common(sp, *, model=True):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="override the seed")
        sp.add_argument("--out", help="output file (default: stdout)")
        if model:
            sp.add_argument("--budget", type=int, help="sample budget for each X/Z pair")
            sp.add_argument("--mode", choices=[m.value for m in Mode], help="override the model mode")
            sp.add_argument("--force", action="store_true",
                            help="accept formats that fail the symmetry checks")

    n = sub.add_parser("nli", help="per-channel NLI variance, eta and SNR as CSV")
    common(n)
    n.set_defaults(func=cmd_nli)

    s = sub.add_parser("snr-sweep", help="SNR versus launch power as CSV")
    common(s)
    s.add_argument("--pmin", type=float, help="lowest launch power in dBm")
    s.add_argument("--pmax", type=float, help="highest launch power in dBm")
    s.add_argument("--step", type=float, help="power step in dB")
    s.set_defaults(func=cmd_snr_sweep)

    f = sub.add_parser("ssfm", help="split-step simulation; per-channel SNR and eta as JSON")
    common(f, model=False)
    f.add_argument("--dump-symbols", help="write transmitted and received symbols here")
    f.add_argument("--paper-scale", action="store_true",
                   help="10 channels, 30000 symbols, 5 spans (long run)")
    f.set_defaults(func=cmd_ssfm)

    v = sub.add_parser("validate", help="compare the model with the split-step simulation")
    common(v)
    v.add_argument("--tolerance", type=float, help="pass threshold on mean |delta eta| in dB")
    v.add_argument("--paper-scale", action="store_true",
                   help="10 channels, 30000 symbols, 5 spans (long run)")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IneligibleFormat, ConstellationError, GridTooWide,
            InsufficientSymbolsPerPoint, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
