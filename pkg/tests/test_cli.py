"""Command-line front end and configuration handling."""

import copy
import json
import math
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from nli4d.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VALIDATION,
    NLI_COLUMNS,
    SWEEP_COLUMNS,
    main,
    read_csv,
)
from nli4d.config import ConfigError, dbm_to_w, load_config, load_schema, w_to_dbm
from nli4d.nli import optimum_power

BASE = {
    "link": {
        "span_length_km": 100, "num_spans": 2, "alpha_db_per_km": 0.2,
        "dispersion_ps_nm_km": 16.5, "gamma_per_w_km": 1.3, "noise_figure_db": 5,
    },
    "grid": {
        "symbol_rate_gbd": 32, "channel_spacing_ghz": 50, "num_channels": 3,
        "launch_power_dbm": 0, "format": "PM-QPSK",
    },
    "integrator": {"seed": 1, "budget_xz": 50_000, "budget_s1": 1024, "budget_x2": 1024},
    "ssfm": {"num_symbols": 2048},
    "sweep": {"pmin_dbm": -2, "pmax_dbm": 2, "step_db": 1},
}


def write_cfg(tmp_path, doc=None, name="run.json", **changes):
    d = copy.deepcopy(BASE if doc is None else doc)
    for path, value in changes.items():
        node = d
        keys = path.split("__")
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        if value is None:
            node.pop(keys[-1], None)
        else:
            node[keys[-1]] = value
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_schema_is_valid_json_schema():
    jsonschema.Draft202012Validator.check_schema(load_schema())


def test_parse_config_units(tmp_path):
    cfg = load_config(write_cfg(tmp_path))
    assert cfg.link.span_length == 100e3
    assert cfg.link.fiber.gamma == pytest.approx(1.3e-3)
    assert cfg.link.fiber.beta2 * 1e27 == pytest.approx(-21.04, abs=0.01)
    assert cfg.grid.powers == (1e-3,) * 3
    assert cfg.budgets["XZ"] == 50_000
    assert cfg.ssfm.num_symbols == 2048


def test_beta2_alternative(tmp_path):
    cfg = load_config(write_cfg(tmp_path, link__dispersion_ps_nm_km=None, link__beta2_ps2_per_km=-20.0))
    assert cfg.link.fiber.beta2 == pytest.approx(-20e-27)


@pytest.mark.parametrize(
    "changes",
    [
        {"link__bogus": 1},
        {"bogus": 1},
        {"grid__powers_dbm": [0, 0, 0]},  # both power forms
        {"link__beta2_ps2_per_km": -20.0},  # both dispersion forms
        {"link__dispersion_ps_nm_km": None},  # neither
        {"grid__num_channels": 0},
        {"mode": "quantum"},
        {"integrator__budget_xz": 10},
        {"grid__format": "no-such-format"},
    ],
)
def test_invalid_configs(tmp_path, changes):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, **changes))


def test_list_length_mismatch(tmp_path):
    p = write_cfg(tmp_path, grid__launch_power_dbm=None, grid__powers_dbm=[0, 1])
    with pytest.raises(ConfigError, match="one entry per channel"):
        load_config(p)


def test_config_json_error_has_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "link": {,\n}')
    with pytest.raises(ConfigError, match=":2:"):
        load_config(p)


def test_format_file_relative_to_config(tmp_path):
    (tmp_path / "mine.txt").write_text("1 0 1 0\n-1 0 -1 0\n1 0 -1 0\n-1 0 1 0\n")
    cfg = load_config(write_cfg(tmp_path, grid__format="mine.txt"))
    assert cfg.resolve("mine.txt").size == 4


@pytest.mark.parametrize("p", [-10.0, 0.0, 3.3])
def test_dbm_roundtrip(p):
    assert w_to_dbm(dbm_to_w(p)) == pytest.approx(p, abs=1e-12)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def test_moments_builtin(capsys):
    code, out, _ = run(["moments", "PM-QPSK", "PM-64QAM"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    phi = {f["label"]: f["kerr"]["fourd"]["phi1"] for f in doc["formats"]}
    assert phi["PM-QPSK"] == pytest.approx(-5.0, abs=1e-12)
    assert phi["PM-64QAM"] == pytest.approx(-3.09, abs=0.01)
    assert doc["formats"][0]["assumptions"]["eligible"] is True
    assert set(doc["formats"][0]["kerr"]) == {"fourd", "egn"}


def test_moments_ineligible_file(tmp_path, capsys):
    p = tmp_path / "skew.txt"
    p.write_text("1 0 1 0\n1 0 -1 0\n0.5 1 0 1\n0.5 -1 0 -1\n")
    code, out, err = run(["moments", p], capsys)
    assert code == EXIT_VALIDATION
    assert json.loads(out)["formats"][0]["assumptions"]["eligible"] is False
    assert "fails symmetry checks" in err


def test_moments_silent_polarization(tmp_path, capsys):
    p = tmp_path / "xonly.txt"
    p.write_text("1 0 0 0\n-1 0 0 0\n0 1 0 0\n0 -1 0 0\n")
    code, out, _ = run(["moments", p], capsys)
    assert code == EXIT_VALIDATION
    assert json.loads(out)["formats"][0]["moments"] is None


def test_moments_parse_error_reports_file_and_line(tmp_path, capsys):
    p = tmp_path / "broken.txt"
    p.write_text("# header\n1 0 0 0\n1 0 zero 0\n")
    code, _, err = run(["moments", p], capsys)
    assert code == EXIT_CONFIG
    assert f"{p}:3" in err


def test_moments_missing_file(capsys):
    code, _, _ = run(["moments", "/nonexistent/f.txt"], capsys)
    assert code == EXIT_CONFIG


def test_moments_out_file(tmp_path, capsys):
    out = tmp_path / "m.json"
    code, stdout, _ = run(["moments", "SO-PM-QPSK", "--out", out], capsys)
    assert code == EXIT_OK and stdout == ""
    assert json.loads(out.read_text())["formats"][0]["kerr"]["fourd"]["phi1"] == pytest.approx(-3.0)


# ---------------------------------------------------------------------------
# nli and snr-sweep
# ---------------------------------------------------------------------------

def test_nli_csv(tmp_path, capsys):
    code, out, _ = run(["nli", "--config", write_cfg(tmp_path)], capsys)
    assert code == EXIT_OK
    tag, rows = read_csv(out)
    assert tag == "nli4d nli v1"
    assert tuple(rows[0].keys()) == NLI_COLUMNS
    assert [int(r["n"]) for r in rows] == [1, 2, 3]
    assert rows[0]["eta_db"] == rows[2]["eta_db"]
    assert float(rows[1]["eta_db"]) > float(rows[0]["eta_db"])
    for r in rows:
        # two decimals in dB columns
        assert len(r["eta_db"].split(".")[1]) <= 2
        assert float(r["sigma2_sci"]) > 0


def test_nli_is_deterministic_and_seeded(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    _, a, _ = run(["nli", "--config", cfg], capsys)
    _, b, _ = run(["nli", "--config", cfg], capsys)
    _, c, _ = run(["nli", "--config", cfg, "--seed", 9], capsys)
    assert a == b
    assert a != c


def test_nli_threads_do_not_change_output(tmp_path, capsys, monkeypatch):
    cfg = write_cfg(tmp_path)
    monkeypatch.setenv("NLI4D_THREADS", "1")
    _, a, _ = run(["nli", "--config", cfg], capsys)
    monkeypatch.setenv("NLI4D_THREADS", "4")
    _, b, _ = run(["nli", "--config", cfg], capsys)
    assert a == b


def test_nli_mode_override(tmp_path, capsys):
    cfg = write_cfg(tmp_path, grid__format="SO-PM-QPSK")
    _, a, _ = run(["nli", "--config", cfg], capsys)
    _, b, _ = run(["nli", "--config", cfg, "--mode", "egn"], capsys)
    _, g, _ = run(["nli", "--config", cfg, "--mode", "gn"], capsys)
    ea = float(read_csv(a)[1][1]["eta_db"])
    eb = float(read_csv(b)[1][1]["eta_db"])
    eg = float(read_csv(g)[1][1]["eta_db"])
    assert eb < ea < eg


def test_nli_single_gaussian_modes_identical(tmp_path, capsys):
    cfg = write_cfg(tmp_path, grid__format="gaussian", grid__num_channels=1)
    outs = {m: run(["nli", "--config", cfg, "--mode", m], capsys)[1] for m in ("gn", "egn", "fourd")}
    assert outs["gn"] == outs["egn"] == outs["fourd"]


def test_nli_out_and_budget(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, stdout, _ = run(["nli", "--config", write_cfg(tmp_path), "--budget", 20000, "--out", out], capsys)
    assert code == EXIT_OK and stdout == ""
    assert read_csv(out.read_text())[0] == "nli4d nli v1"


def test_nli_ineligible_needs_force(tmp_path, capsys):
    (tmp_path / "skew.txt").write_text("1 0 1 0\n1 0 -1 0\n0.5 1 0 1\n0.5 -1 0 -1\n")
    cfg = write_cfg(tmp_path, grid__format="skew.txt", grid__num_channels=1)
    assert run(["nli", "--config", cfg], capsys)[0] == EXIT_CONFIG
    assert run(["nli", "--config", cfg, "--force"], capsys)[0] == EXIT_OK


def test_config_errors_exit_2(tmp_path, capsys):
    code, _, err = run(["nli", "--config", write_cfg(tmp_path, bogus=1)], capsys)
    assert code == EXIT_CONFIG
    assert "bogus" in err
    assert run(["nli", "--config", tmp_path / "missing.json"], capsys)[0] == EXIT_CONFIG


def test_snr_sweep(tmp_path, capsys):
    code, out, _ = run(["snr-sweep", "--config", write_cfg(tmp_path)], capsys)
    assert code == EXIT_OK
    tag, rows = read_csv(out)
    assert tag == "nli4d snr-sweep v1"
    assert tuple(rows[0].keys()) == SWEEP_COLUMNS
    assert len(rows) == 5 * 3
    # eta does not depend on launch power; NLI variance scales with P^3
    center = [r for r in rows if r["n"] == "2"]
    assert len({r["eta_db"] for r in center}) == 1
    s = [float(r["sigma2_sci"]) for r in center]
    assert s[-1] / s[0] == pytest.approx(10 ** (4 * 3 / 10), rel=1e-5)


def test_snr_sweep_peak_matches_closed_form(tmp_path, capsys):
    cfg = write_cfg(tmp_path, link__num_spans=10)
    code, out, _ = run(["snr-sweep", "--config", cfg, "--pmin", -6, "--pmax", 6, "--step", 0.01], capsys)
    assert code == EXIT_OK
    rows = [r for r in read_csv(out)[1] if r["n"] == "2"]
    p = np.array([float(r["power_dbm"]) for r in rows])
    # use the unrounded variances to reconstruct SNR
    nli = np.array([float(r["sigma2_sci"]) + float(r["sigma2_xpm"]) for r in rows])
    ase = float(rows[0]["sigma2_ase"])
    snr = dbm_to_w(0) * 10 ** (p / 10) / (ase + nli)
    eta = nli[0] / (dbm_to_w(p[0])) ** 3
    p_star = w_to_dbm(optimum_power(eta, ase))
    assert p[np.argmax(snr)] == pytest.approx(p_star, abs=0.011)
    beyond = snr[p > p_star + 0.02]
    assert np.all(np.diff(beyond) < 0)


def test_snr_sweep_rejects_nonuniform_power(tmp_path, capsys):
    cfg = write_cfg(tmp_path, grid__launch_power_dbm=None, grid__powers_dbm=[0, 1, 0])
    assert run(["snr-sweep", "--config", cfg], capsys)[0] == EXIT_CONFIG


# ---------------------------------------------------------------------------
# ssfm and validate
# ---------------------------------------------------------------------------

def test_ssfm_json_and_dump(tmp_path, capsys):
    dump = tmp_path / "sym.bin"
    code, out, _ = run(["ssfm", "--config", write_cfg(tmp_path), "--dump-symbols", dump], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert [c["n"] for c in doc["per_channel"]] == [1, 2, 3]
    assert all(math.isfinite(c["snr_db"]) for c in doc["per_channel"])
    assert doc["settings"]["num_symbols"] == 2048
    assert doc["settings"]["steps"] > 0
    assert dump.read_bytes().startswith(b"NLI4DSYM\0")


def test_ssfm_rejects_gaussian(tmp_path, capsys):
    assert run(["ssfm", "--config", write_cfg(tmp_path, grid__format="gaussian")], capsys)[0] == EXIT_CONFIG


def test_validate_pass_and_fail(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    code, out, _ = run(["validate", "--config", cfg, "--tolerance", 5], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["pass"] is True
    assert len(doc["per_channel"]) == 3
    for r in doc["per_channel"]:
        assert r["delta_db"] == pytest.approx(r["eta_model_db"] - r["eta_ssfm_db"], abs=0.011)
    mean = np.mean([abs(r["delta_db"]) for r in doc["per_channel"]])
    assert doc["mean_abs_delta_db"] == pytest.approx(mean, abs=0.011)
    code, out, _ = run(["validate", "--config", cfg, "--tolerance", 0.001], capsys)
    assert code == EXIT_VALIDATION
    assert json.loads(out)["pass"] is False


def test_validate_skips_without_kerr(tmp_path, capsys):
    code, out, err = run(["validate", "--config", write_cfg(tmp_path, link__gamma_per_w_km=0)], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["skipped"] is True
    assert "skipped" in err


def test_paper_scale_requires_uniform_plan(tmp_path, capsys):
    cfg = write_cfg(tmp_path, grid__launch_power_dbm=None, grid__powers_dbm=[0, 1, 0])
    assert run(["ssfm", "--config", cfg, "--paper-scale"], capsys)[0] == EXIT_CONFIG


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "nli4d", "--version"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "0.1.0" in r.stdout


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["nli"])
    assert exc.value.code == 2
