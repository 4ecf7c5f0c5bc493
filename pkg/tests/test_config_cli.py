import csv
import json
from pathlib import Path

import pytest

from koitervi.cli import COMMANDS, main, run_command
from koitervi.config import config_summary, load_config, parse_config_text
from koitervi.errors import ConfigError
from koitervi.report import fmt_float, to_json

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
[chart]
kind = sphere
[mesh]
nx = 4
[gap]
s = 0.05
[load]
p3 = {p3}
[sweep]
eps_list = 0.2, 0.1, 0.05, 0.025, 0.0125
[probe]
halfwidth = 0.05
levels = 1
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_defaults():
    cfg = parse_config_text("")
    assert cfg.chart.kind == "sphere" and cfg.nx == cfg.ny == 16
    assert cfg.loads == ("0", "0", "0")
    assert cfg.eps_list == (0.2, 0.1, 0.05, 0.025, 0.0125)


def test_all_problems_reported_at_once():
    text = "[chart]\nkind = cone\n[mesh]\nnx = 1\n[gap]\ns = 1 +\n[extra]\nx = 1\n[koiter]\neps = 0.9\n"
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    probs = info.value.problems
    assert len(probs) == 5
    assert info.value.category == "config"
    assert any("unknown section [extra]" in p for p in probs)
    assert any("[gap] s:" in p and "offset 3" in p for p in probs)


def test_eps_list_validation():
    with pytest.raises(ConfigError, match="strictly decreasing"):
        parse_config_text("[sweep]\neps_list = 0.1, 0.2, 0.05\n")
    with pytest.raises(ConfigError, match="at least 3"):
        parse_config_text("[sweep]\neps_list = 0.1, 0.05\n")


def test_ellipsoid_and_missing_file(tmp_path):
    cfg = parse_config_text("[chart]\nkind = ellipsoid\na1 = 1.2\na2 = 1\na3 = 0.8\n")
    assert cfg.chart.semiaxes == (1.2, 1.0, 0.8)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "none.ini")


def test_summary_is_serialisable():
    cfg = parse_config_text("")
    json.loads(to_json(config_summary(cfg)))


def test_report_float_format():
    assert fmt_float(0.1) == "1.00000000000e-01"
    assert json.loads(to_json({"x": float("nan"), "y": [1, 2.5]})) == {"x": None, "y": [1, 2.5]}


def test_every_committed_config_parses():
    for name in COMMANDS:
        cfg = load_config(CONFIGS / f"{name}.ini")
        assert cfg is not None


def test_solve_membrane_zero_load(tmp_path):
    cfg = parse_config_text(SMALL.format(p3="0"))
    report = run_command("solve-membrane", cfg, str(tmp_path))
    assert report["results"]["energy"] == 0.0
    assert report["results"]["active_set"] == []
    saved = json.loads((tmp_path / "solve-membrane.json").read_text())
    assert list(saved) == ["command", "config_echo", "results", "diagnostics"]
    assert saved["results"]["energy"] == 0.0


def test_sweep_writes_five_rows(tmp_path):
    cfg_path = _write(tmp_path, SMALL.format(p3="-1"))
    assert main(["sweep", "--config", cfg_path, "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.reader(open(tmp_path / "o" / "sweep.csv")))
    assert rows[0] == ["epsilon", "err_vm", "err_h1_tan", "err_l2_trans", "iters", "active_count"]
    assert len(rows) == 6


def test_solve_koiter_and_export(tmp_path):
    text = SMALL.format(p3="-1") + "[output]\nexport_mesh = true\n"
    assert main(["solve-koiter", "--config", _write(tmp_path, text), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "mesh_nodes.txt").exists()
    assert (tmp_path / "koiter_matrix.txt").exists()
    rep = json.loads((tmp_path / "solve-koiter.json").read_text())
    assert rep["diagnostics"]["kkt_residual"] <= 1e-9


def test_geometry_check_on_plate_fails(tmp_path, capsys):
    cfg_path = _write(tmp_path, "[chart]\nkind = plate\n")
    assert main(["geometry-check", "--config", cfg_path, "--out", str(tmp_path)]) != 0
    err = capsys.readouterr().err
    assert "non-elliptic" in err
    assert err.startswith("error[non-elliptic]:")


def test_korn_on_plate_fails(tmp_path, capsys):
    cfg_path = _write(tmp_path, "[chart]\nkind = plate\n[mesh]\nnx = 4\n")
    assert main(["korn", "--config", cfg_path, "--out", str(tmp_path)]) == 1
    assert "error[degenerate-korn]" in capsys.readouterr().err


def test_bad_config_exit_status(tmp_path, capsys):
    cfg_path = _write(tmp_path, "[mesh]\nnx = zero\n")
    assert main(["sweep", "--config", cfg_path]) == 2
    assert "error[config]: [mesh] nx" in capsys.readouterr().err


def test_unknown_command_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["explode", "--config", "x.ini"])
    assert info.value.code == 2


def test_geometry_check_and_korn_reports(tmp_path):
    cfg = parse_config_text("[chart]\nkind = sphere\nradius = 2\n[mesh]\nnx = 4\n")
    rep = run_command("geometry-check", cfg, str(tmp_path))
    assert rep["results"]["K0"] == pytest.approx(0.25)
    rep = run_command("korn", cfg, str(tmp_path))
    assert rep["results"]["lambda_min"] > 0


def test_probe_command(tmp_path):
    cfg = parse_config_text("[mesh]\nnx = 32\n[gap]\ns = 1000\n[load]\np3 = 1\n"
                            "[probe]\nhalfwidth = 0.2\nlevels = 2\n")
    run_command("probe", cfg, str(tmp_path))
    rows = list(csv.reader(open(tmp_path / "probe.csv")))
    assert rows[0] == ["h", "rho", "norm_h1_tan", "norm_l2_trans"]
    assert len(rows) == 5


def test_unrecognised_log_level_is_reported(tmp_path, monkeypatch, caplog):
    monkeypatch.setenv("KOITERVI_LOG", "loud")
    cfg_path = _write(tmp_path, "[mesh]\nnx = 4\n")
    assert main(["geometry-check", "--config", cfg_path, "--out", str(tmp_path)]) == 0
    assert "not recognised" in caplog.text
