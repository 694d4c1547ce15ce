"""Config ingestion, sweep orchestration, CSV contracts, plots, CLI."""
import csv
import json
import statistics
import subprocess
import sys

import pytest

import wsnburst.experiments as ex
from wsnburst.cli import main as cli_main
from wsnburst.experiments import (ConfigError, blowup_table, config_from_dict,
                                  emit_plotdata, fmt9, limits_table, load_config,
                                  read_results_csv, run_point, run_sweep, summarize)

MINIMAL = {"case": 1, "N": [1],
           "b": {"start": 0.05, "stop": 0.95, "step": 0.05}, "on_kind": "exp"}

FAST = {"case": 1, "N": [1], "b": {"start": 0.5, "stop": 0.5, "step": 0.05},
        "on_kind": "exp", "lambda_total": 2.0, "n_p": 5.0,
        "horizon_s": 2000.0, "warmup_s": 200.0, "days": 1, "seed": 5}


def write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


# -------------------------------------------------------------- load_config

def test_minimal_config_defaults(tmp_path):
    cfg = load_config(write_config(tmp_path, MINIMAL))
    assert cfg.horizon_s == 90_000.0
    assert cfg.warmup_s == 3_600.0
    assert cfg.days == 10
    assert cfg.rho == 0.5 and cfg.lambda_total == 50.0
    assert len(cfg.b_values()) == 19
    assert cfg.b_values()[0] == 0.05 and cfg.b_values()[-1] == 0.95


def test_config_parse_error_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"case": 1,\n  "N": [1,]\n}')
    with pytest.raises(ConfigError, match=r"line \d+, column \d+"):
        load_config(path)


@pytest.mark.parametrize("patch, match", [
    ({"frobnicate": 1}, "unknown config keys: frobnicate"),
    ({"warmup_s": 90_000.0}, "warmup_s"),
    ({"b": {"start": 0.5, "stop": 1.0, "step": 0.05}}, "stop"),
    ({"b": {"start": 0.5, "stop": 0.4, "step": 0.05}}, "start"),
    ({"b": {"start": 0.1, "stop": 0.9, "step": 0.0}}, "step"),
    ({"rho": 0.5, "v": 100.0}, "not both"),
    ({"rho": 1.2}, "rho"),
    ({"case": 4}, "case"),
    ({"N": []}, "N"),
    ({"N": [0]}, "N"),
    ({"N": 3}, "N"),
    ({"on_kind": "weibull"}, "on_kind"),
    ({"on_kind": "tpt"}, "on_kind"),
    ({"off_kind": "tpt:30"}, "off_kind"),
    ({"days": 0}, "days"),
    ({"n_p": 0.5}, "n_p"),
    ({"emission_mode": "bulk"}, "emission_mode"),
])
def test_config_validation_errors(tmp_path, patch, match):
    payload = dict(MINIMAL)
    payload.update(patch)
    with pytest.raises(ConfigError, match=match):
        load_config(write_config(tmp_path, payload))


def test_missing_required_keys(tmp_path):
    with pytest.raises(ConfigError, match="missing required"):
        load_config(write_config(tmp_path, {"case": 1}))


def test_config_v_gives_rho():
    cfg = config_from_dict({**MINIMAL, "v": 200.0})
    assert cfg.rho == 0.25


def test_config_tpt_on_kind_carries_T():
    cfg = config_from_dict({**MINIMAL, "on_kind": "tpt:30"})
    assert cfg.on().T == 30
    assert cfg.on().label() == "tpt:30"


# ----------------------------------------------------------------- run_sweep

def test_sweep_single_point_single_row(tmp_path):
    cfg = config_from_dict({**FAST, "out_dir": str(tmp_path / "out")})
    output = run_sweep(cfg)
    assert len(output.rows) == 1        # case 1: one entity per replication
    assert output.rows[0].entity == "sink"
    assert output.rows[0].status == "ok"
    assert output.results_csv.exists() and output.summary_csv.exists()
    assert output.manifest.exists()


def test_sweep_row_count_formula(tmp_path):
    payload = {**FAST, "N": [1, 2], "b": {"start": 0.2, "stop": 0.6, "step": 0.2},
               "days": 2, "out_dir": str(tmp_path / "out")}
    output = run_sweep(config_from_dict(payload))
    assert len(output.rows) == 2 * 3 * 2 * 1  # N x b x days x entities(case 1)


def test_sweep_case2_entities(tmp_path):
    payload = {"case": 2, "N": [1], "b": {"start": 0.5, "stop": 0.6, "step": 0.1},
               "on_kind": "exp", "lambda_total": 2.0, "n_p": 5.0,
               "horizon_s": 2000.0, "warmup_s": 200.0, "days": 2, "seed": 5,
               "out_dir": str(tmp_path / "out")}
    output = run_sweep(config_from_dict(payload))
    entities = {r.entity for r in output.rows}
    assert entities == {"cluster_1", "cluster_2", "sink"}
    assert len(output.rows) == 2 * 2 * 3


def test_sweep_case3_entities(tmp_path):
    payload = {"case": 3, "N": [1], "b": {"start": 0.5, "stop": 0.5, "step": 0.1},
               "on_kind": "exp", "lambda_total": 2.0, "n_p": 5.0,
               "horizon_s": 2000.0, "warmup_s": 200.0, "days": 2, "seed": 5,
               "out_dir": str(tmp_path / "out")}
    output = run_sweep(config_from_dict(payload))
    entities = {r.entity for r in output.rows}
    assert entities == {"cluster_1", "cluster_2", "cluster_3", "sink"}
    assert len(output.rows) == 2 * 1 * 4
    direct = [r for r in output.rows if r.entity == "cluster_3"]
    assert all(r.status == "ok" and r.throughput_pps > 0 for r in direct)


def test_sweep_results_csv_is_byte_deterministic(tmp_path):
    cfg_a = config_from_dict({**FAST, "days": 2, "out_dir": str(tmp_path / "a")})
    cfg_b = config_from_dict({**FAST, "days": 2, "out_dir": str(tmp_path / "b")})
    out_a = run_sweep(cfg_a)
    out_b = run_sweep(cfg_b)
    assert out_a.results_csv.read_bytes() == out_b.results_csv.read_bytes()
    assert out_a.summary_csv.read_bytes() == out_b.summary_csv.read_bytes()


def test_sweep_seed_override_changes_rows(tmp_path):
    base = run_sweep(config_from_dict({**FAST, "out_dir": str(tmp_path / "a")}))
    other = run_sweep(config_from_dict({**FAST, "out_dir": str(tmp_path / "b")}),
                      seed=99)
    assert base.rows[0].seed != other.rows[0].seed
    assert base.rows[0].mpd_s != other.rows[0].mpd_s


def test_summary_matches_independent_recompute(tmp_path):
    payload = {**FAST, "days": 3, "b": {"start": 0.3, "stop": 0.5, "step": 0.2},
               "out_dir": str(tmp_path / "out")}
    output = run_sweep(config_from_dict(payload))

    # independent reader: stdlib csv + statistics over results.csv
    by_group = {}
    with open(output.results_csv, newline="") as fh:
        for rec in csv.DictReader(fh):
            key = (rec["case"], rec["N"], rec["b"], rec["entity"])
            by_group.setdefault(key, []).append(rec)
    with open(output.summary_csv, newline="") as fh:
        summary = list(csv.DictReader(fh))
    assert summary
    for row in summary:
        group = by_group[(row["case"], row["N"], row["b"], row["entity"])]
        values = [float(rec[row["metric"]]) for rec in group]
        mean = statistics.fmean(values)
        pstdev = statistics.pstdev(values)
        cv = pstdev / abs(mean) if mean else 0.0
        # the stored strings are the recomputed statistics at the CSV's own
        # 9-significant-digit precision, byte for byte
        assert row["mean"] == fmt9(mean)
        assert row["min"] == fmt9(min(values))
        assert row["max"] == fmt9(max(values))
        assert row["cv"] == fmt9(cv)
        assert float(row["mean"]) == pytest.approx(mean, rel=5e-9, abs=1e-12)


def test_run_point_failure_recorded_not_raised(monkeypatch):
    cfg = config_from_dict(FAST)

    def boom(*args, **kwargs):
        raise RuntimeError("engine exploded")

    monkeypatch.setattr(ex, "run_replication", boom)
    rows = run_point(cfg, 1, 0.5, 0)
    assert len(rows) == 1
    assert rows[0].status == "error: engine exploded"
    assert rows[0].mpd_s is None


def test_row_seed_recorded_and_rederivable(tmp_path):
    cfg = config_from_dict({**FAST, "days": 2, "out_dir": str(tmp_path / "out")})
    output = run_sweep(cfg)
    for row in output.rows:
        assert row.seed == ex.row_seed(cfg.seed, cfg.case, row.N, row.b, row.day)


# ------------------------------------------------------------------- fmt9

@pytest.mark.parametrize("x, expected", [
    (0.0, "0.0"),
    (0.02, "0.0200000000"),
    (86_400.0, "86400.0000"),
    (0.0009765625, "0.000976562500"),
    (123456789.0, "123456789"),
    (None, ""),
])
def test_fmt9_fixed_notation(x, expected):
    assert fmt9(x) == expected


def test_fmt9_nine_significant_digits():
    s = fmt9(1.0 / 3.0)
    assert s == "0.333333333"
    assert "e" not in fmt9(1e-7) and fmt9(1e-7).startswith("0.0000001")


# -------------------------------------------------------------- plot data

def test_emit_plotdata_empty_warns(tmp_path, caplog):
    with caplog.at_level("WARNING"):
        files = emit_plotdata([], tmp_path / "plots")
    assert files == []
    assert "no matching series" in caplog.text


def test_emit_plotdata_series_and_script(tmp_path):
    payload = {**FAST, "days": 1, "b": {"start": 0.1, "stop": 0.9, "step": 0.1},
               "out_dir": str(tmp_path / "out")}
    output = run_sweep(config_from_dict(payload))
    parsed = read_results_csv(output.results_csv)
    files = emit_plotdata(summarize(parsed), tmp_path / "plots")
    dats = [f for f in files if f.suffix == ".dat"]
    mpd_dat = [f for f in dats if "mpd_s" in f.name]
    assert mpd_dat
    lines = mpd_dat[0].read_text().splitlines()
    assert lines[0].startswith("#")
    assert len(lines) == 1 + 9  # header + one point per b
    script = [f for f in files if f.name == "plot.gp"][0].read_text()
    assert "set logscale y" in script      # delay series are log scale
    assert "unset logscale y" in script    # throughput series are linear


# ---------------------------------------------------------- analytic tables

def test_blowup_table_values():
    rows = blowup_table(2, 0.5)
    assert [round(r["b_i"], 6) for r in rows] == [0.666667, 0.5]


def test_blowup_table_rho_sweep_matches_one_minus_rho():
    rows = blowup_table(1, 0.5, rho_sweep=(0.1, 0.9, 0.1))
    assert len(rows) == 9
    for row in rows:
        assert row["b_i"] == 1.0 - row["rho"]


def test_limits_table_fig2_parameterization():
    table = limits_table(20.0, 0.5, "geom:20")
    assert table["mpd_smooth_s"] == pytest.approx(0.1, rel=1e-9)
    assert table["mpd_bulk_s"] == pytest.approx(2.0, rel=1e-9)
    det = limits_table(100.0, 0.5, "det:1")
    assert det["mpd_bulk_s"] == pytest.approx(0.02, rel=1e-9)


# --------------------------------------------------------------------- CLI

def test_cli_blowup_prints_table(capsys):
    assert cli_main(["analytic", "blowup", "--n", "2", "--rho", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "0.666667" in out and "0.500000" in out


def test_cli_limits_prints_values(capsys):
    assert cli_main(["analytic", "limits", "--v", "20", "--rho", "0.5",
                     "--law", "geom:20"]) == 0
    out = capsys.readouterr().out
    assert "0.100000" in out and "2.000000" in out


def test_cli_validate_ok(tmp_path, capsys):
    path = write_config(tmp_path, FAST)
    assert cli_main(["validate", "--config", str(path)]) == 0
    assert "config ok" in capsys.readouterr().out


def test_cli_validate_bad_config_exit_2(tmp_path, capsys):
    path = write_config(tmp_path, {**FAST, "days": 0})
    assert cli_main(["validate", "--config", str(path)]) == 2


def test_cli_missing_config_exit_2(tmp_path):
    assert cli_main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_cli_bad_law_exit_2():
    assert cli_main(["analytic", "limits", "--v", "20", "--rho", "0.5",
                     "--law", "zipf:3"]) == 2


def test_cli_simulate_writes_outputs(tmp_path, capsys):
    path = write_config(tmp_path, {**FAST, "days": 1})
    out_dir = tmp_path / "results"
    code = cli_main(["simulate", "--config", str(path), "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "results.csv").exists()
    assert (out_dir / "summary.csv").exists()
    assert (out_dir / "run_manifest.json").exists()
    assert (out_dir / "plots" / "plot.gp").exists()
    manifest = json.loads((out_dir / "run_manifest.json").read_text())
    assert manifest["master_seed"] == 5
    assert manifest["config"]["case"] == 1


def test_cli_module_entry_point(tmp_path):
    # the console entry is exercised through `python -m wsnburst`
    proc = subprocess.run([sys.executable, "-m", "wsnburst", "analytic", "blowup",
                           "--n", "1", "--rho", "0.25"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "0.750000" in proc.stdout


def test_config_sink_service_rate_override():
    base = {"case": 2, "N": [1], "b": {"start": 0.5, "stop": 0.6, "step": 0.1},
            "on_kind": "exp"}
    cfg = config_from_dict({**base, "sink_service_rate": 120.0})
    topo = ex.build_topology(cfg, 1)
    assert topo.node("sink").service_rate == 120.0
    assert topo.node("relay_1").service_rate == 100.0  # relays keep lambda/rho
    with pytest.raises(ConfigError, match="sink_service_rate"):
        config_from_dict({**MINIMAL, "sink_service_rate": 120.0})
    with pytest.raises(ConfigError, match="sink_service_rate"):
        config_from_dict({**base, "sink_service_rate": -1.0})
