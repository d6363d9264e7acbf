import json
from pathlib import Path

import numpy as np
import pytest

from dmdsolve.bench import BenchRecord, emit_csv, record_row
from dmdsolve.cli import main
from dmdsolve.config import (
    ConfigError,
    ExperimentConfig,
    emit_config,
    parse_config,
)

SMALL_CFG = """
# tiny experiment used by the CLI tests
model.p = 3
model.T = 4
model.beta = 0.9
model.theta_true = 0.5, 0.8, 1.0, 2.0
sim.n_agents = 40
basis.knots_per_dim = 4
basis.degree = 2
slstd.max_passes = 30
estimate.max_iter = 60
bench.replications = 2
bench.seed = 77
bench.methods = exact, sequential
bench.cells = 3:4
bench.timing_reps = 2
"""


def test_parse_then_emit_roundtrip():
    cfg = parse_config(SMALL_CFG)
    text = emit_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert emit_config(again) == text


def test_defaults_fill_unset_keys():
    cfg = parse_config("model.p = 4\nmodel.T = 10\nmodel.theta_true = 1,2,1,9\n")
    assert cfg.model.beta == 0.95
    assert cfg.basis.knots_per_dim == 5
    assert cfg.estimate.solver == "slstd"
    assert cfg.baselines.kw_states_per_period == 100


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("model.p = 4\nwhat.ever = 1\n", ":2: unknown key 'what.ever'"),
        ("model.p = 4\nmodel.p = 5\n", ":2: duplicate key"),
        ("model.p = x\n", ":1: bad value for 'model.p'"),
        ("model.theta_true = 1, 2\nmodel.p = 3\nmodel.T = 5\n", "bad value"),
        ("model.p = 3\nmodel.T = 5\n", "missing required key 'model.theta_true'"),
        ("model.p 4\n", "expected 'key = value'"),
        ("estimate.solver = newton\nmodel.p = 3\n", "bad value for 'estimate.solver'"),
    ],
)
def test_parse_errors_are_line_precise(text, fragment):
    with pytest.raises(ConfigError, match=".*"):
        try:
            parse_config(text, source="cfg")
        except ConfigError as exc:
            assert fragment in str(exc)
            raise


def test_delta_sq_scientific_format():
    rec = BenchRecord(
        method="slstd",
        p=4,
        T=10,
        n_states=3000,
        replications=3,
        theta_mean=(1.0, 2.0, 1.0, 9.0),
        theta_sd=(0.1, 0.1, 0.1, 0.1),
        time_mean=0.5,
        time_sd=0.01,
        delta_mean=22.0,
        delta_sd=29.0,
    )
    row = record_row(rec)
    assert row["delta_sq_mean"] == "2.2E+01"
    assert row["delta_sq_sd"] == "2.9E+01"
    masked = record_row(rec, no_timing=True)
    assert masked["time_mean_s"] == "" and masked["time_sd_s"] == ""


def test_emit_csv_null_rows_have_no_numerics(tmp_path):
    ok = BenchRecord("slstd", 4, 20, 24000, 2, time_mean=1.0, time_sd=0.1)
    null = BenchRecord("kw", 5, 40, 7_680_000, status="null_memory_cap")
    out = tmp_path / "r.csv"
    with out.open("w") as fh:
        emit_csv([ok, null], fh)
    lines = out.read_text().splitlines()
    assert lines[0].startswith("method,p,T,n_states,replications")
    null_line = lines[2].split(",")
    assert null_line[0] == "kw" and null_line[-1] == "null_memory_cap"
    assert all(cell == "" for cell in null_line[5:-1])


@pytest.fixture()
def cfg_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(SMALL_CFG)
    return path


def test_cli_simulate_solve_estimate(cfg_file, tmp_path, capsys):
    data = tmp_path / "panel.csv"
    assert main(["simulate", "--config", str(cfg_file), "--out", str(data)]) == 0
    assert data.exists() and data.with_name("panel.csv.meta.json").exists()

    assert (
        main(["solve", "--config", str(cfg_file), "--method", "exact"]) == 0
    )
    diag = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert diag["delta_sq_full"] < 1e-12

    est_out = tmp_path / "est.json"
    code = main(
        [
            "estimate",
            "--config",
            str(cfg_file),
            "--data",
            str(data),
            "--method",
            "exact",
            "--out",
            str(est_out),
        ]
    )
    assert code == 0
    res = json.loads(est_out.read_text())
    assert len(res["theta_hat"]) == 4


def test_cli_replicate_deterministic_with_no_timing(cfg_file, tmp_path):
    out1 = tmp_path / "r1.csv"
    out2 = tmp_path / "r2.csv"
    args = ["replicate", "--config", str(cfg_file), "--no-timing"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert (tmp_path / "r1.csv.log.jsonl").exists()


def test_cli_bench_time_runs(cfg_file, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["bench-time", "--config", str(cfg_file), "--out", str(out)]) == 0
    text = out.read_text().splitlines()
    assert len(text) == 3  # header + 2 methods at one cell
    assert text[1].split(",")[-1] == "ok"


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("model.p = 3\nmodel.nope = 1\n")
    assert main(["replicate", "--config", str(bad)]) == 1
    missing = tmp_path / "missing.cfg"
    assert main(["replicate", "--config", str(missing)]) == 1
    # caps produce exit code 3 with partial results
    capped = tmp_path / "capped.cfg"
    capped.write_text(
        "model.p = 4\nmodel.T = 12\nmodel.theta_true = 1,2,1,9\n"
        "bench.methods = kw\nbench.cells = 4:12\nbench.timing_reps = 1\n"
        "baselines.memory_cap_bytes = 1000\n"
    )
    out = tmp_path / "capped.csv"
    assert main(["bench-time", "--config", str(capped), "--out", str(out)]) == 3
    assert "null_memory_cap" in out.read_text()


def test_cli_trace_error(tmp_path, capsys):
    cfg = tmp_path / "trace.cfg"
    cfg.write_text(
        "model.p = 4\nmodel.T = 8\nmodel.theta_true = 1,2,1,9\n"
        "model.reward_kink = true\nsim.n_agents = 60\nbench.seed = 5\n"
        "slstd.max_passes = 20\n"
    )
    out = tmp_path / "trace.csv"
    assert main(["trace-error", "--config", str(cfg), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "age,seq_max_abs_error,seq_max_target"
    assert len(lines) == 1 + 8  # header + one row per age
    summary = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert summary["delta_sq_sequential"] >= 0.0
