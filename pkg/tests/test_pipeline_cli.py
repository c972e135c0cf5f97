import csv
import importlib.util
import json
import os
from pathlib import Path

import pytest

from qzeno.estimation import HmmParams, sample_hmm_record
from qzeno.pipeline_cli import _global, build_parser, main

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"

SMALL_RUN = """
[run]
lambda_grid = 0.5,1.0
n_traj = 40
duration = 1.6us
"""


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def manifest(run_dir):
    return json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))


def test_parser_lists_verbs():
    text = build_parser().format_help()
    for verb in ("ideal", "transitions", "simulate", "extract", "calibrate", "scan"):
        assert verb in text


def test_ideal_tables(tmp_run_dir):
    assert main(["ideal", "--lambda", "2", "--points", "41", "--duration", "10us", "-q"]) == 0
    outputs = manifest(tmp_run_dir)["outputs"]
    for name in ("ideal_theta.csv", "ideal_survival.csv", "ideal_angular.csv", "ideal_xi.csv",
                 "ideal_transitions.json", "config.json", "_meta.json"):
        assert name in outputs
    rows = read_rows(tmp_run_dir / "ideal_theta.csv")
    assert len(rows) == 41 and float(rows[0]["p1"]) == pytest.approx(0.0, abs=1e-12)
    trans = json.loads((tmp_run_dir / "ideal_transitions.json").read_text(encoding="utf-8"))
    assert trans["lambda_c3"] == 2.0


def test_ideal_json_format(tmp_run_dir):
    assert main(["ideal", "--theta", "--format", "json", "--points", "5", "-q"]) == 0
    rows = json.loads((tmp_run_dir / "ideal_theta.json").read_text(encoding="utf-8"))
    assert len(rows) == 5 and set(rows[0]) == {"t_s", "theta_rad", "p1"}
    assert not (tmp_run_dir / "ideal_survival.json").exists()


def test_transitions_ideal_only(tmp_run_dir):
    assert main(["transitions", "--ideal", "-q"]) == 0
    rows = read_rows(tmp_run_dir / "transitions.csv")
    assert [r["params"] for r in rows] == ["ideal"]
    assert float(rows[0]["lambda_c2"]) == pytest.approx(1.1547, abs=1e-3)


def test_simulate_reruns_reproduce_checksums(tmp_run_dir, tmp_path):
    cfg = tmp_path / "small.ini"
    cfg.write_text(SMALL_RUN, encoding="utf-8")
    assert main(["simulate", "--config", str(cfg), "--seed", "5", "-q"]) == 0
    first = manifest(tmp_run_dir)["outputs"]
    for name in ("conditional.csv", "ensemble.csv", "master.csv", "noclick_hist.csv", "dwell_0.5000.csv",
                 "stores/store_0.5000.npz", "stores/store_dwell_1.0000.npz"):
        assert name in first
    assert main(["simulate", "--config", str(cfg), "--seed", "5", "-q"]) == 0
    assert manifest(tmp_run_dir)["outputs"] == first

    # two grid points are too few for any extraction stage; errors are reported per stage
    assert main(["extract", "--config", str(cfg), "--seed", "5", "--n-boot", "100", "-q"]) == 1
    result = json.loads((tmp_run_dir / "extraction.json").read_text(encoding="utf-8"))
    for key in ("lambda_1", "lambda_2", "lambda_3"):
        assert "error" in result[key]


def test_calibrate(tmp_run_dir, tmp_path):
    path = tmp_path / "records.csv"
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["label", "outcome"])
        for i, label in enumerate((1.0, 2.0)):
            p = HmmParams(2e4 * label ** 2, 2.5e5, 0.0, 0.0, 0.0, 0.0, 320e-9)
            for o in sample_hmm_record(p, 20_000, seed=i):
                w.writerow([label, int(o)])
    assert main(["calibrate", "--records", str(path), "--dt", "320ns", "-q"]) == 0
    rows = read_rows(tmp_run_dir / "calibration.csv")
    assert [float(r["label"]) for r in rows] == [1.0, 2.0]
    summary = json.loads((tmp_run_dir / "calibration.json").read_text(encoding="utf-8"))
    assert summary["quad_coeff_per_s"] > 0


def test_scan(tmp_run_dir):
    assert main(["scan", "--param", "kappa", "--values", "1.0,2.5", "-q"]) == 0
    rows = read_rows(tmp_run_dir / "scan.csv")
    assert [float(r["param_value"]) for r in rows] == [1.0, 2.5]


def test_errors_exit_with_code_two(tmp_run_dir, tmp_path):
    assert main(["calibrate", "--records", str(tmp_path / "missing.csv"), "-q"]) == 2
    assert main(["simulate", "--lambda-grid", "1.0,0.5", "-q"]) == 2


def test_flag_over_env_over_config(monkeypatch):
    monkeypatch.setenv("QZENO_SEED", "11")
    assert _global(None, "QZENO_SEED", 7, int) == 11
    assert _global(3, "QZENO_SEED", 7, int) == 3
    monkeypatch.delenv("QZENO_SEED")
    assert _global(None, "QZENO_SEED", 7, int) == 7


def test_transitions_skips_custom_row_equal_to_realistic(tmp_run_dir, tmp_path):
    assert main(["transitions", "-q"]) == 0
    assert [r["params"] for r in read_rows(tmp_run_dir / "transitions.csv")] == ["ideal", "realistic"]
    cfg = tmp_path / "dephased.ini"
    cfg.write_text("[params]\ngamma_phi = 1/20us\n", encoding="utf-8")
    assert main(["transitions", "--config", str(cfg), "-q"]) == 0
    assert [r["params"] for r in read_rows(tmp_run_dir / "transitions.csv")] == ["ideal", "realistic", "custom"]


def test_simulate_runs_transitions_and_hmm_analyses(tmp_run_dir, tmp_path):
    cfg = tmp_path / "analyses.ini"
    cfg.write_text(SMALL_RUN + "\n[analyses]\nenabled = conditional,transitions,hmm\n", encoding="utf-8")
    assert main(["simulate", "--config", str(cfg), "--seed", "5", "-q"]) == 0
    outputs = manifest(tmp_run_dir)["outputs"]
    assert "hmm.csv" in outputs and "model_transitions.json" in outputs
    assert "ensemble.csv" not in outputs
    rows = read_rows(tmp_run_dir / "hmm.csv")
    assert [float(r["lambda"]) for r in rows] == [0.5, 1.0]
    assert all(int(r["n_windows"]) == 40 * 5 for r in rows)
    trans = json.loads((tmp_run_dir / "model_transitions.json").read_text(encoding="utf-8"))
    assert trans["lambda_c1"] == pytest.approx(1.18, abs=0.01)
    assert trans["lambda_c3"] == pytest.approx(1.25, abs=0.01)


def test_out_root_precedence(tmp_path, monkeypatch):
    from qzeno.config import ExperimentConfig
    from qzeno.pipeline_cli import resolve_out_root
    cfg = ExperimentConfig(output_dir=str(tmp_path / "from_config"))
    monkeypatch.delenv("QZENO_OUT_ROOT", raising=False)
    assert resolve_out_root(None, cfg) == str(tmp_path / "from_config")
    assert resolve_out_root("flag", cfg) == "flag"
    monkeypatch.setenv("QZENO_OUT_ROOT", "env")
    assert resolve_out_root(None, cfg) == "env"


def test_sweep_copies_report_from_configured_output_dir(tmp_path, monkeypatch):
    out = tmp_path / "custom"
    cfg = tmp_path / "sweep.ini"
    cfg.write_text(f"[run]\noutput_dir = {out}\n", encoding="utf-8")
    for name in ("QZENO_OUT_ROOT", "QZENO_SEED"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("QZENO_CONFIG", str(cfg))
    monkeypatch.setenv("RUN_ID", "sweep")
    monkeypatch.setenv("SEEDS", "7")
    monkeypatch.chdir(tmp_path)
    spec = importlib.util.spec_from_file_location("run_sweep", SCRIPTS / "run_sweep.py")
    sweep = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(sweep)

    def fake_main(argv):
        if argv[0] == "extract":
            run_dir = out / os.environ["RUN_ID"]
            run_dir.mkdir(parents=True)
            (run_dir / "extraction.json").write_text('{"seed": 7}', encoding="utf-8")
        return 0

    monkeypatch.setattr(sweep, "main", fake_main)
    monkeypatch.setattr(sweep, "REPORT_DIR", str(tmp_path / "reports"))
    assert sweep.main_sweep() == 0
    assert json.loads((tmp_path / "reports" / "7.json").read_text(encoding="utf-8")) == {"seed": 7}
