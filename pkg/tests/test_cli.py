"""End-to-end CLI runs on tiny configs."""

import json
import os

import numpy as np
import pytest

from samlab.cli import main


def _cfg(tmp_path, name, doc):
    doc = dict(doc, schema_version=1)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _read_csv(path):
    lines = open(path).read().splitlines()
    assert lines[0].startswith("#config-hash=")
    assert lines[1].startswith("#seed=")
    header = lines[2].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[3:]]


def test_train_subcommand_writes_csv(tmp_path):
    cfg = _cfg(tmp_path, "train.json", {
        "dataset": {"d": 8, "n": 6, "k": 2},
        "gamma": 0.05, "rho": 0.05, "method": "onesam",
        "alpha": 0.1, "total_steps": 200000, "seeds": [0, 1]})
    out = str(tmp_path / "out")
    assert main(["train", "--config", cfg, "--output", out]) == 0
    rows = _read_csv(os.path.join(out, "train.csv"))
    assert len(rows) == 2
    assert {r["seed"] for r in rows} == {"0", "1"}
    assert all(r["status"] == "ok" for r in rows)


def test_train_is_deterministic_across_invocations(tmp_path):
    cfg = _cfg(tmp_path, "train.json", {
        "dataset": {"d": 8, "n": 6, "k": 2},
        "gamma": 0.05, "method": "gd", "alpha": 0.1,
        "total_steps": 5000, "seeds": [3]})
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["train", "--config", cfg, "--output", out_a]) == 0
    assert main(["train", "--config", cfg, "--output", out_b]) == 0
    csv_a = open(os.path.join(out_a, "train.csv")).read()
    csv_b = open(os.path.join(out_b, "train.csv")).read()
    assert csv_a == csv_b


def test_seed_offset_shifts_seeds(tmp_path):
    cfg = _cfg(tmp_path, "train.json", {
        "dataset": {"d": 6, "n": 4, "k": 1},
        "gamma": 0.05, "method": "gd", "alpha": 0.1,
        "total_steps": 1000, "seeds": [0]})
    out = str(tmp_path / "out")
    assert main(["train", "--config", cfg, "--output", out, "--seed-offset", "5"]) in (0, 2)
    rows = _read_csv(os.path.join(out, "train.csv"))
    assert rows[0]["seed"] == "5"


def test_experiment_name_mismatch_fails(tmp_path, capsys):
    cfg = _cfg(tmp_path, "x.json", {"experiment": "switch", "gamma": 0.05})
    assert main(["train", "--config", cfg, "--output", str(tmp_path / "o")]) == 1
    assert "declares experiment" in capsys.readouterr().err


def test_jobs_flag_produces_identical_output(tmp_path):
    cfg = _cfg(tmp_path, "grid.json", {
        "dataset": {"d": 8, "n": 6, "k": 2},
        "gamma": 0.1, "rho_grid": [0.0, 0.05], "alpha": 0.1,
        "total_steps": 20000, "seeds": [0, 1]})
    out1, out2 = str(tmp_path / "j1"), str(tmp_path / "j2")
    assert main(["compare_rho_grid", "--config", cfg, "--output", out1]) == 0
    assert main(["compare_rho_grid", "--config", cfg, "--output", out2, "--jobs", "2"]) == 0
    a = open(os.path.join(out1, "rho_grid.csv")).read()
    b = open(os.path.join(out2, "rho_grid.csv")).read()
    assert a == b


def test_sharpness_grid_subcommand(tmp_path):
    cfg = _cfg(tmp_path, "sh.json", {
        "d": 5, "n": 16, "rho_grid": [0.1, 0.2], "m_grid": [1, 4],
        "iters": 5, "seeds": [0]})
    out = str(tmp_path / "out")
    assert main(["sharpness_grid", "--config", cfg, "--output", out]) == 0
    rows = _read_csv(os.path.join(out, "sharpness_grid.csv"))
    assert len(rows) == 4
    assert all(r["method"] == "pga_lower_bound" for r in rows)
    # sharpness grows with rho at fixed m
    by = {(float(r["rho"]), int(r["m"])): float(r["mean_sharpness"]) for r in rows}
    assert by[(0.2, 1)] > by[(0.1, 1)]


def test_potential_plot_subcommand(tmp_path):
    cfg = _cfg(tmp_path, "pot.json", {"alpha_scales": [0.1, 1.0], "num": 5})
    out = str(tmp_path / "out")
    assert main(["potential_plot", "--config", cfg, "--output", out]) == 0
    rows = _read_csv(os.path.join(out, "potential.csv"))
    assert len(rows) == 2 * 5 * 5
    # phi is zero at the origin for every scale
    origin = [r for r in rows if r["beta1"] == "0" and r["beta2"] == "0"]
    assert all(float(r["phi"]) == 0.0 for r in origin)


def test_interpolate_subcommand(tmp_path):
    d = 6
    w_a = np.zeros(2 * d)
    w_b = np.ones(2 * d)
    pa = tmp_path / "wa.json"
    pb = tmp_path / "wb.json"
    pa.write_text(json.dumps(w_a.tolist()))
    pb.write_text(json.dumps(w_b.tolist()))
    cfg = _cfg(tmp_path, "interp.json", {
        "dataset": {"d": d, "n": 4, "k": 2}, "data_seed": 0,
        "params_a_file": str(pa), "params_b_file": str(pb),
        "num_points": 11, "seeds": [0]})
    out = str(tmp_path / "out")
    assert main(["interpolate", "--config", cfg, "--output", out]) == 0
    rows = _read_csv(os.path.join(out, "interpolate.csv"))
    assert len(rows) == 11
    ts = [float(r["t"]) for r in rows]
    assert ts[0] == -0.5 and ts[-1] == 1.5


def test_bias_verify_subcommand(tmp_path):
    cfg = _cfg(tmp_path, "bv.json", {
        "dataset": {"d": 8, "n": 6, "k": 2}, "alpha": 0.1, "rho": 0.01,
        "total_steps": 2000000, "seeds": [0]})
    out = str(tmp_path / "out")
    assert main(["bias_verify", "--config", cfg, "--output", out]) == 0
    rows = _read_csv(os.path.join(out, "bias_verify.csv"))
    assert len(rows) == 1
    assert float(rows[0]["err_gd"]) < 1e-2
    assert os.path.exists(os.path.join(out, "bias_verify_seed0.json"))
    doc = json.load(open(os.path.join(out, "bias_verify_seed0.json")))
    assert set(doc["converged"]) == {"gd", "onesam", "nsam"}


def test_switch_subcommand(tmp_path):
    cfg = _cfg(tmp_path, "sw.json", {
        "dataset": {"d": 8, "n": 6, "k": 2}, "alpha": 0.1, "gamma": 0.05,
        "first": "gd", "second": "onesam", "rho_first": 0.0,
        "rho_second": 0.05, "switch_step": 200, "total_steps": 100200,
        "interp_points": 5, "seeds": [0]})
    out = str(tmp_path / "out")
    assert main(["switch", "--config", cfg, "--output", out]) in (0, 2)
    rows = _read_csv(os.path.join(out, "switch.csv"))
    assert len(rows) == 1
    interp = _read_csv(os.path.join(out, "switch_interp_seed0.csv"))
    assert len(interp) == 5


def test_convergence_check_subcommand(tmp_path, capsys):
    cfg = _cfg(tmp_path, "cc.json", {
        "T": 2000, "b": 2, "stochastic_seeds": 5, "d": 8, "seeds": [0]})
    out = str(tmp_path / "out")
    assert main(["convergence_check", "--config", cfg, "--output", out]) == 0
    rows = _read_csv(os.path.join(out, "convergence.csv"))
    assert len(rows) == 6
    assert all(r["satisfied"] == "True" for r in rows)
    printed = capsys.readouterr().out
    assert printed.count("pass") == 6


def test_relu_demo_subcommand(tmp_path):
    cfg = _cfg(tmp_path, "relu.json", {
        "hidden": 8, "gamma": 0.02, "rho": 0.05, "total_steps": 500,
        "seeds": [0]})
    out = str(tmp_path / "out")
    # a 500-step run does not reach the fit threshold: soft-failure exit code
    assert main(["relu_demo", "--config", cfg, "--output", out]) in (0, 2)
    rows = _read_csv(os.path.join(out, "relu_demo.csv"))
    assert {r["method"] for r in rows} == {"erm", "sam"}
    assert os.path.exists(os.path.join(out, "relu_fit_erm_seed0.csv"))


def test_output_env_var_is_respected(tmp_path, monkeypatch):
    cfg = _cfg(tmp_path, "pot.json", {"alpha_scales": [1.0], "num": 3})
    env_out = str(tmp_path / "env_out")
    monkeypatch.setenv("SAMLAB_OUTPUT", env_out)
    assert main(["potential_plot", "--config", cfg]) == 0
    assert os.path.exists(os.path.join(env_out, "potential.csv"))
