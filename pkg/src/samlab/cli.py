"""Command-line experiment runner.

Usage: samlab <subcommand> --config <file> [--jobs N] [--output DIR]
[--seed-offset K]. Configs are TOML or JSON (by extension) with a
schema_version field; every output CSV starts with provenance comments
(#config-hash, #seed). Exit code 0 when all runs completed and hard
assertions passed, 2 when some runs soft-failed (divergence, max_steps)
but outputs were still written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import convergence, experiments, reporting, sharpness
from .datasets import Dataset, gen_1d_regression, gen_sparse_regression, population_test_loss
from .models import DiagonalLinearNet, LinearMarginModel, QuadraticObjective
from .rng import stream

EXPERIMENTS = (
    "train",
    "compare_rho_grid",
    "bias_verify",
    "switch",
    "interpolate",
    "sharpness_grid",
    "convergence_check",
    "relu_demo",
    "potential_plot",
)


def _dataset_from_config(cfg: dict) -> callable:
    ds = cfg.get("dataset", {})
    kind = ds.get("kind", "sparse_regression")
    if kind == "sparse_regression":
        d = int(ds.get("d", 30))
        n = int(ds.get("n", 20))
        k = int(ds.get("k", 3))
        return lambda seed: gen_sparse_regression(d, n, k, seed)
    if kind == "piecewise_1d":
        return lambda seed: gen_1d_regression(seed)
    raise ValueError(f"unknown dataset kind {kind!r}")


def _seeds(cfg: dict, offset: int) -> list:
    return [int(s) + offset for s in cfg.get("seeds", [0])]


def _run_parallel(jobs: int, fn, seeds: list) -> list:
    """Run fn(seed) for every seed, `jobs` at a time, results in seed order."""
    if jobs <= 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, seeds))


# ---------------------------------------------------------------------------
# Subcommands: each returns (rows_or_docs_written, soft_failures)
# ---------------------------------------------------------------------------


def cmd_train(cfg, out_dir, seeds, jobs, cfg_hash):
    make = _dataset_from_config(cfg)
    alpha = cfg.get("alpha", 0.05)
    gamma = float(cfg["gamma"])
    rho = float(cfg.get("rho", 0.0))
    method = cfg.get("method", "gd")
    total_steps = int(cfg.get("total_steps", experiments.DEFAULT_MAX_STEPS))

    def one(seed):
        data = make(seed)
        if method in experiments.FLOW_METHODS:
            res = experiments.run_flow(data, alpha, gamma, rho, method, total_steps)
        else:
            res = experiments.run_stochastic(data, alpha, gamma, rho, method,
                                             int(cfg.get("batch_size", 1)),
                                             total_steps, seed)
        status = "diverged" if res.diverged else ("ok" if res.converged else "max_steps")
        return {"seed": seed, "method": method, "rho": res.rho,
                "train_loss": res.final_loss,
                "test_loss": population_test_loss(res.beta, data.beta_star)
                if data.beta_star is not None else float("nan"),
                "l1_beta": float(np.linalg.norm(res.beta, 1)),
                "steps": res.steps, "status": status}

    rows = _run_parallel(jobs, one, seeds)
    header = ["seed", "method", "rho", "train_loss", "test_loss", "l1_beta", "steps", "status"]
    reporting.write_csv(os.path.join(out_dir, "train.csv"), header, rows, cfg_hash, seeds)
    return rows, sum(r["status"] == "diverged" for r in rows)


def cmd_compare_rho_grid(cfg, out_dir, seeds, jobs, cfg_hash):
    make = _dataset_from_config(cfg)
    alpha = cfg.get("alpha", 0.05)
    gamma = float(cfg["gamma"])
    rho_grid = [float(r) for r in cfg["rho_grid"]]
    max_steps = int(cfg.get("total_steps", experiments.DEFAULT_MAX_STEPS))

    def one(seed):
        return experiments.rho_grid_rows(make(seed), alpha, gamma, rho_grid,
                                         seed, max_steps)

    rows = [r for chunk in _run_parallel(jobs, one, seeds) for r in chunk]
    header = ["method", "rho", "seed", "train_loss", "test_loss", "l1_beta", "steps", "status"]
    reporting.write_csv(os.path.join(out_dir, "rho_grid.csv"), header, rows, cfg_hash, seeds)
    return rows, sum(r["status"] == "diverged" for r in rows)


def cmd_bias_verify(cfg, out_dir, seeds, jobs, cfg_hash):
    make = _dataset_from_config(cfg)
    alpha = cfg.get("alpha", 0.05)
    rho = float(cfg.get("rho", 0.02))
    max_steps = int(cfg.get("total_steps", 2_000_000))

    def one(seed):
        data = make(seed)
        gamma = cfg.get("gamma")
        if gamma is None:
            gamma, _ = experiments.flow_scale_gamma(data, np.full(data.d, float(alpha)))
        report = experiments.bias_verify_report(data, alpha, rho, float(gamma), max_steps)
        report["seed"] = seed
        reporting.write_json(os.path.join(out_dir, f"bias_verify_seed{seed}.json"),
                             report, cfg_hash)
        return report

    reports = _run_parallel(jobs, one, seeds)
    rows = [{"seed": r["seed"],
             "l1_gd": r["l1_norms"]["gd"], "l1_onesam": r["l1_norms"]["onesam"],
             "l1_nsam": r["l1_norms"]["nsam"],
             "err_gd": r["linf_rel_err"]["gd"], "err_onesam": r["linf_rel_err"]["onesam"],
             "err_nsam": r["linf_rel_err"]["nsam"]} for r in reports]
    header = ["seed", "l1_gd", "l1_onesam", "l1_nsam", "err_gd", "err_onesam", "err_nsam"]
    reporting.write_csv(os.path.join(out_dir, "bias_verify.csv"), header, rows, cfg_hash, seeds)
    soft = sum(not all(r["converged"].values()) for r in reports)
    return reports, soft


def cmd_switch(cfg, out_dir, seeds, jobs, cfg_hash):
    make = _dataset_from_config(cfg)
    alpha = cfg.get("alpha", 0.05)
    gamma = float(cfg["gamma"])
    first = cfg.get("first", "gd")
    second = cfg.get("second", "onesam")
    rho_first = float(cfg.get("rho_first", 0.0))
    rho_second = float(cfg.get("rho_second", 10.0))
    switch_step = int(cfg.get("switch_step", 10_000))
    total_steps = int(cfg.get("total_steps", switch_step + experiments.DEFAULT_MAX_STEPS))

    def one(seed):
        data = make(seed)
        res = experiments.switch_run(data, alpha, gamma, first, second,
                                     rho_first, rho_second, switch_step, total_steps)
        model = DiagonalLinearNet(data.d)
        interp = experiments.interpolate_losses(
            {"train_loss": lambda w: model.loss(w, data),
             "test_loss": lambda w: population_test_loss(model.beta(w), data.beta_star)},
            res["phase1"].params(), res["phase2"].params(),
            num_points=int(cfg.get("interp_points", 41)))
        reporting.write_csv(os.path.join(out_dir, f"switch_interp_seed{seed}.csv"),
                            ["t", "train_loss", "test_loss"], interp, cfg_hash, seed)
        return {"seed": seed,
                "switch_train_loss": res["switch_train_loss"],
                "switch_test_loss": res["switch_test_loss"],
                "final_train_loss": res["final_train_loss"],
                "final_test_loss": res["final_test_loss"],
                "status": "diverged" if res["phase2"].diverged else "ok"}

    rows = _run_parallel(jobs, one, seeds)
    header = ["seed", "switch_train_loss", "switch_test_loss",
              "final_train_loss", "final_test_loss", "status"]
    reporting.write_csv(os.path.join(out_dir, "switch.csv"), header, rows, cfg_hash, seeds)
    return rows, sum(r["status"] != "ok" for r in rows)


def cmd_interpolate(cfg, out_dir, seeds, jobs, cfg_hash):
    make = _dataset_from_config(cfg)
    data = make(int(cfg.get("data_seed", seeds[0] if seeds else 0)))
    with open(cfg["params_a_file"]) as fh:
        w_a = np.array(json.load(fh), dtype=np.float64)
    with open(cfg["params_b_file"]) as fh:
        w_b = np.array(json.load(fh), dtype=np.float64)
    model = DiagonalLinearNet(data.d)
    fns = {"train_loss": lambda w: model.loss(w, data)}
    if data.beta_star is not None:
        fns["test_loss"] = lambda w: population_test_loss(model.beta(w), data.beta_star)
    t_range = (0.0, 1.0) if cfg.get("endpoints_only") else (-0.5, 1.5)
    rows = experiments.interpolate_losses(fns, w_a, w_b,
                                          num_points=int(cfg.get("num_points", 41)),
                                          t_range=t_range)
    reporting.write_csv(os.path.join(out_dir, "interpolate.csv"),
                        list(rows[0].keys()), rows, cfg_hash, seeds)
    return rows, 0


def cmd_sharpness_grid(cfg, out_dir, seeds, jobs, cfg_hash):
    d = int(cfg.get("d", 10))
    n = int(cfg.get("n", 64))
    rho_grid = [float(r) for r in cfg.get("rho_grid", [0.05, 0.1, 0.2])]
    m_grid = [int(m) for m in cfg.get("m_grid", [1, 4, 16])]
    iters = int(cfg.get("iters", 100))

    def one(seed):
        rng = stream(seed, "data")
        X = rng.standard_normal((n, d))
        w_true = rng.standard_normal(d)
        y = np.sign(X @ w_true)
        y[y == 0] = 1.0
        data = Dataset(X=X, y=y)
        model = LinearMarginModel(d)
        w = w_true / np.linalg.norm(w_true)
        out = []
        for rho in rho_grid:
            for m in m_grid:
                rep = sharpness.m_sharpness(model, w, data, m, rho, iters=iters)
                out.append({"seed": seed, "rho": rho, "m": m,
                            "mean_sharpness": rep.mean_sharpness,
                            "method": rep.method,
                            "flagged": len(rep.flagged_batches)})
        return out

    rows = [r for chunk in _run_parallel(jobs, one, seeds) for r in chunk]
    header = ["seed", "rho", "m", "mean_sharpness", "method", "flagged"]
    reporting.write_csv(os.path.join(out_dir, "sharpness_grid.csv"), header, rows, cfg_hash, seeds)
    return rows, 0


def cmd_convergence_check(cfg, out_dir, seeds, jobs, cfg_hash):
    T = int(cfg.get("T", 10_000))
    b = int(cfg.get("b", 4))
    n_seeds = int(cfg.get("stochastic_seeds", 20))
    d = int(cfg.get("d", 20))
    rows = []
    soft = 0
    for seed in seeds:
        problem = QuadraticObjective.random(d=d, n=32, beta_smooth=1.0, mu=0.1,
                                            sigma=0.5, seed=seed)
        for tid in convergence.THEOREM_IDS:
            res = convergence.verify_rate(tid, problem, T=T, b=b, seeds=n_seeds,
                                          seed0=seed * 1000)
            rows.append({"seed": seed, "theorem_id": tid,
                         "satisfied": res.satisfied, "margin": res.margin})
            soft += not res.satisfied
            reporting.write_json(
                os.path.join(out_dir, f"rate_{tid}_seed{seed}.json"),
                res.to_dict(), cfg_hash)
    header = ["seed", "theorem_id", "satisfied", "margin"]
    reporting.write_csv(os.path.join(out_dir, "convergence.csv"), header, rows, cfg_hash, seeds)
    for row in rows:
        print(f"{row['theorem_id']:22s} seed={row['seed']:<4d} "
              f"{'pass' if row['satisfied'] else 'FAIL'}  margin={row['margin']:.3e}")
    return rows, soft


def cmd_relu_demo(cfg, out_dir, seeds, jobs, cfg_hash):
    data = gen_1d_regression(int(cfg.get("data_seed", 0)))
    runs = experiments.relu_demo_runs(
        data,
        hidden=int(cfg.get("hidden", 100)),
        gamma=float(cfg.get("gamma", 0.02)),
        rho=float(cfg.get("rho", 0.1)),
        total_steps=int(cfg.get("total_steps", 50_000)),
        seeds=seeds or range(5))
    rows = []
    for run in runs:
        rows.append({"seed": run["seed"], "method": run["method"],
                     "train_mse": run["train_mse"], "path_norm": run["path_norm"],
                     "status": "ok" if run["train_mse"] < 1e-4 else "not_converged"})
        fit = [{"x": x, "f": f} for x, f in zip(run["x_grid"], run["f_grid"])]
        reporting.write_csv(
            os.path.join(out_dir, f"relu_fit_{run['method']}_seed{run['seed']}.csv"),
            ["x", "f"], fit, cfg_hash, run["seed"])
    header = ["seed", "method", "train_mse", "path_norm", "status"]
    reporting.write_csv(os.path.join(out_dir, "relu_demo.csv"), header, rows, cfg_hash, seeds)
    return rows, sum(r["status"] != "ok" for r in rows)


def cmd_potential_plot(cfg, out_dir, seeds, jobs, cfg_hash):
    rows = experiments.potential_plot_rows(
        [float(a) for a in cfg.get("alpha_scales", [0.1, 1.0, 10.0])],
        grid_range=tuple(cfg.get("grid_range", (-2.0, 2.0))),
        num=int(cfg.get("num", 41)))
    header = ["alpha", "beta1", "beta2", "phi", "phi_normalized"]
    reporting.write_csv(os.path.join(out_dir, "potential.csv"), header, rows, cfg_hash, seeds)
    return rows, 0


_COMMANDS = {
    "train": cmd_train,
    "compare_rho_grid": cmd_compare_rho_grid,
    "bias_verify": cmd_bias_verify,
    "switch": cmd_switch,
    "interpolate": cmd_interpolate,
    "sharpness_grid": cmd_sharpness_grid,
    "convergence_check": cmd_convergence_check,
    "relu_demo": cmd_relu_demo,
    "potential_plot": cmd_potential_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="samlab",
                                     description="Desk-scale SAM experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML or JSON config file")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--output", default=None, help="output directory override")
        p.add_argument("--seed-offset", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = reporting.load_config(args.config)
    declared = cfg.get("experiment")
    if declared is not None and declared != args.command:
        print(f"config declares experiment={declared!r} but subcommand is "
              f"{args.command!r}", file=sys.stderr)
        return 1
    out_dir = reporting.output_dir(cfg, args.output)
    os.makedirs(out_dir, exist_ok=True)
    seeds = _seeds(cfg, args.seed_offset)
    cfg_hash = reporting.config_hash(cfg)
    _, soft = _COMMANDS[args.command](cfg, out_dir, seeds, args.jobs, cfg_hash)
    return 2 if soft else 0


if __name__ == "__main__":
    sys.exit(main())
