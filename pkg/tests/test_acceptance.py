"""Acceptance gate: ten end-to-end checks, one verdict line each.

Each test prints a single ``criterion N [...]: PASS/FAIL`` line (echoed in the
pytest summary via -rA) and then asserts the verdict. Tolerances and instance
counts are part of the contract and are stated inline.
"""

import time

import numpy as np
import pytest

from samlab import bias, experiments
from samlab.convergence import (
    THEOREM_IDS,
    check_alignment,
    check_descent,
    check_stochastic_alignment,
    check_stochastic_descent,
    probe_alignment_tightness,
    probe_descent_tightness,
    verify_rate,
)
from samlab.datasets import Dataset, population_test_loss
from samlab.models import DiagonalLinearNet, LinearMarginModel, QuadraticObjective
from samlab.optim import (
    OptimizerSpec,
    full_batch_1sam_step,
    full_batch_nsam_step,
    msam_step_shared_batch,
    nsam_step_fresh_batch,
    run_training,
    sgd_step,
)
from samlab.rng import stream
from samlab.sharpness import linear_1_sharpness_closed_form, m_sharpness

SEEDS = range(5)


def _verdict(num: int, desc: str, ok: bool, detail: str = "") -> None:
    line = f"criterion {num} [{desc}]: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def _family(seed):
    return experiments.fig12_dataset(seed)


# ---------------------------------------------------------------------------
# 1. Generalization ordering of the training methods
# ---------------------------------------------------------------------------


def test_criterion_1_generalization_ordering():
    # Stochastic (batch size 1) at alpha = 0.01, gamma = rho = 1/d.
    sto = {m: [] for m in ("sgd", "msam", "nsam_fresh")}
    worst_seed_time = 0.0
    converged = True
    for seed in SEEDS:
        t0 = time.time()
        data = _family(seed)
        rows = experiments.stochastic_grid_rows(
            data, np.full(data.d, 0.01), gamma=1.0 / 30, rho=1.0 / 30,
            batch_size=1, total_steps=2_000_000, seed=seed, tol=1e-8)
        for r in rows:
            converged &= r["status"] == "ok"
            sto[r["method"]].append(r["test_loss"])
        worst_seed_time = max(worst_seed_time, time.time() - t0)
    med = {m: float(np.median(v)) for m, v in sto.items()}
    sto_ok = (converged
              and 2.0 * med["msam"] <= med["sgd"]
              and 2.0 * med["msam"] <= med["nsam_fresh"])

    # Full batch at alpha = 0.05, step 0.25, per-method best over a rho grid.
    grid = [0.01, 0.05, 0.1, 0.2, 0.3]
    best = {m: [] for m in ("gd", "onesam", "nsam")}
    fb_ok = True
    for seed in SEEDS:
        t0 = time.time()
        data = _family(seed)
        rows = experiments.rho_grid_rows(data, np.full(data.d, 0.05),
                                         gamma=0.25, rho_grid=grid, seed=seed,
                                         max_steps=200_000, tol=1e-8)
        for method in best:
            ok_rows = [r for r in rows if r["method"] == method and r["status"] == "ok"]
            fb_ok &= bool(ok_rows)  # at least one run interpolates to < 1e-8
            if ok_rows:
                best[method].append(min(r["test_loss"] for r in ok_rows))
        worst_seed_time = max(worst_seed_time, time.time() - t0)
    fmed = {m: float(np.median(v)) for m, v in best.items() if v}
    fb_ok = (fb_ok
             and 2.0 * fmed["onesam"] <= fmed["gd"]
             and 2.0 * fmed["onesam"] <= fmed["nsam"])

    _verdict(
        1, "generalization ordering, per-example ascent wins by >= 2x",
        sto_ok and fb_ok and worst_seed_time <= 120.0,
        f"stochastic medians sgd={med['sgd']:.2e} msam={med['msam']:.2e} "
        f"nsam_fresh={med['nsam_fresh']:.2e}; full-batch medians "
        f"gd={fmed.get('gd', float('nan')):.2e} onesam={fmed.get('onesam', float('nan')):.2e} "
        f"nsam={fmed.get('nsam', float('nan')):.2e}; "
        f"worst seed {worst_seed_time:.0f}s")


# ---------------------------------------------------------------------------
# 2. Descent flow endpoint minimizes the hyperbolic-entropy potential
# ---------------------------------------------------------------------------


def test_criterion_2_flow_endpoint_matches_potential_minimizer():
    errs = []
    for seed in SEEDS:
        data = _family(seed)
        alpha = np.full(data.d, 0.05)
        gamma, _ = experiments.flow_scale_gamma(data, alpha, safety=80.0)
        gd = experiments.run_flow(data, alpha, gamma, 0.0, "gd",
                                  max_steps=20_000_000)
        target = bias.solve_min_potential(bias.PotentialSpec(alpha), data.X, data.y)
        errs.append(float(np.linalg.norm(gd.beta - target, np.inf)
                          / np.linalg.norm(gd.beta, np.inf)))
    _verdict(2, "flow endpoint vs potential minimizer, rel linf <= 1e-3",
             all(e <= 1e-3 for e in errs),
             "errors " + " ".join(f"{e:.1e}" for e in errs))


# ---------------------------------------------------------------------------
# 3. Effective-alpha characterization of both ascent variants
# ---------------------------------------------------------------------------


def test_criterion_3_effective_alpha_endpoints():
    ok = True
    details = []
    for seed in range(3):
        data = _family(seed)
        alpha = np.full(data.d, 0.05)
        g0, _ = experiments.flow_scale_gamma(data, alpha)  # 1/(10 beta_hat)
        errs = {}
        for gamma in (g0, g0 / 2.0):
            rep = experiments.bias_verify_report(data, alpha, rho=0.02,
                                                 gamma=gamma, max_steps=4_000_000)
            ok &= all(rep["converged"].values())
            errs[gamma] = rep["linf_rel_err"]
        for method in ("onesam", "nsam"):
            coarse, fine = errs[g0][method], errs[g0 / 2.0][method]
            ok &= coarse <= 1e-2 and fine <= 1e-2 and fine < coarse
            details.append(f"s{seed} {method} {coarse:.1e}->{fine:.1e}")
    _verdict(3, "effective-alpha endpoints <= 1e-2, improving as step halves",
             ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 4. Ascent-radius safety bound keeps effective alpha below alpha
# ---------------------------------------------------------------------------


def test_criterion_4_rho_safety_bound():
    ok = True
    mins = []
    for seed in SEEDS:
        data = _family(seed)
        alpha = np.full(data.d, 0.05)
        gamma, _ = experiments.flow_scale_gamma(data, alpha)
        R = float(np.max(np.linalg.norm(data.X, axis=1)))
        B = 2.0 * float(np.linalg.norm(data.beta_star))
        bound = bias.rho_safety_bound(R, B, float(np.linalg.norm(data.beta_star)))
        for rho in (bound, 0.5 * bound):
            run = experiments.run_flow(data, alpha, gamma, rho, "onesam",
                                       max_steps=4_000_000)
            ok &= run.converged and float(run.beta_max) <= B  # B bound held
            ok &= bool(np.all(run.I_exact >= 0.0))  # alpha_eff <= alpha entrywise
            mins.append(float(run.I_exact.min()))
    _verdict(4, "rho safety bound implies entrywise alpha shrink", ok,
             f"min integral entries {min(mins):.2e}..{max(mins):.2e}")


# ---------------------------------------------------------------------------
# 5. Alignment and descent inequalities
# ---------------------------------------------------------------------------


def test_criterion_5_inequality_suite():
    ok = True
    n_probes = 1000
    for seed in range(10):
        problem = QuadraticObjective.random(d=8, n=16, beta_smooth=1.0, mu=0.1,
                                            sigma=0.5, seed=seed)
        rng = stream(seed, "probe")
        for _ in range(n_probes):
            w = problem.w_star + rng.standard_normal(problem.d)
            rho = rng.uniform(0.0, 0.95)
            for regime in ("smooth", "convex", "strongly_convex"):
                ok &= check_alignment(problem, w, rho, regime) >= -1e-10
            gamma = rng.uniform(0.05, 0.95)
            ok &= check_descent(problem, w, gamma, rho) >= -1e-10
        w = problem.w_star + stream(seed, "probe").standard_normal(problem.d)
        for variant in ("shared", "fresh"):
            out = check_stochastic_alignment(problem, w, rho=0.2, batch_size=4,
                                             variant=variant, n_draws=n_probes,
                                             seed=seed)
            ok &= out["satisfied"]  # at 99% confidence
            out = check_stochastic_descent(problem, w, gamma=0.5, rho=0.2,
                                           batch_size=4, variant=variant,
                                           n_draws=n_probes, seed=seed)
            ok &= out["satisfied"]
    tight = max(probe_alignment_tightness(), probe_descent_tightness())
    ok &= tight <= 1e-6
    _verdict(5, "alignment/descent inequalities on 10 instances x 1e3 probes",
             ok, f"tightness margin {tight:.1e}")


# ---------------------------------------------------------------------------
# 6. Convergence-rate bounds
# ---------------------------------------------------------------------------


def test_criterion_6_rate_bounds():
    t0 = time.time()
    ok = True
    worst = np.inf
    for seed in range(10):
        problem = QuadraticObjective.random(d=8, n=16, beta_smooth=1.0, mu=0.1,
                                            sigma=0.5, seed=seed)
        for tid in THEOREM_IDS:
            res = verify_rate(tid, problem, T=10_000, b=4, seeds=20, seed0=seed)
            ok &= res.satisfied
            worst = min(worst, res.margin)
    elapsed = time.time() - t0
    _verdict(6, "all six rate bounds on 10 instances", ok and elapsed <= 300.0,
             f"worst margin {worst:.2e}, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 7. Ascent oracle equals the linear closed form; monotone in rho and iters
# ---------------------------------------------------------------------------


def test_criterion_7_sharpness_oracle():
    ok = True
    worst = 0.0
    model = LinearMarginModel(6)
    for seed in range(100):
        rng = stream(seed, "data")
        X = rng.standard_normal((12, 6))
        y = np.sign(X @ rng.standard_normal(6))
        y[y == 0] = 1.0
        data = Dataset(X=X, y=y)
        w = rng.standard_normal(6)
        rho = float(rng.uniform(0.02, 0.5))
        got = m_sharpness(model, w, data, m=1, rho=rho, iters=100).mean_sharpness
        ref = linear_1_sharpness_closed_form(w, data, rho)
        worst = max(worst, abs(got - ref))
        ok &= abs(got - ref) <= 1e-6
    for seed in (3, 17):
        rng = stream(seed, "data")
        X = rng.standard_normal((24, 5))
        y = np.sign(X @ rng.standard_normal(5))
        y[y == 0] = 1.0
        data = Dataset(X=X, y=y)
        w = rng.standard_normal(5)
        vals = [m_sharpness(model := LinearMarginModel(5), w, data, m=4, rho=r,
                            iters=20).mean_sharpness
                for r in (0.05, 0.1, 0.2, 0.4)]
        ok &= all(b > a for a, b in zip(vals, vals[1:]))
        vals = [m_sharpness(model, w, data, m=4, rho=0.2, iters=k).mean_sharpness
                for k in (1, 5, 25, 100)]
        ok &= all(b >= a for a, b in zip(vals, vals[1:]))
    _verdict(7, "ascent oracle vs closed form on 100 triples, monotone grids",
             ok, f"max |pga - closed form| = {worst:.1e}")


# ---------------------------------------------------------------------------
# 8. Interpolating linear predictors with equal margins are equally sharp
# ---------------------------------------------------------------------------


def test_criterion_8_equal_margin_minimizers_equally_sharp():
    ok = True
    gaps = []
    for seed in range(5):
        rng = stream(seed, "data")
        n, d = 4, 8
        X = rng.standard_normal((n, d))
        y = np.sign(rng.standard_normal(n))
        y[y == 0] = 1.0
        w1 = np.linalg.pinv(X) @ y  # margins y_i x_i.w = 1 for every example
        # shift along the design null space: identical margins, different point
        _, _, vt = np.linalg.svd(X)
        v = vt[n:].T @ rng.standard_normal(d - n)
        w2 = w1 + 3.0 * v
        ok &= float(np.max(np.abs(X @ (w2 - w1)))) <= 1e-12  # same margins
        model = LinearMarginModel(d)
        data = Dataset(X=X, y=y)
        s1 = m_sharpness(model, w1, data, m=1, rho=0.3, iters=50).mean_sharpness
        s2 = m_sharpness(model, w2, data, m=1, rho=0.3, iters=50).mean_sharpness
        gaps.append(abs(s1 - s2))
        ok &= abs(s1 - s2) <= 1e-8
    _verdict(8, "equal-margin minimizers equally sharp within 1e-8", ok,
             f"max gap {max(gaps):.1e}")


# ---------------------------------------------------------------------------
# 9. Degeneracy battery
# ---------------------------------------------------------------------------


def test_criterion_9_degeneracy_battery():
    from samlab.datasets import gen_sparse_regression

    ok = True
    data = gen_sparse_regression(d=6, n=5, k=2, seed=0)
    model = DiagonalLinearNet(6)
    w0 = model.init_params(0.3)

    # zero ascent radius reduces every variant to plain descent, bit for bit
    batch = np.array([0, 2, 4])
    ref = sgd_step(model, data, w0, batch, gamma=0.05)
    ok &= np.array_equal(msam_step_shared_batch(model, data, w0, batch, 0.05, 0.0), ref)
    ok &= np.array_equal(
        nsam_step_fresh_batch(model, data, w0, batch, np.array([1, 3]), 0.05, 0.0), ref)
    full = sgd_step(model, data, w0, None, gamma=0.05)
    ok &= np.array_equal(full_batch_nsam_step(model, data, w0, 0.05, 0.0), full)
    ok &= np.array_equal(full_batch_1sam_step(model, data, w0, 0.05, 0.0), full)
    sgd_run = run_training(model, data, OptimizerSpec("sgd", 0.05, batch_size=2),
                           w0, 100, seed=3)
    for method in ("msam", "nsam_fresh"):
        spec = OptimizerSpec(method, 0.05, 0.0, batch_size=2)
        ok &= np.array_equal(run_training(model, data, spec, w0, 100, seed=3).final_params,
                             sgd_run.final_params)

    # an exactly interpolating minimum is a fixed point of both ascent variants
    half = np.abs(stream(1, "init").standard_normal(6)) + 0.1
    w_star = np.concatenate([half, half])  # beta == 0 exactly
    fdata = Dataset(X=stream(1, "data").standard_normal((4, 6)), y=np.zeros(4))
    ok &= model.loss(w_star, fdata) == 0.0
    ok &= np.array_equal(full_batch_1sam_step(model, fdata, w_star, 0.1, 0.5), w_star)
    ok &= np.array_equal(full_batch_nsam_step(model, fdata, w_star, 0.1, 0.5), w_star)

    # repeated runs are byte-equal
    spec = OptimizerSpec("msam", 0.05, 0.02, batch_size=2)
    a = run_training(model, data, spec, w0, 200, seed=5)
    b = run_training(model, data, spec, w0, 200, seed=5)
    ok &= a.final_params.tobytes() == b.final_params.tobytes()
    ok &= np.array_equal(a.loss, b.loss)

    _verdict(9, "zero-radius/fixed-point/determinism degeneracies", ok)


# ---------------------------------------------------------------------------
# 10. Switching between plain descent and per-example ascent
# ---------------------------------------------------------------------------


def test_criterion_10_switching():
    g1, g2 = 0.02, 0.002
    decreased = 0
    preserved = True
    connected_report = []
    for seed in SEEDS:
        data = _family(seed)
        alpha = np.full(data.d, 0.05)

        # plain descent, then a large-radius per-example-ascent phase
        sw = experiments.switch_run(data, alpha, g1, "gd", "onesam", 0.0, 10.0,
                                    switch_step=10_000,
                                    total_steps=10_000 + 2_000_000,
                                    gamma_second=g2)
        decreased += sw["final_test_loss"] < sw["switch_test_loss"]

        # the reverse order must not lose the ascent phase's bias
        pure = experiments.run_flow(data, alpha, g1, 0.175, "onesam",
                                    max_steps=2_000_000)
        rev = experiments.switch_run(data, alpha, g1, "onesam", "gd", 0.175, 0.0,
                                     switch_step=10_000,
                                     total_steps=10_000 + 2_000_000)
        pure_test = population_test_loss(pure.beta, data.beta_star)
        preserved &= abs(rev["final_test_loss"] - pure_test) <= 0.10 * pure_test

        # straight-line train-loss profile between the two descent endpoints
        # (reported, not asserted: the flatness observation is empirical)
        gd = experiments.run_flow(data, alpha, g1, 0.0, "gd", max_steps=2_000_000)
        model = DiagonalLinearNet(data.d)
        rows = experiments.interpolate_losses(
            {"train": lambda w: model.loss(w, data)},
            gd.params(), sw["phase2"].params(), num_points=41, t_range=(0.0, 1.0))
        vals = [r["train"] for r in rows]
        flat = max(vals[1:-1]) <= max(vals[0], vals[-1]) * (1.0 + 1e-6)
        connected_report.append(
            f"s{seed} interior max {max(vals[1:-1]):.1e} vs ends "
            f"{max(vals[0], vals[-1]):.1e} ({'flat' if flat else 'bump'})")
        assert len(rows) == 41 and all(np.isfinite(v) for v in vals)
    print("interpolation report: " + "; ".join(connected_report))
    _verdict(10, "switching improves, reverse switching preserves",
             decreased >= 4 and preserved,
             f"test loss decreased on {decreased}/5 seeds")
