"""High-level experiment drivers: bias flows, rho grids, switching runs,
interpolations, the ReLU fit demo, and potential level-set data.

These functions produce plain dicts / row lists; the CLI layer owns file
formats and paths. Long diagonal-net runs call the compiled kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bias, kernels
from .datasets import Dataset, gen_sparse_regression, population_test_loss
from .models import DiagonalLinearNet, ReluNet, estimate_smoothness
from .optim import OptimizerSpec, batch_order, run_training
from .rng import stream

FLOW_METHODS = {"gd": kernels.GD, "nsam": kernels.NSAM, "onesam": kernels.ONESAM}
STOCH_METHODS = {
    "sgd": kernels.S_SGD,
    "msam": kernels.S_MSAM,
    "msam_norm": kernels.S_MSAM_NORM,
    "nsam_fresh": kernels.S_NSAM_FRESH,
}

DEFAULT_TOL = 1e-10
DEFAULT_MAX_STEPS = 200_000


@dataclass
class FlowResult:
    """Outcome of a full-batch diagonal-net run."""

    method: str
    gamma: float
    rho: float
    w_plus: np.ndarray
    w_minus: np.ndarray
    I_exact: np.ndarray
    I_lead: np.ndarray
    loss_integral: float
    beta_max: float
    steps: int
    final_loss: float
    t_log: np.ndarray
    beta_log: np.ndarray

    @property
    def beta(self) -> np.ndarray:
        return self.w_plus**2 - self.w_minus**2

    @property
    def converged(self) -> bool:
        return bool(np.isfinite(self.final_loss)) and self.final_loss < DEFAULT_TOL

    @property
    def diverged(self) -> bool:
        return not np.isfinite(self.final_loss)

    def params(self) -> np.ndarray:
        return np.concatenate([self.w_plus, self.w_minus])


def run_flow(data: Dataset, alpha: np.ndarray, gamma: float, rho: float,
             method: str, max_steps: int = 1_000_000, tol: float = DEFAULT_TOL,
             log_stride: int = 1000, init: np.ndarray | None = None) -> FlowResult:
    """Full-batch diagonal-net training with running bias integrals.

    `init` (flat [w_plus, w_minus]) overrides the balanced start at alpha.
    Stops at train loss < tol; tol = 0 forces exactly max_steps steps.
    """
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (data.d,))
    if init is None:
        wp0, wm0 = alpha.copy(), alpha.copy()
    else:
        wp0, wm0 = init[: data.d].copy(), init[data.d :].copy()
    X = np.ascontiguousarray(data.X)
    XT = np.ascontiguousarray(data.X.T)
    out = kernels.diag_flow(X, XT, data.y, wp0, wm0, float(gamma), float(rho),
                            FLOW_METHODS[method], max_steps, tol, log_stride)
    wp, wm, I_exact, I_lead, loss_integral, beta_max, steps, loss, t_log, beta_log, n_logged = out
    return FlowResult(method=method, gamma=float(gamma), rho=float(rho),
                      w_plus=wp, w_minus=wm, I_exact=I_exact, I_lead=I_lead,
                      loss_integral=loss_integral, beta_max=beta_max,
                      steps=int(steps), final_loss=float(loss),
                      t_log=t_log[:n_logged].copy(), beta_log=beta_log[:n_logged].copy())


def run_stochastic(data: Dataset, alpha: np.ndarray, gamma: float, rho: float,
                   method: str, batch_size: int, total_steps: int, seed: int,
                   check_every: int = 1000, tol: float = DEFAULT_TOL,
                   sampling: str = "epoch") -> FlowResult:
    """Mini-batch diagonal-net training (the stochastic variants)."""
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (data.d,))
    batches_i = batch_order(data.n, batch_size, total_steps, seed, sampling)
    if method == "nsam_fresh":
        batches_j = batch_order(data.n, batch_size, total_steps, seed + 1, sampling)
    else:
        batches_j = batches_i
    X = np.ascontiguousarray(data.X)
    XT = np.ascontiguousarray(data.X.T)
    wp, wm, steps, loss = kernels.diag_stochastic(
        X, XT, data.y, alpha.copy(), alpha.copy(), float(gamma), float(rho),
        STOCH_METHODS[method], batches_i, batches_j, check_every, tol)
    d = data.d
    return FlowResult(method=method, gamma=float(gamma), rho=float(rho),
                      w_plus=wp, w_minus=wm, I_exact=np.zeros(d), I_lead=np.zeros(d),
                      loss_integral=0.0, beta_max=float("nan"), steps=int(steps),
                      final_loss=float(loss), t_log=np.empty(0, dtype=np.int64),
                      beta_log=np.empty((0, d)))


def balanced_interpolating_params(data: Dataset, alpha: np.ndarray) -> np.ndarray:
    """Flat parameters on the balanced manifold (w_plus w_minus = alpha^2)
    realizing beta = beta_star; used as a probe center for smoothness."""
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (data.d,))
    if data.beta_star is None:
        raise ValueError("dataset has no ground-truth predictor")
    b = data.beta_star
    wp = np.sqrt(0.5 * (np.sqrt(b * b + 4.0 * alpha**4) + b))
    wm = alpha**2 / wp
    return np.concatenate([wp, wm])


def flow_scale_gamma(data: Dataset, alpha: np.ndarray, safety: float = 10.0,
                     seed: int = 0, n_probes: int = 200) -> tuple:
    """Step size gamma = 1 / (safety * beta_hat) with beta_hat an empirical
    smoothness constant of the loss around the solution manifold."""
    model = DiagonalLinearNet(data.d)
    center = balanced_interpolating_params(data, alpha)
    radius = 0.5 * (1.0 + np.linalg.norm(center, np.inf))
    beta_hat = estimate_smoothness(lambda w: model.grad(w, data), center, radius,
                                   n_probes, stream(seed, "probe"))
    beta_hat = max(beta_hat, estimate_smoothness(
        lambda w: model.grad(w, data), np.zeros(2 * data.d), radius, n_probes,
        stream(seed + 1, "probe")))
    return 1.0 / (safety * beta_hat), beta_hat


def bias_verify_report(data: Dataset, alpha: np.ndarray, rho: float,
                       gamma: float, max_steps: int = 2_000_000,
                       tol: float = DEFAULT_TOL) -> dict:
    """Run GD / shared-ascent / per-example-ascent flows and compare their
    endpoints against the potential minimizers at alpha and the accumulated
    effective alphas. Returns the bias-verification report dict."""
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (data.d,)).copy()
    gd = run_flow(data, alpha, gamma, 0.0, "gd", max_steps, tol)
    one = run_flow(data, alpha, gamma, rho, "onesam", max_steps, tol)
    nsam = run_flow(data, alpha, gamma, rho, "nsam", max_steps, tol)

    report = {"alpha": alpha.tolist(), "gamma": gamma, "rho": rho,
              "converged": {"gd": gd.converged, "onesam": one.converged, "nsam": nsam.converged}}
    alpha_1 = alpha * np.exp(-one.I_exact)
    alpha_n = alpha * np.exp(-nsam.I_exact)
    report["alpha_eff_1sam"] = alpha_1.tolist()
    report["alpha_eff_nsam"] = alpha_n.tolist()

    linf = {}
    betas_pot = {}
    for name, res, a in (("gd", gd, alpha), ("onesam", one, alpha_1), ("nsam", nsam, alpha_n)):
        if not res.converged:
            linf[name] = None
            continue
        beta_pot = bias.solve_min_potential(bias.PotentialSpec(a), data.X, data.y)
        betas_pot[name] = beta_pot
        scale = np.linalg.norm(res.beta, np.inf)
        linf[name] = float(np.linalg.norm(res.beta - beta_pot, np.inf) / scale)
    report["beta_flow"] = gd.beta.tolist()
    report["beta_potential"] = betas_pot.get("gd", np.full(data.d, np.nan)).tolist()
    report["linf_rel_err"] = linf
    report["l1_norms"] = {
        "gd": float(np.linalg.norm(gd.beta, 1)),
        "onesam": float(np.linalg.norm(one.beta, 1)),
        "nsam": float(np.linalg.norm(nsam.beta, 1)),
    }
    report["bias_magnitudes"] = bias.compare_bias_magnitudes(
        one.I_lead, nsam.I_lead, data.n, data.d, one.loss_integral, rho=rho)
    return report


def rho_grid_rows(data: Dataset, alpha: np.ndarray, gamma: float,
                  rho_grid, seed: int, max_steps: int = DEFAULT_MAX_STEPS,
                  tol: float = 1e-8, methods=("gd", "nsam", "onesam")) -> list:
    """Full-batch rho grid: one row per (method, rho) with final train loss,
    population test loss and l1 norm; divergence recorded, grid continues."""
    rows = []
    for method in methods:
        for rho in rho_grid:
            r = 0.0 if method == "gd" else float(rho)
            res = run_flow(data, alpha, gamma, r, method, max_steps, tol)
            status = "diverged" if res.diverged else ("ok" if res.final_loss < tol else "max_steps")
            rows.append({
                "method": method,
                "rho": float(rho),
                "seed": int(seed),
                "train_loss": res.final_loss,
                "test_loss": population_test_loss(res.beta, data.beta_star),
                "l1_beta": float(np.linalg.norm(res.beta, 1)),
                "steps": res.steps,
                "status": status,
            })
            if method == "gd":
                break  # rho is irrelevant for plain descent
    return rows


def stochastic_grid_rows(data: Dataset, alpha: np.ndarray, gamma: float,
                         rho: float, batch_size: int, total_steps: int,
                         seed: int, tol: float = 1e-8,
                         methods=("sgd", "msam", "nsam_fresh")) -> list:
    """Mini-batch comparison rows at a single (gamma, rho)."""
    rows = []
    for method in methods:
        r = 0.0 if method == "sgd" else float(rho)
        res = run_stochastic(data, alpha, gamma, r, method, batch_size,
                             total_steps, seed, tol=tol)
        status = "diverged" if res.diverged else ("ok" if res.final_loss < tol else "max_steps")
        rows.append({
            "method": method,
            "rho": r,
            "seed": int(seed),
            "train_loss": res.final_loss,
            "test_loss": population_test_loss(res.beta, data.beta_star),
            "l1_beta": float(np.linalg.norm(res.beta, 1)),
            "steps": res.steps,
            "status": status,
        })
    return rows


def interpolate_losses(loss_fns: dict, w_a: np.ndarray, w_b: np.ndarray,
                       num_points: int = 41, t_range=(-0.5, 1.5)) -> list:
    """Losses along w_a + t (w_b - w_a) for t on a uniform grid.

    `loss_fns` maps column name -> callable(params); the default range
    extends past both endpoints to expose basin asymmetry.
    """
    if num_points < 3:
        raise ValueError("need num_points >= 3")
    w_a = np.asarray(w_a, dtype=np.float64)
    w_b = np.asarray(w_b, dtype=np.float64)
    if w_a.shape != w_b.shape:
        raise ValueError("endpoint dimensions differ")
    rows = []
    for t in np.linspace(t_range[0], t_range[1], num_points):
        w = w_a + t * (w_b - w_a)
        row = {"t": float(t)}
        for name, fn in loss_fns.items():
            row[name] = float(fn(w))
        rows.append(row)
    return rows


def switch_run(data: Dataset, alpha: np.ndarray, gamma: float,
               first: str, second: str, rho_first: float, rho_second: float,
               switch_step: int, total_steps: int,
               log_stride: int = 1000, gamma_second: float | None = None,
               tol_second: float = DEFAULT_TOL) -> dict:
    """Two-phase full-batch run (e.g. plain descent then per-example SAM).

    Phase 1 runs exactly switch_step steps (no early stop); phase 2 continues
    from its endpoint with the usual stopping rule, optionally with its own
    step size (a large ascent radius typically needs a smaller step to stay
    stable). Reports train/test losses at the switch point and the end, plus
    both phase endpoints.
    """
    phase1 = run_flow(data, alpha, gamma, rho_first, first,
                      max_steps=switch_step, tol=0.0, log_stride=log_stride)
    phase2 = run_flow(data, alpha, gamma if gamma_second is None else gamma_second,
                      rho_second, second,
                      max_steps=total_steps - switch_step, tol=tol_second,
                      log_stride=log_stride, init=phase1.params())
    test = lambda b: population_test_loss(b, data.beta_star)
    return {
        "phase1": phase1,
        "phase2": phase2,
        "switch_train_loss": phase1.final_loss,
        "switch_test_loss": test(phase1.beta),
        "final_train_loss": phase2.final_loss,
        "final_test_loss": test(phase2.beta),
    }


def relu_demo_runs(data: Dataset, hidden: int = 100, gamma: float = 0.02,
                   rho: float = 0.1, total_steps: int = 50_000,
                   seeds=range(5), grid_points: int = 201) -> list:
    """Fit the 1-D points with a ReLU net by full-batch descent, with and
    without the shared ascent step; one result dict per (seed, method)."""
    model = ReluNet(hidden)
    xs = np.linspace(-1.2, 1.2, grid_points)
    out = []
    for seed in seeds:
        w0 = model.init_params(stream(seed, "init"))
        for method, r in (("erm", 0.0), ("sam", rho)):
            spec = OptimizerSpec(method="nsam_full", gamma=gamma, rho=r)
            traj = run_training(model, data, spec, w0, total_steps, seed=seed,
                                snapshot_stride=total_steps)
            w = traj.final_params
            u, b, v, c = model.unpack(w)
            out.append({
                "seed": int(seed),
                "method": method,
                "train_mse": 2.0 * model.loss(w, data),  # mean squared error
                "path_norm": float(np.sum(np.abs(v) * np.abs(u))),
                "x_grid": xs,
                "f_grid": model.forward(w, xs),
                "params": w,
            })
    return out


def potential_plot_rows(alpha_scales, grid_range=(-2.0, 2.0), num: int = 41) -> list:
    """phi_alpha on a 2-D grid for each scale, with a column normalized by the
    potential of the first unit vector for shape comparison."""
    lo, hi = grid_range
    axis = np.linspace(lo, hi, num)
    rows = []
    for scale in alpha_scales:
        spec = bias.PotentialSpec(np.full(2, float(scale)))
        ref = bias.potential_phi(spec, np.array([1.0, 0.0]))
        for b1 in axis:
            for b2 in axis:
                val = bias.potential_phi(spec, np.array([b1, b2]))
                rows.append({"alpha": float(scale), "beta1": float(b1),
                             "beta2": float(b2), "phi": val,
                             "phi_normalized": val / ref})
    return rows


def fig12_dataset(seed: int) -> Dataset:
    """The sparse-recovery instance family used throughout: d=30, n=20, k=3."""
    return gen_sparse_regression(d=30, n=20, k=3, seed=seed)
