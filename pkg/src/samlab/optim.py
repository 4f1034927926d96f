"""Training algorithms: SGD, shared-batch SAM, fresh-batch SAM, the two
full-batch SAM variants, multi-step ascent, and the training loop with
schedules, switch plans, and divergence handling.

The step functions here are the reference (pure numpy) implementations; long
diagonal-net runs go through :mod:`samlab.kernels` instead, which computes
exactly the same updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .rng import stream
from .schedules import StepSchedule, as_schedule

METHODS = ("sgd", "msam", "nsam_fresh", "onesam_full", "nsam_full")
FULL_BATCH_METHODS = ("onesam_full", "nsam_full")


@dataclass(frozen=True)
class OptimizerSpec:
    method: str
    gamma: StepSchedule | float
    rho: StepSchedule | float = 0.0
    normalize: bool = False
    ascent_steps: int = 1
    ascent_fraction: float = 0.1
    batch_size: int | None = None  # None = full batch
    sampling: str = "epoch"  # "epoch" (shuffle, no replacement) | "iid"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.sampling not in ("epoch", "iid"):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        object.__setattr__(self, "gamma", as_schedule(self.gamma))
        object.__setattr__(self, "rho", as_schedule(self.rho))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "gamma": {"kind": self.gamma.kind, **self.gamma.params},
            "rho": {"kind": self.rho.kind, **self.rho.params},
            "normalize": self.normalize,
            "ascent_steps": self.ascent_steps,
            "ascent_fraction": self.ascent_fraction,
            "batch_size": self.batch_size,
            "sampling": self.sampling,
        }


@dataclass(frozen=True)
class SwitchPlan:
    first: OptimizerSpec
    second: OptimizerSpec
    switch_step: int


@dataclass
class Trajectory:
    t: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    gamma: np.ndarray
    rho: np.ndarray
    snapshots: list  # [(t, params), ...]
    final_params: np.ndarray
    accumulators: list = field(default_factory=list)
    sampling: str = "epoch"
    skipped_ascents: int = 0
    diverged: bool = False


class DivergenceError(RuntimeError):
    """Raised when a run produces NaN/Inf; carries the last finite state."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


# ---------------------------------------------------------------------------
# Single steps
# ---------------------------------------------------------------------------


def sgd_step(model, data, w, batch, gamma):
    return w - gamma * model.grad(w, data, batch)


def _multi_step_ascent(model, data, w, batch, rho, k, fraction):
    """k steps of normalized projected gradient ascent within the rho-ball."""
    delta = np.zeros_like(w)
    for _ in range(k):
        g = model.grad(w + delta, data, batch)
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        delta = delta + (fraction * rho) * g / gn
        dn = np.linalg.norm(delta)
        if dn > rho:
            delta *= rho / dn
    return delta


def msam_step_shared_batch(model, data, w, batch, gamma, rho, normalize=False,
                           ascent_steps=1, ascent_fraction=0.1, diagnostics=None):
    """One SAM step where the same batch drives ascent and descent.

    With rho == 0 this reduces exactly (bit-for-bit) to `sgd_step`. A zero
    batch gradient under normalization skips the ascent and bumps the
    `skipped_ascents` counter in `diagnostics` when provided.
    """
    if rho == 0.0:
        return sgd_step(model, data, w, batch, gamma)
    if ascent_steps > 1:
        delta = _multi_step_ascent(model, data, w, batch, rho, ascent_steps, ascent_fraction)
        return w - gamma * model.grad(w + delta, data, batch)
    g = model.grad(w, data, batch)
    if normalize:
        gn = np.linalg.norm(g)
        if gn == 0.0:
            if diagnostics is not None:
                diagnostics["skipped_ascents"] = diagnostics.get("skipped_ascents", 0) + 1
            return w - gamma * g  # rho treated as 0: fixed points stay fixed
        rho = rho / gn
    return w - gamma * model.grad(w + rho * g, data, batch)


def nsam_step_fresh_batch(model, data, w, batch_i, batch_j, gamma, rho):
    """Ascent on an independently drawn batch J, descent on batch I."""
    if rho == 0.0:
        return sgd_step(model, data, w, batch_i, gamma)
    g_a = model.grad(w, data, batch_j)
    return w - gamma * model.grad(w + rho * g_a, data, batch_i)


def full_batch_nsam_step(model, data, w, gamma, rho):
    """All examples share the ascent point w + rho * grad L(w)."""
    if rho == 0.0:
        return w - gamma * model.grad(w, data)
    g = model.grad(w, data)
    return w - gamma * model.grad(w + rho * g, data)


def full_batch_1sam_step(model, data, w, gamma, rho):
    """Each example gets its own ascent point w + rho * grad l_i(w)."""
    n = data.n
    if rho == 0.0:
        return w - gamma * model.grad(w, data)
    total = np.zeros_like(w)
    for i in range(n):
        g_i = model.per_example_grad(w, data, i)
        total += model.per_example_grad(w + rho * g_i, data, i)
    return w - gamma * total / n


# ---------------------------------------------------------------------------
# Batch order
# ---------------------------------------------------------------------------


def batch_order(n: int, batch_size: int, total_steps: int, seed: int,
                sampling: str = "epoch") -> np.ndarray:
    """Deterministic (total_steps, batch_size) index array from the batch stream."""
    rng = stream(seed, "batch")
    if sampling == "iid":
        return rng.integers(0, n, size=(total_steps, batch_size))
    per_epoch = n // batch_size
    if per_epoch == 0:
        raise ValueError("batch_size larger than dataset")
    out = np.empty((total_steps, batch_size), dtype=np.int64)
    t = 0
    while t < total_steps:
        perm = rng.permutation(n)
        for b in range(per_epoch):
            if t == total_steps:
                break
            out[t] = perm[b * batch_size : (b + 1) * batch_size]
            t += 1
    return out


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _one_step(model, data, w, spec, t, batches_i, batches_j, diagnostics):
    gamma = spec.gamma.value(t)
    rho = spec.rho.value(t)
    m = spec.method
    if m == "onesam_full":
        return full_batch_1sam_step(model, data, w, gamma, rho), gamma, rho
    if m == "nsam_full":
        return full_batch_nsam_step(model, data, w, gamma, rho), gamma, rho
    bi = batches_i[t]
    if m == "sgd":
        return sgd_step(model, data, w, bi, gamma), gamma, rho
    if m == "msam":
        return (
            msam_step_shared_batch(model, data, w, bi, gamma, rho, spec.normalize,
                                   spec.ascent_steps, spec.ascent_fraction, diagnostics),
            gamma,
            rho,
        )
    return nsam_step_fresh_batch(model, data, w, bi, batches_j[t], gamma, rho), gamma, rho


def _ascent_context(model, data, w, spec, t):
    """Residual context consumed by the effective-alpha accumulators."""
    from .bias import StepContext

    rho = spec.rho.value(t)
    beta = model.beta(w)
    r = data.X @ beta - data.y
    if spec.method == "nsam_full":
        g = data.X.T @ r / data.n
        wp, wm = model.split(w)
        wpa = wp + rho * g * wp
        wma = wm - rho * g * wm
        r_sam = data.X @ (wpa * wpa - wma * wma) - data.y
    else:  # onesam_full: per-example ascent residuals
        wp, wm = model.split(w)
        r_sam = np.empty(data.n)
        for i in range(data.n):
            xi = data.X[i]
            wpa = wp + rho * r[i] * xi * wp
            wma = wm - rho * r[i] * xi * wm
            r_sam[i] = xi @ (wpa * wpa - wma * wma) - data.y[i]
    return StepContext(X=data.X, r=r, r_sam=r_sam, gamma=spec.gamma.value(t), rho=rho)


def run_training(model, data, spec, init, total_steps, seed=0,
                 snapshot_stride=100, accumulators=()):
    """Run an optimizer (or a SwitchPlan) and log the full trajectory.

    Deterministic given (seed, spec, init). Raises DivergenceError on
    NaN/Inf, with the trajectory up to the last finite iterate attached.
    """
    plan = spec if isinstance(spec, SwitchPlan) else None
    if plan is not None:
        if not (0 <= plan.switch_step <= total_steps):
            raise ValueError("switch_step outside [0, total_steps]")
        spec = plan.first

    accumulators = list(accumulators)
    if accumulators and spec.method not in FULL_BATCH_METHODS:
        raise ValueError("effective-alpha accumulators require a full-batch SAM method")
    for acc in accumulators:
        acc.check_method(spec.method)

    w = np.array(init, dtype=np.float64, copy=True)
    n = data.n

    def make_batches(s, steps):
        if s.method in FULL_BATCH_METHODS or steps == 0:
            return None, None
        b = s.batch_size if s.batch_size is not None else n
        bi = batch_order(n, b, steps, seed, s.sampling)
        bj = None
        if s.method == "nsam_fresh":
            bj = batch_order(n, b, steps, seed + 1, s.sampling)
        return bi, bj

    batches_i, batches_j = make_batches(spec, total_steps)

    ts, losses, grad_norms, gammas, rhos = [], [], [], [], []
    snapshots = [(0, w.copy())]
    diagnostics = {"skipped_ascents": 0}

    for t in range(total_steps):
        if plan is not None and t == plan.switch_step and spec is plan.first:
            spec = plan.second
            batches_i, batches_j = make_batches(spec, total_steps)
            if accumulators and spec.method not in FULL_BATCH_METHODS:
                raise ValueError("switch plan leaves the full-batch regime mid-accumulation")

        loss = model.loss(w, data)
        g = model.grad(w, data)
        if not np.isfinite(loss) or not np.all(np.isfinite(w)):
            traj = _finish(ts, losses, grad_norms, gammas, rhos, snapshots, w,
                           accumulators, spec.sampling, diagnostics, diverged=True)
            raise DivergenceError(f"non-finite loss at step {t}", traj)

        if accumulators:
            ctx = _ascent_context(model, data, w, spec, t)
            for acc in accumulators:
                acc.update(ctx)

        w_next, gamma, rho = _one_step(model, data, w, spec, t, batches_i, batches_j, diagnostics)
        ts.append(t)
        losses.append(loss)
        grad_norms.append(float(np.linalg.norm(g)))
        gammas.append(gamma)
        rhos.append(rho)
        w = w_next
        if (t + 1) % snapshot_stride == 0:
            snapshots.append((t + 1, w.copy()))

    if not snapshots or snapshots[-1][0] != total_steps:
        snapshots.append((total_steps, w.copy()))
    return _finish(ts, losses, grad_norms, gammas, rhos, snapshots, w,
                   accumulators, spec.sampling, diagnostics, diverged=False)


def _finish(ts, losses, grad_norms, gammas, rhos, snapshots, w, accumulators,
            sampling, diagnostics, diverged):
    return Trajectory(
        t=np.array(ts, dtype=np.int64),
        loss=np.array(losses),
        grad_norm=np.array(grad_norms),
        gamma=np.array(gammas),
        rho=np.array(rhos),
        snapshots=snapshots,
        final_params=w,
        accumulators=accumulators,
        sampling=sampling,
        skipped_ascents=diagnostics.get("skipped_ascents", 0),
        diverged=diverged,
    )


def with_rho(spec: OptimizerSpec, rho) -> OptimizerSpec:
    return replace(spec, rho=as_schedule(rho))
