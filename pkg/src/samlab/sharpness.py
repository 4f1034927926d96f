"""Sharpness measurement: per-batch projected gradient ascent, the linear
closed form, and the ascent-suboptimality diagnostic.

Sharpness of a batch is max over ||delta||_2 <= rho of L_batch(w + delta) -
L_batch(w); the m-sharpness of a point is that maximum averaged over batches
of size m. Projected gradient ascent only lower-bounds the max, so every
report carries method="pga_lower_bound".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import stream

DEFAULT_EVAL_POINTS = 1024


@dataclass(frozen=True)
class SharpnessReport:
    m: int
    rho: float
    ascent_iters: int
    per_batch_values: np.ndarray
    mean_sharpness: float
    suboptimality_factor: float | None = None
    flagged_batches: tuple = ()
    method: str = "pga_lower_bound"

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "rho": self.rho,
            "ascent_iters": self.ascent_iters,
            "per_batch_values": [float(v) for v in self.per_batch_values],
            "mean_sharpness": self.mean_sharpness,
            "suboptimality_factor": self.suboptimality_factor,
            "flagged_batches": list(self.flagged_batches),
            "method": self.method,
        }


def _batch_ascent(model, w, data, batch, rho, iters):
    """Best-seen loss increase over a projected normalized ascent in delta.

    delta starts at 0; the first step has length rho (so a single iteration
    reproduces the one-step SAM perturbation exactly), later steps have
    length 0.1 * rho; after each step delta is projected back onto the
    rho-ball. Returns (value, zero_grad_flag).
    """
    base = model.loss(w, data, batch)
    g = model.grad(w, data, batch)
    gn = np.linalg.norm(g)
    if gn == 0.0:
        return 0.0, True
    delta = rho * g / gn
    best = model.loss(w + delta, data, batch) - base
    for _ in range(iters - 1):
        g = model.grad(w + delta, data, batch)
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        delta = delta + (0.1 * rho) * g / gn
        dn = np.linalg.norm(delta)
        if dn > rho:
            delta *= rho / dn
        best = max(best, model.loss(w + delta, data, batch) - base)
    return max(best, 0.0), False


def m_sharpness(model, w, data, m: int, rho: float, iters: int = 100,
                eval_points: int | None = None, shuffle_seed: int | None = None,
                ) -> SharpnessReport:
    """Average ascent-based sharpness over consecutive batches of size m.

    The first `eval_points` examples (default min(n, 1024)) are split into
    ceil(eval_points / m) consecutive batches; pass `shuffle_seed` to permute
    the examples first. A batch whose gradient vanishes at delta = 0
    contributes 0 and is flagged.
    """
    if m < 1:
        raise ValueError("need m >= 1")
    if rho <= 0:
        raise ValueError("need rho > 0")
    if iters < 1:
        raise ValueError("need iters >= 1")
    n_eval = min(data.n, DEFAULT_EVAL_POINTS) if eval_points is None else min(eval_points, data.n)
    order = np.arange(n_eval)
    if shuffle_seed is not None:
        order = stream(shuffle_seed, "probe").permutation(data.n)[:n_eval]

    values = []
    flagged = []
    for b, start in enumerate(range(0, n_eval, m)):
        batch = order[start : start + m]
        val, zero_grad = _batch_ascent(model, w, data, batch, rho, iters)
        values.append(val)
        if zero_grad:
            flagged.append(b)
    values = np.array(values)
    return SharpnessReport(
        m=m,
        rho=float(rho),
        ascent_iters=iters,
        per_batch_values=values,
        mean_sharpness=float(values.mean()),
        flagged_batches=tuple(flagged),
    )


def linear_1_sharpness_closed_form(w, data, rho: float, loss_kind: str = "logistic") -> float:
    """Exact 1-sharpness of a linear margin classifier.

    mean_i [ l(y_i <w, x_i> - rho ||x_i||) - l(y_i <w, x_i>) ]: the worst
    per-example perturbation moves the margin down by rho ||x_i|| since the
    margin loss is decreasing. Depends on w only through the margins.
    """
    from .models import _check_labels, _margin_loss

    w = np.asarray(w, dtype=np.float64)
    _check_labels(data.y)
    margins = data.y * (data.X @ w)
    norms = np.linalg.norm(data.X, axis=1)
    return float(np.mean(_margin_loss(loss_kind, margins - rho * norms)
                         - _margin_loss(loss_kind, margins)))


def ascent_suboptimality(model, w, data, m: int, rho: float,
                         eval_points: int | None = None,
                         long_iters: int = 100) -> SharpnessReport:
    """How much extra sharpness many ascent steps find over a single step.

    Returns the long-run report with `suboptimality_factor` set to
    mean_sharpness(long_iters) / mean_sharpness(1); NaN when the one-step
    value is <= 0 (undefined ratio).
    """
    one = m_sharpness(model, w, data, m, rho, iters=1, eval_points=eval_points)
    many = m_sharpness(model, w, data, m, rho, iters=long_iters, eval_points=eval_points)
    if one.mean_sharpness <= 0.0:
        factor = float("nan")
    else:
        factor = many.mean_sharpness / one.mean_sharpness
    return SharpnessReport(
        m=many.m,
        rho=many.rho,
        ascent_iters=many.ascent_iters,
        per_batch_values=many.per_batch_values,
        mean_sharpness=many.mean_sharpness,
        suboptimality_factor=factor,
        flagged_batches=many.flagged_batches,
    )
