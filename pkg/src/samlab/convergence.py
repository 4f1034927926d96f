"""Numerical verification of the alignment/descent lemmas and the six
convergence-rate theorems for SAM-style updates on quadratic objectives.

Everything here runs on `QuadraticObjective`, whose smoothness constant,
smallest (nonzero) curvature, noise level and optimal value are analytic —
bound checking with estimated constants would prove nothing.

Update conventions match the optimizer module: shared-batch SAM uses the same
batch for the ascent and descent gradients; fresh-batch SAM draws the ascent
batch independently; the deterministic iterates use the full gradient at the
shared ascent point w + rho * grad L(w).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels, schedules
from .models import QuadraticObjective
from .rng import stream

THEOREM_IDS = (
    "thm2_nonconvex",
    "thm2_pl",
    "det_nonconvex",
    "det_pl",
    "det_convex",
    "det_strongly_convex",
)

# 99% two-sided normal quantile for Monte-Carlo confidence intervals.
Z99 = 2.5758293035489004


@dataclass
class RateCheckResult:
    theorem_id: str
    lhs_trace: np.ndarray
    rhs_bound: np.ndarray | float
    satisfied: bool
    margin: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        rhs = self.rhs_bound
        return {
            "theorem_id": self.theorem_id,
            "lhs_trace": [float(v) for v in np.atleast_1d(self.lhs_trace)],
            "rhs_bound": [float(v) for v in np.atleast_1d(rhs)],
            "satisfied": self.satisfied,
            "margin": self.margin,
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# Deterministic lemmas
# ---------------------------------------------------------------------------

_ALIGNMENT_ALPHA = {"smooth": -1.0, "convex": 0.0, "strongly_convex": 1.0}


def check_alignment(problem: QuadraticObjective, w: np.ndarray, rho: float,
                    regime: str) -> float:
    """Margin of <grad L(w + rho grad L(w)), grad L(w)> >= (1 + a*rho)||grad L||^2.

    The curvature coefficient a is -beta (smooth), 0 (convex) or mu (strongly
    convex). Returns lhs - rhs, which must be >= -1e-10 in a valid regime.
    """
    if regime not in _ALIGNMENT_ALPHA:
        raise ValueError(f"unknown regime {regime!r}")
    if regime == "strongly_convex" and problem.mu <= 0:
        raise ValueError("strongly convex regime requires mu > 0")
    a = _ALIGNMENT_ALPHA[regime] * (problem.beta_smooth if regime == "smooth" else problem.mu)
    g = problem.grad(w)
    g_half = problem.grad(w + rho * g)
    lhs = float(g_half @ g)
    rhs = (1.0 + a * rho) * float(g @ g)
    return lhs - rhs


def check_descent(problem: QuadraticObjective, w: np.ndarray, gamma: float,
                  rho: float) -> float:
    """Margin of the one-step descent bound for the deterministic update.

    L(w_next) <= L(w) - gamma (1 - rho beta)(1 - (gamma beta / 2)(1 - rho beta))
    ||grad L(w)||^2 for gamma, rho < 1/beta. Returns rhs - lhs (>= 0 when the
    bound holds).
    """
    b = problem.beta_smooth
    g = problem.grad(w)
    w_next = w - gamma * problem.grad(w + rho * g)
    lhs = problem.loss(w_next)
    rhs = problem.loss(w) - gamma * (1.0 - rho * b) * (1.0 - 0.5 * gamma * b * (1.0 - rho * b)) * float(g @ g)
    return rhs - lhs


# ---------------------------------------------------------------------------
# Stochastic lemmas (Monte-Carlo over batch draws)
# ---------------------------------------------------------------------------


def _batch_mean_zeta(problem, rng, batch_size):
    idx = rng.integers(0, problem.n, size=batch_size)
    return problem.zeta[idx].mean(axis=0)


def check_stochastic_alignment(problem: QuadraticObjective, w: np.ndarray,
                               rho: float, batch_size: int,
                               variant: str = "shared", n_draws: int = 10_000,
                               seed: int = 0, slack: float = 0.0) -> dict:
    """Monte-Carlo check of the expected-alignment lower bound.

    Shared batch: E <grad L_I(w + rho grad L_I(w)), grad L(w)> >=
    (1/2 - rho beta) ||grad L||^2 - beta^2 rho^2 sigma^2 / (2b).
    Fresh batch uses an independent ascent batch and the bound without the
    1/b factor on the noise term. The 99% normal interval's lower end must
    clear rhs - slack.
    """
    if variant not in ("shared", "fresh"):
        raise ValueError(f"unknown variant {variant!r}")
    b = problem.beta_smooth
    g = problem.grad(w)
    rng = stream(seed, "probe")
    samples = np.empty(n_draws)
    for k in range(n_draws):
        z_desc = _batch_mean_zeta(problem, rng, batch_size)
        z_asc = z_desc if variant == "shared" else _batch_mean_zeta(problem, rng, batch_size)
        g_asc = g + z_asc
        g_half = problem.grad(w + rho * g_asc) + z_desc
        samples[k] = g_half @ g
    est = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(n_draws))
    noise = b * b * rho * rho * problem.sigma_sq / 2.0
    if variant == "shared":
        noise /= batch_size
    rhs = (0.5 - rho * b) * float(g @ g) - noise
    return {
        "estimate": est,
        "ci_halfwidth": Z99 * se,
        "rhs": rhs,
        "satisfied": bool(est - Z99 * se >= rhs - slack),
        "margin": est - rhs,
    }


def check_stochastic_descent(problem: QuadraticObjective, w: np.ndarray,
                             gamma: float, rho: float, batch_size: int,
                             variant: str = "shared", n_draws: int = 10_000,
                             seed: int = 0, slack: float = 0.0) -> dict:
    """Monte-Carlo check of the expected one-step decrease bound.

    Shared batch (gamma <= 1/beta, rho <= 1/(4 beta)):
    E[L(w_next)] - L(w) <= -(3 gamma / 8)||grad L||^2
                           + gamma beta (sigma^2/b)(gamma + 2 rho^2 beta).
    Fresh batch (gamma, rho <= 1/(2 beta)):
    E[L(w_next)] - L(w) <= -(gamma/4)||grad L||^2
                           + gamma beta sigma^2 (gamma + rho^2 beta).
    """
    if variant not in ("shared", "fresh"):
        raise ValueError(f"unknown variant {variant!r}")
    b = problem.beta_smooth
    g = problem.grad(w)
    base = problem.loss(w)
    rng = stream(seed, "probe")
    samples = np.empty(n_draws)
    for k in range(n_draws):
        z_desc = _batch_mean_zeta(problem, rng, batch_size)
        z_asc = z_desc if variant == "shared" else _batch_mean_zeta(problem, rng, batch_size)
        w_half = w + rho * (g + z_asc)
        w_next = w - gamma * (problem.grad(w_half) + z_desc)
        samples[k] = problem.loss(w_next) - base
    est = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(n_draws))
    gsq = float(g @ g)
    if variant == "shared":
        rhs = -(3.0 * gamma / 8.0) * gsq + gamma * b * (problem.sigma_sq / batch_size) * (gamma + 2.0 * rho * rho * b)
    else:
        rhs = -(gamma / 4.0) * gsq + gamma * b * problem.sigma_sq * (gamma + rho * rho * b)
    return {
        "estimate": est,
        "ci_halfwidth": Z99 * se,
        "rhs": rhs,
        "satisfied": bool(est + Z99 * se <= rhs + slack),
        "margin": rhs - est,
    }


# ---------------------------------------------------------------------------
# End-to-end rate theorems
# ---------------------------------------------------------------------------


def _iid_batches(n: int, b: int, T: int, seed: int) -> np.ndarray:
    return stream(seed, "batch").integers(0, n, size=(T, b))


def _run_stochastic(problem, gammas, rhos, T, b, seed):
    batches = _iid_batches(problem.n, b, T, seed)
    fresh = np.zeros((1, 1), dtype=np.int64)  # unused by the shared-batch method
    return kernels.quad_msam(problem.A, problem.zeta, problem.w_star,
                             np.zeros(problem.d), gammas, rhos, batches, fresh,
                             kernels.S_MSAM)


def verify_rate(theorem_id: str, problem: QuadraticObjective, T: int,
                b: int = 1, seeds: int = 20, seed0: int = 0,
                w0: np.ndarray | None = None) -> RateCheckResult:
    """Run the algorithm a theorem prescribes and compare lhs to its bound.

    Stochastic theorems average over `seeds` independent with-replacement
    batch sequences of the shared-batch update; deterministic theorems run
    the full-gradient update with the shared ascent point. Step sizes come
    from the theorem's own formulas and the problem's exact constants.
    """
    if theorem_id not in THEOREM_IDS:
        raise ValueError(f"unknown theorem_id {theorem_id!r}")
    beta = problem.beta_smooth
    mu = problem.mu
    if beta <= 0:
        raise ValueError("rate checks require a non-degenerate objective (beta > 0)")
    if theorem_id in ("thm2_pl", "det_pl", "det_strongly_convex") and mu <= 0:
        raise ValueError(f"{theorem_id} requires mu > 0")
    if w0 is None:
        w0 = np.zeros(problem.d)
    dl0 = problem.loss(w0) - problem.loss_min
    details = {"T": T, "b": b, "beta_smooth": beta, "mu": mu,
               "sigma_sq": problem.sigma_sq, "initial_gap": dl0}

    if theorem_id == "thm2_nonconvex":
        gamma = schedules.nonconvex_outer(T, beta).value(0)
        rho = schedules.nonconvex_inner(T, beta).value(0)
        gammas = np.full(T, gamma)
        rhos = np.full(T, rho)
        per_seed = np.empty(seeds)
        for s in range(seeds):
            grad_sq, _, _, _ = _run_stochastic(problem, gammas, rhos, T, b, seed0 + s)
            per_seed[s] = grad_sq.mean()
        lhs = float(per_seed.mean())
        rhs = 4.0 * beta / np.sqrt(T) * dl0 + 8.0 * problem.sigma_sq / (b * np.sqrt(T))
        details.update(gamma=gamma, rho=rho, per_seed=list(map(float, per_seed)))
        return RateCheckResult(theorem_id, per_seed, rhs, bool(lhs <= rhs), float(rhs - lhs), details)

    if theorem_id == "thm2_pl":
        if mu <= 0:
            raise ValueError("PL rate requires mu > 0")
        gsched = schedules.pl_outer(mu, beta)
        rsched = schedules.pl_inner(mu, beta)
        gammas = np.array([gsched.value(t) for t in range(T)])
        rhos = np.array([rsched.value(t) for t in range(T)])
        per_seed = np.empty(seeds)
        for s in range(seeds):
            _, _, w_final, _ = _run_stochastic(problem, gammas, rhos, T, b, seed0 + s)
            per_seed[s] = problem.loss(w_final) - problem.loss_min
        lhs = float(per_seed.mean())
        rhs = 3.0 * beta**2 * dl0 / (mu**2 * T**2) + 22.0 * beta * problem.sigma_sq / (mu**2 * b * T)
        details["per_seed"] = list(map(float, per_seed))
        return RateCheckResult(theorem_id, per_seed, rhs, bool(lhs <= rhs), float(rhs - lhs), details)

    # Deterministic theorems: step sizes fixed inside the validity region.
    gamma = 0.5 / beta
    rho_det = 0.5 / beta
    grad_sq, losses, w_final, w_avg = kernels.quad_nsam_full(
        problem.A, problem.w_star, np.asarray(w0, dtype=np.float64), gamma, rho_det, T)
    details.update(gamma=gamma, rho=rho_det)

    if theorem_id == "det_nonconvex":
        lhs_trace = np.cumsum(grad_sq[:T]) / np.arange(1, T + 1)
        denom = T * gamma * (1.0 - rho_det * beta) * (1.0 - 0.5 * gamma * beta * (1.0 - rho_det * beta))
        rhs = float(losses[0] - losses[T]) / denom
        lhs = float(lhs_trace[-1])
        return RateCheckResult(theorem_id, lhs_trace, rhs, bool(lhs <= rhs), float(rhs - lhs), details)

    if theorem_id == "det_pl":
        if mu <= 0:
            raise ValueError("PL rate requires mu > 0")
        rate = 1.0 - 2.0 * gamma * mu * (1.0 - rho_det * beta) * (1.0 - 0.5 * gamma * beta * (1.0 - rho_det * beta))
        rhs = dl0 * rate ** np.arange(T + 1)
        lhs_trace = losses - problem.loss_min
        ok = bool(np.all(lhs_trace <= rhs + 1e-12 * (1.0 + dl0)))
        margin = float(np.min(rhs - lhs_trace))
        details["rate"] = rate
        return RateCheckResult(theorem_id, lhs_trace, rhs, ok, margin, details)

    dist0_sq = float(np.sum((w0 - problem.w_star) ** 2))
    # floating-point floor: iterates cannot contract below roundoff even when
    # the geometric bound does, so allow slack at machine-precision scale
    fp_tol = 1e-12 * (1.0 + dist0_sq)
    if theorem_id == "det_convex":
        lhs = problem.loss(w_avg) - problem.loss_min
        rhs = (2.0 * rho_det * beta + 1.0) / (gamma * (2.0 - gamma * beta * (1.0 + rho_det * beta)) * T) * dist0_sq
        return RateCheckResult(theorem_id, np.array([lhs]), rhs, bool(lhs <= rhs + fp_tol), float(rhs - lhs), details)

    # det_strongly_convex
    if mu <= 0:
        raise ValueError("strongly convex rate requires mu > 0")
    lhs = float(np.sum((w_final - problem.w_star) ** 2))
    rate = 1.0 - gamma * mu * (2.0 - gamma * beta * (1.0 + rho_det * beta))
    rhs = rate**T * (2.0 * rho_det + 1.0) * dist0_sq
    details["rate"] = rate
    return RateCheckResult(theorem_id, np.array([lhs]), rhs, bool(lhs <= rhs + fp_tol), float(rhs - lhs), details)


# ---------------------------------------------------------------------------
# Tightness probes: instances where the lemma bounds are achieved
# ---------------------------------------------------------------------------


def probe_alignment_tightness(d: int = 5, rho: float = 0.7, seed: int = 0) -> float:
    """Isotropic quadratic, strongly convex regime: the bound is an equality.

    Returns |margin| / ||grad L||^2, which should be at floating-point level.
    """
    problem = _isotropic(d, seed)
    w = problem.w_star + stream(seed, "probe").standard_normal(d)
    g = problem.grad(w)
    margin = check_alignment(problem, w, rho, "strongly_convex")
    return abs(margin) / float(g @ g)


def probe_descent_tightness(d: int = 5, gamma_scale: float = 0.5, seed: int = 0) -> float:
    """Isotropic quadratic with rho = 0: the descent bound is an equality."""
    problem = _isotropic(d, seed)
    w = problem.w_star + stream(seed, "probe").standard_normal(d)
    g = problem.grad(w)
    margin = check_descent(problem, w, gamma_scale / problem.beta_smooth, 0.0)
    return abs(margin) / float(g @ g)


def _isotropic(d: int, seed: int) -> QuadraticObjective:
    rng = stream(seed, "data")
    a = float(rng.uniform(0.5, 2.0))
    return QuadraticObjective(A=a * np.eye(d), w_star=rng.standard_normal(d),
                              zeta=np.zeros((2, d)))
