"""Differentiable test models with exact per-example loss/gradient contracts.

Four families share one duck-typed interface (``num_params``, ``loss``,
``grad``, ``per_example_grad``): a diagonal linear network with squared loss,
a plain linear margin classifier, a one-hidden-layer ReLU net on scalar
inputs, and analytically-characterized quadratic objectives used by the
convergence checks. All evaluations are pure functions of (params, data).

Naming note: the quadratic family's smoothness constant is called
``beta_smooth`` throughout to keep it apart from the linear predictor
``beta`` of the diagonal net.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset


def _resolve_idx(idx, n: int) -> np.ndarray:
    if idx is None:
        return np.arange(n)
    idx = np.asarray(idx, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ValueError("index set must be nonempty")
    if idx.min() < 0 or idx.max() >= n:
        raise ValueError(f"index out of range [0, {n})")
    return idx


# ---------------------------------------------------------------------------
# Diagonal linear network: predictor beta = w_plus**2 - w_minus**2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiagNetParams:
    """Parameters of the diagonal net plus the record of their initialization.

    `alpha` is the (strictly positive) common value of w_plus and w_minus at
    initialization; it parametrizes the implicit-bias potential.
    """

    w_plus: np.ndarray
    w_minus: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        wp = np.asarray(self.w_plus, dtype=np.float64)
        wm = np.asarray(self.w_minus, dtype=np.float64)
        al = np.asarray(self.alpha, dtype=np.float64)
        if not (wp.shape == wm.shape == al.shape) or wp.ndim != 1:
            raise ValueError("w_plus, w_minus, alpha must be 1-d of equal length")
        if not np.all(al > 0):
            raise ValueError("alpha entries must be strictly positive")
        object.__setattr__(self, "w_plus", wp)
        object.__setattr__(self, "w_minus", wm)
        object.__setattr__(self, "alpha", al)

    @property
    def d(self) -> int:
        return self.w_plus.shape[0]

    @property
    def beta(self) -> np.ndarray:
        return self.w_plus * self.w_plus - self.w_minus * self.w_minus

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.w_plus, self.w_minus])

    @classmethod
    def init(cls, alpha) -> "DiagNetParams":
        """Balanced initialization w_plus = w_minus = alpha."""
        alpha = np.asarray(alpha, dtype=np.float64)
        return cls(w_plus=alpha.copy(), w_minus=alpha.copy(), alpha=alpha)

    @classmethod
    def from_flat(cls, w: np.ndarray, alpha) -> "DiagNetParams":
        w = np.asarray(w, dtype=np.float64)
        d = w.shape[0] // 2
        return cls(w_plus=w[:d].copy(), w_minus=w[d:].copy(), alpha=np.asarray(alpha, float))


def diag_net_loss(params: DiagNetParams, data: Dataset, idx=None) -> float:
    """(1 / (4 |idx|)) sum of squared residuals of the predictor beta."""
    if params.d != data.d:
        raise ValueError("parameter/data dimension mismatch")
    idx = _resolve_idx(idx, data.n)
    r = data.X[idx] @ params.beta - data.y[idx]
    return float(r @ r) / (4.0 * idx.size)


def diag_net_grad(params: DiagNetParams, data: Dataset, idx=None) -> np.ndarray:
    """Gradient w.r.t. the flat vector [w_plus, w_minus]."""
    if params.d != data.d:
        raise ValueError("parameter/data dimension mismatch")
    idx = _resolve_idx(idx, data.n)
    Xb = data.X[idx]
    r = Xb @ params.beta - data.y[idx]
    g = (Xb.T @ r) / idx.size
    return np.concatenate([g * params.w_plus, -g * params.w_minus])


class DiagonalLinearNet:
    """Flat-vector interface over the diagonal net; layout [w_plus, w_minus]."""

    def __init__(self, d: int):
        self.d = d
        self.num_params = 2 * d

    def split(self, w: np.ndarray):
        return w[: self.d], w[self.d :]

    def beta(self, w: np.ndarray) -> np.ndarray:
        wp, wm = self.split(w)
        return wp * wp - wm * wm

    def init_params(self, alpha) -> np.ndarray:
        alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (self.d,))
        return np.concatenate([alpha, alpha])

    def loss(self, w: np.ndarray, data: Dataset, idx=None) -> float:
        idx = _resolve_idx(idx, data.n)
        r = data.X[idx] @ self.beta(w) - data.y[idx]
        return float(r @ r) / (4.0 * idx.size)

    def grad(self, w: np.ndarray, data: Dataset, idx=None) -> np.ndarray:
        idx = _resolve_idx(idx, data.n)
        wp, wm = self.split(w)
        Xb = data.X[idx]
        r = Xb @ self.beta(w) - data.y[idx]
        g = (Xb.T @ r) / idx.size
        return np.concatenate([g * wp, -g * wm])

    def per_example_grad(self, w: np.ndarray, data: Dataset, i: int) -> np.ndarray:
        return self.grad(w, data, np.array([i]))


# ---------------------------------------------------------------------------
# Linear margin classifier
# ---------------------------------------------------------------------------


def _margin_loss(kind: str, m: np.ndarray) -> np.ndarray:
    if kind == "logistic":
        return np.logaddexp(0.0, -m)
    if kind == "exponential":
        return np.exp(-m)
    raise ValueError(f"unknown margin loss {kind!r}")


def _margin_loss_deriv(kind: str, m: np.ndarray) -> np.ndarray:
    if kind == "logistic":
        # -sigmoid(-m), computed stably
        return -1.0 / (1.0 + np.exp(m))
    if kind == "exponential":
        return -np.exp(-m)
    raise ValueError(f"unknown margin loss {kind!r}")


def _check_labels(y: np.ndarray) -> None:
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("margin losses require labels in {-1, +1}")


def linear_margin_loss(w: np.ndarray, data: Dataset, loss_kind: str, idx=None) -> float:
    """Mean decreasing margin loss (1/|idx|) sum l(y_i <w, x_i>)."""
    idx = _resolve_idx(idx, data.n)
    _check_labels(data.y[idx])
    margins = data.y[idx] * (data.X[idx] @ w)
    return float(np.mean(_margin_loss(loss_kind, margins)))


class LinearMarginModel:
    """Linear predictor f_x(w) = <w, x> under a decreasing margin loss."""

    def __init__(self, d: int, loss_kind: str = "logistic"):
        self.d = d
        self.num_params = d
        self.loss_kind = loss_kind
        _margin_loss(loss_kind, np.zeros(1))  # validate early

    def loss(self, w: np.ndarray, data: Dataset, idx=None) -> float:
        return linear_margin_loss(w, data, self.loss_kind, idx)

    def grad(self, w: np.ndarray, data: Dataset, idx=None) -> np.ndarray:
        idx = _resolve_idx(idx, data.n)
        yb = data.y[idx]
        _check_labels(yb)
        Xb = data.X[idx]
        margins = yb * (Xb @ w)
        coef = _margin_loss_deriv(self.loss_kind, margins) * yb
        return (Xb.T @ coef) / idx.size

    def per_example_grad(self, w: np.ndarray, data: Dataset, i: int) -> np.ndarray:
        return self.grad(w, data, np.array([i]))


# ---------------------------------------------------------------------------
# One-hidden-layer ReLU network on scalar inputs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReluNet1D:
    """f(x) = c + sum_j v_j * max(0, u_j x + b_j)."""

    u: np.ndarray
    b: np.ndarray
    v: np.ndarray
    c: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if not (u.shape == b.shape == v.shape) or u.ndim != 1:
            raise ValueError("u, b, v must be 1-d of equal length")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "c", float(self.c))

    @property
    def hidden_width(self) -> int:
        return self.u.shape[0]

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        pre = np.outer(x, self.u) + self.b
        return self.c + np.maximum(pre, 0.0) @ self.v

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.u, self.b, self.v, [self.c]])


class ReluNet:
    """Flat-vector interface; layout [u, b, v, c], quadratic loss 1/(2|idx|)."""

    def __init__(self, hidden_width: int):
        self.h = hidden_width
        self.num_params = 3 * hidden_width + 1

    def unpack(self, w: np.ndarray):
        h = self.h
        return w[:h], w[h : 2 * h], w[2 * h : 3 * h], w[3 * h]

    def init_params(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        # He-style fan-in init for u, v; zero biases
        w = np.zeros(self.num_params)
        w[: self.h] = rng.standard_normal(self.h) * scale
        w[2 * self.h : 3 * self.h] = rng.standard_normal(self.h) * scale / np.sqrt(self.h)
        return w

    def forward(self, w: np.ndarray, x: np.ndarray) -> np.ndarray:
        u, b, v, c = self.unpack(w)
        pre = np.outer(x, u) + b
        return c + np.maximum(pre, 0.0) @ v

    def loss(self, w: np.ndarray, data: Dataset, idx=None) -> float:
        idx = _resolve_idx(idx, data.n)
        r = self.forward(w, data.X[idx, 0]) - data.y[idx]
        return float(r @ r) / (2.0 * idx.size)

    def grad(self, w: np.ndarray, data: Dataset, idx=None) -> np.ndarray:
        """Exact subgradient with the convention relu'(0) = 0."""
        idx = _resolve_idx(idx, data.n)
        u, b, v, c = self.unpack(w)
        x = data.X[idx, 0]
        pre = np.outer(x, u) + b
        act = np.maximum(pre, 0.0)
        mask = (pre > 0.0).astype(np.float64)
        r = (c + act @ v) - data.y[idx]
        k = idx.size
        gu = ((r[:, None] * mask * x[:, None]) * v).sum(axis=0) / k
        gb = ((r[:, None] * mask) * v).sum(axis=0) / k
        gv = (r[:, None] * act).sum(axis=0) / k
        gc = r.sum() / k
        return np.concatenate([gu, gb, gv, [gc]])

    def per_example_grad(self, w: np.ndarray, data: Dataset, i: int) -> np.ndarray:
        return self.grad(w, data, np.array([i]))


def relu_net_grad(params: ReluNet1D, data: Dataset, idx=None) -> np.ndarray:
    """Gradient of the quadratic loss w.r.t. the flat vector [u, b, v, c]."""
    model = ReluNet(params.hidden_width)
    return model.grad(params.to_flat(), data, idx)


# ---------------------------------------------------------------------------
# Quadratic objectives with exact constants
# ---------------------------------------------------------------------------


class QuadraticObjective:
    """L(w) = 1/2 (w - w_star)' A (w - w_star), per-example losses shifted by
    mean-zero linear terms zeta_i so that the gradient-noise variance is exact
    and independent of w.

    Stored constants are exact for this family: `beta_smooth` (largest
    eigenvalue of A), `mu` (smallest nonzero eigenvalue), `sigma_sq`
    (mean of ||zeta_i||^2), and L_* = 0.
    """

    def __init__(self, A: np.ndarray, w_star: np.ndarray, zeta: np.ndarray):
        A = np.asarray(A, dtype=np.float64)
        w_star = np.asarray(w_star, dtype=np.float64)
        zeta = np.asarray(zeta, dtype=np.float64)
        d = w_star.shape[0]
        if A.shape != (d, d) or zeta.ndim != 2 or zeta.shape[1] != d:
            raise ValueError("inconsistent quadratic objective shapes")
        if not np.allclose(A, A.T, atol=1e-12):
            raise ValueError("A must be symmetric")
        if not np.allclose(zeta.sum(axis=0), 0.0, atol=1e-9):
            raise ValueError("per-example shifts must sum to zero")
        self.A = A
        self.w_star = w_star
        self.zeta = zeta
        self.d = d
        self.n = zeta.shape[0]
        self.num_params = d
        eigs = np.linalg.eigvalsh(A)
        if eigs[0] < -1e-10:
            raise ValueError("A must be positive semidefinite")
        self.beta_smooth = float(eigs[-1])
        nonzero = eigs[eigs > 1e-12 * max(1.0, eigs[-1])]
        self.mu = float(nonzero[0]) if nonzero.size else 0.0
        self.lambda_min = float(max(eigs[0], 0.0))
        self.sigma_sq = float(np.mean(np.sum(zeta * zeta, axis=1)))
        self.loss_min = 0.0

    @classmethod
    def random(cls, d: int, n: int, beta_smooth: float, mu: float, sigma: float,
               seed: int, rank_deficient: bool = False) -> "QuadraticObjective":
        """Random instance with prescribed extreme eigenvalues and noise level.

        Shifts come in +-pairs of norm sigma, so the sum is exactly zero and
        every ||zeta_i|| <= sigma.
        """
        from .rng import stream

        rng = stream(seed, "data")
        eigs = rng.uniform(mu, beta_smooth, size=d)
        eigs[0] = mu
        eigs[-1] = beta_smooth
        if rank_deficient:
            eigs[0] = 0.0
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        A = (Q * eigs) @ Q.T
        A = 0.5 * (A + A.T)
        w_star = rng.standard_normal(d)
        zeta = np.zeros((n, d))
        for j in range(n // 2):
            z = rng.standard_normal(d)
            z *= sigma / np.linalg.norm(z)
            zeta[2 * j] = z
            zeta[2 * j + 1] = -z
        return cls(A=A, w_star=w_star, zeta=zeta)

    def loss(self, w: np.ndarray, data=None, idx=None) -> float:
        delta = w - self.w_star
        full = 0.5 * float(delta @ (self.A @ delta))
        if idx is None:
            return full
        idx = _resolve_idx(idx, self.n)
        return full + float(self.zeta[idx].mean(axis=0) @ delta)

    def grad(self, w: np.ndarray, data=None, idx=None) -> np.ndarray:
        g = self.A @ (w - self.w_star)
        if idx is None:
            return g
        idx = _resolve_idx(idx, self.n)
        return g + self.zeta[idx].mean(axis=0)

    def per_example_grad(self, w: np.ndarray, data=None, i: int = 0) -> np.ndarray:
        return self.A @ (w - self.w_star) + self.zeta[i]


# ---------------------------------------------------------------------------
# Shared numeric oracles
# ---------------------------------------------------------------------------


def finite_diff_grad(f, w: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient; the independent oracle for grad contracts."""
    w = np.asarray(w, dtype=np.float64)
    g = np.empty_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = step
        g[j] = (f(w + e) - f(w - e)) / (2.0 * step)
    return g


def estimate_smoothness(grad_fn, center: np.ndarray, radius: float,
                        n_probes: int, rng: np.random.Generator) -> float:
    """Empirical Lipschitz constant of grad_fn over random pairs near center."""
    best = 0.0
    for _ in range(n_probes):
        u = center + rng.uniform(-radius, radius, size=center.shape)
        v = center + rng.uniform(-radius, radius, size=center.shape)
        denom = np.linalg.norm(u - v)
        if denom < 1e-12:
            continue
        best = max(best, np.linalg.norm(grad_fn(u) - grad_fn(v)) / denom)
    return best
