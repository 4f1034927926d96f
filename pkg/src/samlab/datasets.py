"""Synthetic problem generators and dataset serialization."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .rng import GENERATOR_NAME, stream


@dataclass(frozen=True)
class Dataset:
    """Immutable regression problem: design matrix X (n x d), targets y (n).

    When `beta_star` is present the targets are noiseless, y == X @ beta_star
    exactly, and the analytic population test loss is available.
    """

    X: np.ndarray
    y: np.ndarray
    beta_star: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"inconsistent shapes X{X.shape}, y{y.shape}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("need n >= 1 and d >= 1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.beta_star is not None:
            bs = np.asarray(self.beta_star, dtype=np.float64)
            if bs.shape != (X.shape[1],):
                raise ValueError("beta_star length must equal d")
            bs.setflags(write=False)
            object.__setattr__(self, "beta_star", bs)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def gen_sparse_regression(d: int, n: int, k: int, seed: int) -> Dataset:
    """Gaussian design with a k-sparse ground truth and noiseless targets.

    Rows of X are iid N(0, I_d). The support of beta_star is uniform over
    coordinates; nonzero entries are +-1 so that ||beta_star||_2 = sqrt(k).
    """
    if not (1 <= k <= d):
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    if n < 1:
        raise ValueError("need n >= 1")
    rng = stream(seed, "data")
    X = rng.standard_normal((n, d))
    support = rng.choice(d, size=k, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=k)
    beta_star = np.zeros(d)
    beta_star[support] = signs
    y = X @ beta_star
    meta = {
        "seed": int(seed),
        "generator_name": f"sparse_regression/{GENERATOR_NAME}",
        "sparsity": int(k),
    }
    return Dataset(X=X, y=y, beta_star=beta_star, meta=meta)


# Fixed piecewise-linear target with 3 kinks for the 1D interpolation demo.
_KINKS_X = np.array([-1.0, -0.5, 0.0, 0.6, 1.0])
_KINKS_Y = np.array([0.0, 0.8, -0.4, 0.5, -0.2])


def gen_1d_regression(seed: int) -> Dataset:
    """12 scalar points, x equispaced on [-1, 1], from a piecewise-linear target."""
    x = np.linspace(-1.0, 1.0, 12)
    y = np.interp(x, _KINKS_X, _KINKS_Y)
    meta = {
        "seed": int(seed),
        "generator_name": f"piecewise_linear_1d/{GENERATOR_NAME}",
        "sparsity": 0,
    }
    return Dataset(X=x[:, None].copy(), y=y, beta_star=None, meta=meta)


def population_test_loss(beta: np.ndarray, beta_star: np.ndarray) -> float:
    """Exact expected per-example squared-parameter loss under x ~ N(0, I).

    Equals (1/4) ||beta - beta_star||_2^2, the analytic substitute for a
    held-out test set.
    """
    beta = np.asarray(beta, dtype=np.float64)
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if beta.shape != beta_star.shape:
        raise ValueError("beta and beta_star must have equal length")
    diff = beta - beta_star
    return 0.25 * float(diff @ diff)


def _fmt(x: float) -> str:
    # %.17g round-trips any float64 exactly.
    return format(float(x), ".17g")


def save_dataset(data: Dataset, path: str | os.PathLike) -> None:
    """Write the single-JSON dataset file (atomically)."""
    doc = {
        "meta": data.meta,
        "X": [[_fmt(v) for v in row] for row in data.X],
        "y": [_fmt(v) for v in data.y],
        "beta_star": None if data.beta_star is None else [_fmt(v) for v in data.beta_star],
    }
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def load_dataset(path: str | os.PathLike) -> Dataset:
    with open(path) as fh:
        doc = json.load(fh)
    X = np.array([[float(v) for v in row] for row in doc["X"]], dtype=np.float64)
    y = np.array([float(v) for v in doc["y"]], dtype=np.float64)
    bs = doc.get("beta_star")
    beta_star = None if bs is None else np.array([float(v) for v in bs], dtype=np.float64)
    return Dataset(X=X, y=y, beta_star=beta_star, meta=doc.get("meta", {}))
