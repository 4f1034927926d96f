"""Step-size schedules, including the ones prescribed by the rate theorems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable


@dataclass(frozen=True)
class StepSchedule:
    kind: str
    params: dict = field(default_factory=dict)
    _fn: Callable[[int], float] = None

    def value(self, t: int) -> float:
        return self._fn(t)

    def __call__(self, t: int) -> float:
        return self._fn(t)


def constant(v: float) -> StepSchedule:
    return StepSchedule("constant", {"value": float(v)}, lambda t: float(v))


def piecewise(base: float, decay_steps: tuple, factor: float) -> StepSchedule:
    """Multiply by `factor` at each step in `decay_steps`."""
    decay_steps = tuple(sorted(int(s) for s in decay_steps))

    def fn(t: int) -> float:
        k = sum(1 for s in decay_steps if t >= s)
        return base * factor**k

    return StepSchedule("piecewise", {"base": base, "decay_steps": decay_steps, "factor": factor}, fn)


def nonconvex_outer(T: int, beta_smooth: float) -> StepSchedule:
    """Outer step 1 / (sqrt(T) * beta) for the nonconvex stochastic rate."""
    v = 1.0 / (math.sqrt(T) * beta_smooth)
    return StepSchedule("nonconvex_thm2_outer", {"T": T, "beta_smooth": beta_smooth}, lambda t: v)


def nonconvex_inner(T: int, beta_smooth: float) -> StepSchedule:
    """Ascent step 1 / (T**0.25 * beta): decays slower than the outer step."""
    v = 1.0 / (T**0.25 * beta_smooth)
    return StepSchedule("nonconvex_thm2_inner", {"T": T, "beta_smooth": beta_smooth}, lambda t: v)


def pl_outer(mu: float, beta_smooth: float) -> StepSchedule:
    """min{(8t+4) / (3 mu (t+1)^2), 1 / (2 beta)}."""

    def fn(t: int) -> float:
        return min((8.0 * t + 4.0) / (3.0 * mu * (t + 1.0) ** 2), 1.0 / (2.0 * beta_smooth))

    return StepSchedule("pl_thm2_outer", {"mu": mu, "beta_smooth": beta_smooth}, fn)


def pl_inner(mu: float, beta_smooth: float) -> StepSchedule:
    """sqrt(gamma_t / beta), proportional to the square root of the outer step."""
    outer = pl_outer(mu, beta_smooth)

    def fn(t: int) -> float:
        return math.sqrt(outer.value(t) / beta_smooth)

    return StepSchedule("pl_thm2_inner", {"mu": mu, "beta_smooth": beta_smooth}, fn)


def proportional_sqrt(outer: StepSchedule, beta_smooth: float) -> StepSchedule:
    """rho_t = sqrt(gamma_t / beta) for an arbitrary outer schedule."""

    def fn(t: int) -> float:
        return math.sqrt(outer.value(t) / beta_smooth)

    return StepSchedule("proportional_sqrt", {"outer": outer.kind, "beta_smooth": beta_smooth}, fn)


def as_schedule(x) -> StepSchedule:
    if isinstance(x, StepSchedule):
        return x
    return constant(float(x))
