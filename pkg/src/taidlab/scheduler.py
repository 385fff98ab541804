"""Adaptive schedule for the interpolation parameter t.

The parameter starts at ``t_start`` and is pushed towards ``t_end`` by a
momentum-smoothed measure of relative training progress, with a linear
schedule as a hard lower bound: fast-improving runs move t ahead of the
linear ramp, but t can never fall behind it, never decreases, and reaches
``t_end`` exactly after ``total_steps`` updates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import math

from .errors import InvalidInputError, InvalidParameterError
from .prob import sigmoid

__all__ = ["SchedulerConfig", "SchedulerState", "linear_t", "update"]


@dataclass(frozen=True)
class SchedulerConfig:
    """Hyperparameters of the t-update rule.

    The defaults (alpha=5e-4, beta=0.99, epsilon=1e-8) are the standard
    operating point; ``total_steps`` must match the length of the training
    run so the linear lower bound ends at ``t_end``.
    """

    total_steps: int
    t_start: float = 0.4
    t_end: float = 1.0
    alpha: float = 5e-4
    beta: float = 0.99
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.total_steps < 1:
            raise InvalidParameterError("total_steps must be >= 1")
        if not 0.0 <= self.t_start <= 1.0:
            raise InvalidParameterError(f"t_start={self.t_start} outside [0, 1]")
        if not self.t_start < self.t_end <= 1.0:
            raise InvalidParameterError(
                f"t_end={self.t_end} must lie in (t_start, 1]"
            )
        if self.alpha <= 0.0:
            raise InvalidParameterError("alpha must be > 0")
        if not 0.0 <= self.beta < 1.0:
            raise InvalidParameterError("beta must be in [0, 1)")
        if self.epsilon <= 0.0:
            raise InvalidParameterError("epsilon must be > 0")


@dataclass(frozen=True)
class SchedulerState:
    """Mutable-by-replacement state: current t, momentum, last objective, step count.

    ``prev_objective`` is None before the first update; the first relative
    change is defined as 0 in that case (a neutral step, sigmoid(0)=0.5),
    avoiding the Inf arithmetic of an infinite initial loss.
    """

    t: float
    momentum: float = 0.0
    prev_objective: float | None = None
    step: int = 0

    @classmethod
    def initial(cls, config: SchedulerConfig) -> "SchedulerState":
        return cls(t=config.t_start)


def linear_t(config: SchedulerConfig, n: int) -> float:
    """Linear ramp value after n of total_steps updates."""
    if not 0 <= n <= config.total_steps:
        raise InvalidParameterError(
            f"step n={n} outside [0, {config.total_steps}]"
        )
    frac = n / config.total_steps
    return config.t_start + (config.t_end - config.t_start) * frac


def update(
    state: SchedulerState, config: SchedulerConfig, objective_now: float
) -> SchedulerState:
    """Advance the schedule by one step given the current objective value.

    delta = (prev - now) / (prev + eps) measures relative improvement;
    its momentum average drives a sigmoid-bounded step scaled by (1 - t),
    clamped between the linear ramp and t_end.  Steps past ``total_steps``
    keep t pinned at t_end.
    """
    if not math.isfinite(objective_now):
        raise InvalidInputError(f"objective value {objective_now} is not finite")
    if objective_now < 0.0:
        raise InvalidInputError(f"objective value {objective_now} is negative")

    if state.prev_objective is None:
        delta = 0.0
    else:
        delta = (state.prev_objective - objective_now) / (
            state.prev_objective + config.epsilon
        )
    momentum = config.beta * state.momentum + (1.0 - config.beta) * delta
    step_size = config.alpha * sigmoid(momentum) * (1.0 - state.t)

    n = state.step + 1
    floor = linear_t(config, min(n, config.total_steps))
    t = min(config.t_end, max(floor, state.t + step_size))
    return replace(
        state, t=t, momentum=momentum, prev_objective=float(objective_now), step=n
    )
