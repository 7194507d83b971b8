"""Noise schedules over normalized time and their discretization.

alpha(t) is the survival probability of a clean token at time t, running
from alpha(0) = 1 to alpha(1) = 0. The cosine schedule uses the half-angle
form (1 + cos(pi t)) / 2, which hits the endpoints and the midpoint 0.5
exactly in floating point.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class ScheduleKind(enum.Enum):
    COSINE = "cosine"
    LINEAR = "linear"


@dataclass(frozen=True)
class NoiseSchedule:
    kind: ScheduleKind = ScheduleKind.COSINE
    T: int = 32

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")


def alpha(schedule: NoiseSchedule, t: float) -> float:
    """Survival probability at normalized time t in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if schedule.kind is ScheduleKind.COSINE:
        return 0.5 * (1.0 + math.cos(math.pi * t))
    return 1.0 - t


def step_times(schedule: NoiseSchedule, i: int) -> tuple[float, float]:
    """(s, t) = ((i-1)/T, i/T) for step index i in 1..T."""
    if not 1 <= i <= schedule.T:
        raise IndexError(f"step index {i} out of range 1..{schedule.T}")
    return ((i - 1) / schedule.T, i / schedule.T)


def unmask_prob(schedule: NoiseSchedule, i: int) -> float:
    """Probability a masked position flips to its clean token at reverse
    step i: (alpha_s - alpha_t) / (1 - alpha_t). Exactly 1 when s = 0."""
    s, t = step_times(schedule, i)
    a_s, a_t = alpha(schedule, s), alpha(schedule, t)
    return (a_s - a_t) / (1.0 - a_t)


def lambda_weight(schedule: NoiseSchedule, i: int) -> float:
    """Loss weight at step i: (alpha_t - alpha_s) / (1 - alpha_t), i.e. the
    negated unmask probability. Non-positive, so each weighted
    log-probability summand is >= 0."""
    return -unmask_prob(schedule, i)
