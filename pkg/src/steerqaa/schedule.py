"""Annealing schedules f_i(tau), f_f(tau) and their tau-derivatives."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class ScheduleKind(enum.Enum):
    COS_SIN = "cos-sin"


@dataclass(frozen=True)
class ScheduleValues:
    f_i: float
    f_f: float
    df_i: float
    df_f: float


@dataclass(frozen=True)
class Schedule:
    """Interpolation weights for the initial and problem Hamiltonians.

    ``f_i(0) = f_f(1) = 1`` and ``f_i(1) = f_f(0) = 0``.  Derivatives are with
    respect to tau = t / t_a; divide by t_a for time derivatives.
    """

    kind: ScheduleKind = ScheduleKind.COS_SIN

    def evaluate(self, tau: float) -> ScheduleValues:
        if not 0.0 <= tau <= 1.0:
            raise ValueError(f"tau={tau} outside [0, 1]")
        if self.kind is ScheduleKind.COS_SIN:
            c = math.cos(0.5 * math.pi * tau)
            s = math.sin(0.5 * math.pi * tau)
            # d/dtau cos^2(pi tau / 2) = -(pi/2) sin(pi tau)
            d = 0.5 * math.pi * math.sin(math.pi * tau)
            return ScheduleValues(c * c, s * s, -d, d)
        raise NotImplementedError(self.kind)

    def f_i(self, tau: float) -> float:
        return self.evaluate(tau).f_i

    def f_f(self, tau: float) -> float:
        return self.evaluate(tau).f_f


def evaluate(schedule: Schedule, tau: float) -> tuple[float, float, float, float]:
    v = schedule.evaluate(tau)
    return v.f_i, v.f_f, v.df_i, v.df_f


COS_SIN = Schedule(ScheduleKind.COS_SIN)
