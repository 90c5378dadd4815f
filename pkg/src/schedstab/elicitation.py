"""Turn a decision maker's statements about how fast the impact of a change
fades into the decay base ``I`` used by :func:`schedstab.measures.instability`.

Two kinds of statement are supported:

* the impact left at the end of the planning horizon, as a fraction ``pc``
  of the impact right at the rescheduling moment (``I = pc ** (1 / T)``);
* the fractional decrease ``dec`` over a familiar reference period such as
  a five-day working week (``I = (1 - dec) ** (1 / period)``).

``T`` and ``period`` must be given in the same ticks as schedule start times.
"""

from __future__ import annotations

from dataclasses import dataclass

WORK_WEEK = 5


@dataclass(frozen=True)
class HorizonStatement:
    pc: float
    T: int

    def __post_init__(self):
        if not 0 < self.pc <= 1:
            raise ValueError(f"pc must lie in (0, 1], got {self.pc!r}")
        if not self.T >= 1:
            raise ValueError(f"horizon T must be at least 1, got {self.T!r}")


@dataclass(frozen=True)
class PeriodStatement:
    dec: float
    period: int = WORK_WEEK

    def __post_init__(self):
        if not 0 <= self.dec < 1:
            raise ValueError(f"dec must lie in [0, 1), got {self.dec!r}")
        if not self.period >= 1:
            raise ValueError(f"period must be at least 1, got {self.period!r}")


def i_from_horizon(statement: HorizonStatement) -> float:
    return float(statement.pc) ** (1.0 / statement.T)


def i_from_period(statement: PeriodStatement) -> float:
    # same arithmetic as the horizon route, with the period's end as the horizon
    return i_from_horizon(HorizonStatement(1.0 - statement.dec, statement.period))
