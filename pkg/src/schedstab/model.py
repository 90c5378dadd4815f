"""Job-shop data model: operations, jobs, instances, schedules and the
utility objectives evaluated on them.

Time is integer ticks throughout. An operation occupies the half-open
interval ``[s, s + p)`` on its machine, so a successor may start exactly
when its predecessor ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterator, Mapping

OpKey = tuple  # (job_id, op_index)


def id_key(value: Hashable) -> tuple:
    """Sort key that orders mixed int/str identifiers deterministically."""
    return (isinstance(value, str), value)


def op_sort_key(key: OpKey) -> tuple:
    return (id_key(key[0]), key[1])


def as_weight(value) -> Fraction:
    if isinstance(value, float):
        value = str(value)
    weight = Fraction(value)
    if weight <= 0:
        raise ValueError(f"job weight must be positive, got {value!r}")
    return weight


@dataclass(frozen=True)
class Operation:
    job_id: Hashable
    op_index: int
    machine_id: Hashable
    duration: int

    def __post_init__(self):
        if int(self.duration) != self.duration or self.duration <= 0:
            raise ValueError(f"operation {self.key} needs a positive integer duration")

    @property
    def key(self) -> OpKey:
        return (self.job_id, self.op_index)


@dataclass(frozen=True)
class Job:
    """A job is an ordered chain of operations.

    ``release`` is the earliest time any of its operations may start. It is
    zero for jobs known from the outset and the arrival time for jobs added
    by a rescheduling event.
    """

    job_id: Hashable
    operations: tuple[Operation, ...]
    due_date: int | None = None
    weight: Fraction = Fraction(1)
    release: int = 0

    def __post_init__(self):
        object.__setattr__(self, "operations", tuple(self.operations))
        object.__setattr__(self, "weight", as_weight(self.weight))
        if not self.operations:
            raise ValueError(f"job {self.job_id!r} has no operations")
        for k, op in enumerate(self.operations, start=1):
            if op.job_id != self.job_id or op.op_index != k:
                raise ValueError(
                    f"job {self.job_id!r}: operation {op.key} out of place, expected index {k}"
                )
        if self.due_date is not None and self.due_date < 0:
            raise ValueError(f"job {self.job_id!r} has a negative due date")
        if self.release < 0:
            raise ValueError(f"job {self.job_id!r} has a negative release time")

    @property
    def total_processing(self) -> int:
        return sum(op.duration for op in self.operations)


@dataclass(frozen=True)
class Downtime:
    """Machine unavailable over ``[start, until)``."""

    machine_id: Hashable
    start: int
    until: int


@dataclass(frozen=True)
class ProblemInstance:
    jobs: tuple[Job, ...]
    machines: tuple
    horizon: int
    name: str = "instance"
    downtimes: tuple[Downtime, ...] = ()
    _ops: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "machines", tuple(self.machines))
        object.__setattr__(self, "downtimes", tuple(self.downtimes))
        if self.horizon < 1:
            raise ValueError("planning horizon must be a positive integer")
        known = set(self.machines)
        ops = {}
        for job in self.jobs:
            for op in job.operations:
                if op.machine_id not in known:
                    raise ValueError(f"operation {op.key} uses unknown machine {op.machine_id!r}")
                if op.key in ops:
                    raise ValueError(f"duplicate operation {op.key}")
                ops[op.key] = op
        for window in self.downtimes:
            if window.machine_id not in known:
                raise ValueError(f"downtime on unknown machine {window.machine_id!r}")
        object.__setattr__(self, "_ops", ops)

    @property
    def operations(self) -> Mapping[OpKey, Operation]:
        return self._ops

    def job(self, job_id) -> Job:
        for job in self.jobs:
            if job.job_id == job_id:
                return job
        raise KeyError(job_id)

    def has_job(self, job_id) -> bool:
        return any(job.job_id == job_id for job in self.jobs)

    def windows(self, machine_id) -> list[tuple[int, int]]:
        return sorted((w.start, w.until) for w in self.downtimes if w.machine_id == machine_id)


@dataclass(frozen=True, eq=False)
class Schedule:
    """Start time for every operation of ``instance``."""

    instance: ProblemInstance
    starts: Mapping[OpKey, int]

    def __post_init__(self):
        object.__setattr__(self, "starts", dict(self.starts))

    def __iter__(self) -> Iterator[OpKey]:
        return iter(self.starts)

    def __len__(self) -> int:
        return len(self.starts)

    def __eq__(self, other):
        if not isinstance(other, Schedule):
            return NotImplemented
        return self.instance == other.instance and self.starts == other.starts

    def end(self, key: OpKey) -> int:
        return self.starts[key] + self.instance.operations[key].duration


@dataclass(frozen=True, order=True)
class Violation:
    rule: str
    operations: tuple

    def __str__(self):
        ops = ", ".join(f"{j}.{k}" for j, k in self.operations)
        return f"{self.rule}: {ops}"


def validate(schedule: Schedule) -> list[Violation]:
    """Return every feasibility violation of ``schedule``; empty means valid.

    Rules checked: ``missing`` / ``unknown`` (start coverage), ``negative``,
    ``release``, ``precedence`` (job chain), ``capacity`` (machine overlap)
    and ``downtime`` (overlap with a machine unavailability window).
    """
    inst = schedule.instance
    ops = inst.operations
    starts = schedule.starts
    found = set()

    for key in ops:
        if key not in starts:
            found.add(Violation("missing", (key,)))
    for key in starts:
        if key not in ops:
            found.add(Violation("unknown", (key,)))
        elif starts[key] < 0:
            found.add(Violation("negative", (key,)))

    for job in inst.jobs:
        keys = [op.key for op in job.operations if op.key in starts]
        for key in keys:
            if starts[key] < job.release:
                found.add(Violation("release", (key,)))
        for a, b in zip(keys, keys[1:]):
            if a[1] + 1 == b[1] and starts[a] + ops[a].duration > starts[b]:
                found.add(Violation("precedence", (a, b)))

    by_machine: dict = {}
    for key, s in starts.items():
        if key in ops:
            by_machine.setdefault(ops[key].machine_id, []).append((s, s + ops[key].duration, key))
    for machine, intervals in by_machine.items():
        intervals.sort(key=lambda t: (t[0], t[1], op_sort_key(t[2])))
        # pairwise check so that every overlapping pair is reported, not just neighbours
        for i, (s1, e1, k1) in enumerate(intervals):
            for s2, e2, k2 in intervals[i + 1:]:
                if s2 >= e1:
                    break
                pair = tuple(sorted((k1, k2), key=op_sort_key))
                found.add(Violation("capacity", pair))
        for lo, hi in inst.windows(machine):
            for s, e, key in intervals:
                if s < hi and e > lo:
                    found.add(Violation("downtime", (key,)))

    return sorted(found, key=lambda v: (v.rule, [op_sort_key(k) for k in v.operations]))


def completion_times(schedule: Schedule) -> dict:
    """Completion time of each job's last scheduled operation."""
    out = {}
    for job in schedule.instance.jobs:
        last = job.operations[-1].key
        if last in schedule.starts:
            out[job.job_id] = schedule.end(last)
    return out


def makespan(schedule: Schedule) -> int:
    return max((schedule.end(k) for k in schedule.starts), default=0)


def total_weighted_tardiness(schedule: Schedule) -> Fraction:
    done = completion_times(schedule)
    total = Fraction(0)
    for job in schedule.instance.jobs:
        if job.due_date is not None and job.job_id in done:
            total += job.weight * max(0, done[job.job_id] - job.due_date)
    return total


UTILITIES = {
    "makespan": makespan,
    "weighted_tardiness": total_weighted_tardiness,
}
