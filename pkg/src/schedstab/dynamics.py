"""Event-driven rescheduling.

A :class:`RescheduleEvent` happens at ``t0``. :func:`apply_event` folds it into
the instance, freezes every operation already started before ``t0`` and
reports which operations need new starts. One of three repair policies then
produces the revised schedule:

* :class:`RightShift` keeps every machine sequence and only delays;
* :class:`Regenerate` rebuilds the unfrozen part by non-delay dispatching;
* :class:`LocalSearch` descends from the right-shift schedule on a weighted
  sum of a utility objective and instability against the previous schedule.
"""

from __future__ import annotations

import logging
import random
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Hashable, NamedTuple, Sequence, Union

from .io import job_from_dict, job_to_dict
from .measures import InstabilityConfig, instability_terms, pair
from .model import (
    UTILITIES,
    Downtime,
    Job,
    OpKey,
    ProblemInstance,
    Schedule,
    as_weight,
    id_key,
    op_sort_key,
    validate,
)

log = logging.getLogger(__name__)


# -- events -----------------------------------------------------------------


@dataclass(frozen=True)
class MachineDown:
    """Machine unavailable over ``[start, until)``; also covers operator absence."""

    t0: int
    machine_id: Hashable
    start: int
    until: int
    kind = "machine_down"

    def __post_init__(self):
        if not self.t0 <= self.start <= self.until:
            raise ValueError(
                f"machine_down needs t0 <= start <= until, got {self.t0}, {self.start}, {self.until}"
            )


@dataclass(frozen=True)
class NewJob:
    t0: int
    job: Job
    kind = "new_job"


@dataclass(frozen=True)
class RushJob:
    """A new job that outranks every known job: its weight is raised above the
    current maximum when it is not already."""

    t0: int
    job: Job
    kind = "rush_job"


@dataclass(frozen=True)
class CancelJob:
    t0: int
    job_id: Hashable
    kind = "cancel_job"


@dataclass(frozen=True)
class DueDateChange:
    t0: int
    job_id: Hashable
    new_due: int | None
    kind = "due_date_change"


@dataclass(frozen=True)
class WeightChange:
    t0: int
    job_id: Hashable
    new_weight: Fraction
    kind = "weight_change"

    def __post_init__(self):
        object.__setattr__(self, "new_weight", as_weight(self.new_weight))


RescheduleEvent = Union[MachineDown, NewJob, RushJob, CancelJob, DueDateChange, WeightChange]
EVENT_KINDS = ("machine_down", "new_job", "rush_job", "cancel_job", "due_date_change", "weight_change")


def event_to_dict(event: RescheduleEvent) -> dict:
    doc = {"t0": event.t0, "kind": event.kind}
    if isinstance(event, MachineDown):
        doc.update(machine=event.machine_id, start=event.start, until=event.until)
    elif isinstance(event, (NewJob, RushJob)):
        doc["job"] = job_to_dict(event.job)
    elif isinstance(event, CancelJob):
        doc["job_id"] = event.job_id
    elif isinstance(event, DueDateChange):
        doc.update(job_id=event.job_id, due_date=event.new_due)
    elif isinstance(event, WeightChange):
        w = event.new_weight
        doc.update(job_id=event.job_id, weight=w.numerator if w.denominator == 1 else str(w))
    return doc


def event_from_dict(doc: dict) -> RescheduleEvent:
    kind, t0 = doc["kind"], doc["t0"]
    if kind == "machine_down":
        return MachineDown(t0, doc["machine"], doc["start"], doc["until"])
    if kind == "new_job":
        return NewJob(t0, job_from_dict(doc["job"]))
    if kind == "rush_job":
        return RushJob(t0, job_from_dict(doc["job"]))
    if kind == "cancel_job":
        return CancelJob(t0, doc["job_id"])
    if kind == "due_date_change":
        return DueDateChange(t0, doc["job_id"], doc["due_date"])
    if kind == "weight_change":
        return WeightChange(t0, doc["job_id"], Fraction(doc["weight"]))
    raise ValueError(f"unknown event kind {kind!r}")


# -- applying an event ------------------------------------------------------


@dataclass(frozen=True)
class FrozenPrefix:
    """Starts that no repair may touch: every operation begun before ``t0``,
    except ones interrupted by a breakdown, which restart in full."""

    t0: int
    starts: dict = field(default_factory=dict)
    in_progress: frozenset = frozenset()

    @classmethod
    def empty(cls, t0: int = 0) -> "FrozenPrefix":
        return cls(t0)


class AppliedEvent(NamedTuple):
    instance: ProblemInstance
    frozen: FrozenPrefix
    # operations needing a (new) start: inside a down window, interrupted,
    # belonging to a canceled job, or newly arrived and not yet scheduled
    conflicts: frozenset


def _replace_job(jobs: list, job_id, **changes) -> None:
    for i, job in enumerate(jobs):
        if job.job_id == job_id:
            jobs[i] = replace(job, **changes)
            return
    raise KeyError(f"unknown job {job_id!r}")


def apply_event(instance: ProblemInstance, schedule: Schedule, event: RescheduleEvent) -> AppliedEvent:
    t0 = event.t0
    if not 0 <= t0 <= instance.horizon:
        raise ValueError(f"event time {t0} outside [0, {instance.horizon}]")
    problems = validate(schedule)
    if problems:
        raise ValueError(f"schedule is not valid: {problems[0]}")

    ops = instance.operations
    jobs = list(instance.jobs)
    downtimes = list(instance.downtimes)
    conflicts: set = set()
    interrupted: set = set()

    if isinstance(event, MachineDown):
        if event.machine_id not in instance.machines:
            raise KeyError(f"unknown machine {event.machine_id!r}")
        if event.until > event.start:
            downtimes.append(Downtime(event.machine_id, event.start, event.until))
        for key, s in schedule.starts.items():
            if ops[key].machine_id != event.machine_id:
                continue
            if s < event.until and s + ops[key].duration > event.start:
                conflicts.add(key)
                if s < t0:
                    interrupted.add(key)
    elif isinstance(event, (NewJob, RushJob)):
        job = event.job
        if instance.has_job(job.job_id):
            raise ValueError(f"job {job.job_id!r} already exists")
        changes = {"release": max(job.release, t0)}
        if isinstance(event, RushJob):
            top = max((j.weight for j in jobs), default=Fraction(0))
            if job.weight <= top:
                changes["weight"] = top + 1
        job = replace(job, **changes)
        jobs.append(job)
        conflicts.update(op.key for op in job.operations)
    elif isinstance(event, CancelJob):
        job = instance.job(event.job_id)
        started = [op for op in job.operations if schedule.starts[op.key] < t0]
        conflicts.update(op.key for op in job.operations[len(started):])
        if started:
            _replace_job(jobs, job.job_id, operations=tuple(started))
        else:
            jobs.remove(job)
    elif isinstance(event, DueDateChange):
        _replace_job(jobs, event.job_id, due_date=event.new_due)
    elif isinstance(event, WeightChange):
        _replace_job(jobs, event.job_id, weight=event.new_weight)
    else:
        raise TypeError(f"not a reschedule event: {event!r}")

    revised = ProblemInstance(jobs, instance.machines, instance.horizon, instance.name, downtimes)
    kept = revised.operations
    frozen_starts = {
        k: s
        for k, s in schedule.starts.items()
        if s < t0 and k not in interrupted and k in kept
    }
    in_progress = frozenset(k for k, s in frozen_starts.items() if s + kept[k].duration > t0)
    return AppliedEvent(revised, FrozenPrefix(t0, frozen_starts, in_progress), frozenset(conflicts))


# -- earliest-start decoding --------------------------------------------------


def fit(t: int, duration: int, windows: Sequence[tuple[int, int]]) -> int:
    """Earliest start ``>= t`` whose interval avoids every window."""
    moved = True
    while moved:
        moved = False
        for lo, hi in windows:
            if t < hi and t + duration > lo:
                t = hi
                moved = True
    return t


class Decoder:
    """Earliest-start schedule for given machine sequences of the free
    (unfrozen) operations.

    Each free operation starts at the earliest time that respects its lower
    bound, its job predecessor, its machine predecessor in the sequence, the
    frozen work on its machine and the machine's down windows. Returns
    ``None`` when the sequences contradict the job chains (a cycle).
    """

    def __init__(self, instance: ProblemInstance, fixed: dict, lower: dict):
        ops = instance.operations
        self.fixed = dict(fixed)
        self.free = [k for k in sorted(ops, key=op_sort_key) if k not in self.fixed]
        self.duration = {k: op.duration for k, op in ops.items()}
        self.machine = {k: op.machine_id for k, op in ops.items()}
        self.windows = {m: instance.windows(m) for m in instance.machines}
        self.lower = lower
        self.ready: dict = defaultdict(int)
        for k, s in self.fixed.items():
            m = self.machine[k]
            self.ready[m] = max(self.ready[m], s + self.duration[k])
        self.job_pred = {}
        for k in self.free:
            prev = (k[0], k[1] - 1)
            if k[1] > 1:
                self.job_pred[k] = prev

    def __call__(self, sequences: dict) -> dict | None:
        machine_pred = {}
        for seq in sequences.values():
            for a, b in zip(seq, seq[1:]):
                machine_pred[b] = a
        succ = defaultdict(list)
        indeg = dict.fromkeys(self.free, 0)
        for k in self.free:
            jp = self.job_pred.get(k)
            if jp is not None and jp not in self.fixed:
                succ[jp].append(k)
                indeg[k] += 1
            mp = machine_pred.get(k)
            if mp is not None:
                succ[mp].append(k)
                indeg[k] += 1
        stack = [k for k in self.free if indeg[k] == 0]
        starts = dict(self.fixed)
        dur = self.duration
        while stack:
            k = stack.pop()
            m = self.machine[k]
            t = max(self.lower[k], self.ready[m])
            jp = self.job_pred.get(k)
            if jp is not None:
                t = max(t, starts[jp] + dur[jp])
            mp = machine_pred.get(k)
            if mp is not None:
                t = max(t, starts[mp] + dur[mp])
            starts[k] = fit(t, dur[k], self.windows[m])
            for v in succ[k]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    stack.append(v)
        if len(starts) != len(self.fixed) + len(self.free):
            return None
        return starts


def machine_sequences(keys, starts: dict, machine: dict) -> dict:
    seqs = defaultdict(list)
    for k in sorted(keys, key=lambda k: (starts[k], op_sort_key(k))):
        seqs[machine[k]].append(k)
    return dict(seqs)


# -- repair policies ----------------------------------------------------------


def right_shift_repair(
    instance: ProblemInstance, schedule: Schedule, frozen: FrozenPrefix, conflicts=frozenset()
) -> Schedule:
    """Delay unfrozen operations by the least amount that restores
    feasibility, keeping every machine sequence and job order.

    ``instance`` is the revised instance from :func:`apply_event`;
    ``schedule`` the one being repaired. Operations of canceled jobs are
    dropped. Operations of new jobs go at the end of their machines'
    sequences, in job-id order. ``conflicts`` is informational: the repair
    recomputes every start, so a conflict-free event returns ``schedule``
    unchanged.
    """
    ops = instance.operations
    t0 = frozen.t0
    release = {op.key: job.release for job in instance.jobs for op in job.operations}
    free = [k for k in ops if k not in frozen.starts]
    old = [k for k in free if k in schedule.starts]
    new = sorted((k for k in free if k not in schedule.starts), key=op_sort_key)
    machine = {k: op.machine_id for k, op in ops.items()}

    seqs = defaultdict(list, machine_sequences(old, schedule.starts, machine))
    for k in new:
        seqs[machine[k]].append(k)
    lower = {k: max(schedule.starts.get(k, 0), t0, release[k]) for k in free}
    starts = Decoder(instance, frozen.starts, lower)(dict(seqs))
    if starts is None:  # pragma: no cover - sequences come from a feasible schedule
        raise RuntimeError("right-shift sequences are cyclic")
    return Schedule(instance, starts)


DISPATCH_RULES = ("SPT", "EDD", "FCFS")


def dispatch_regenerate(
    instance: ProblemInstance,
    frozen: FrozenPrefix,
    rule: str,
    reference: Schedule | None = None,
) -> Schedule:
    """Non-delay list scheduling of every unfrozen operation from ``t0``.

    At each step the earliest possible start ``t*`` over all ready operations
    is found; among the ready operations on that machine able to start at
    ``t*`` the rule picks one. SPT prefers the shortest duration, EDD the
    earliest job due date (jobs without one last), FCFS the smallest start in
    ``reference`` (falling back to job release). Ties go to the smaller job
    id.
    """
    if rule not in DISPATCH_RULES:
        raise ValueError(f"unknown dispatch rule {rule!r}; choose from {DISPATCH_RULES}")
    ops = instance.operations
    t0 = frozen.t0
    ref = reference.starts if reference is not None else {}
    windows = {m: instance.windows(m) for m in instance.machines}

    starts = dict(frozen.starts)
    mach_ready = dict.fromkeys(instance.machines, t0)
    for k, s in starts.items():
        m = ops[k].machine_id
        mach_ready[m] = max(mach_ready[m], s + ops[k].duration)

    pending = {}
    job_ready = {}
    jobs = {}
    for job in instance.jobs:
        done = [op for op in job.operations if op.key in starts]
        if len(done) == len(job.operations):
            continue
        jobs[job.job_id] = job
        pending[job.job_id] = len(done)
        ready = max(job.release, t0)
        if done:
            ready = max(ready, starts[done[-1].key] + done[-1].duration)
        job_ready[job.job_id] = ready

    def priority(op):
        job = jobs[op.job_id]
        tie = (id_key(op.job_id), op.op_index)
        if rule == "SPT":
            return (op.duration, *tie)
        if rule == "EDD":
            return (job.due_date is None, job.due_date or 0, *tie)
        return (ref.get(op.key, job.release), *tie)

    while pending:
        candidates = []
        for job_id, idx in pending.items():
            op = jobs[job_id].operations[idx]
            m = op.machine_id
            est = fit(max(job_ready[job_id], mach_ready[m]), op.duration, windows[m])
            candidates.append((est, id_key(m), op))
        t_star, m_star, _ = min(candidates, key=lambda c: (c[0], c[1]))
        chosen = min(
            (op for est, m, op in candidates if est == t_star and m == m_star), key=priority
        )
        starts[chosen.key] = t_star
        end = t_star + chosen.duration
        mach_ready[chosen.machine_id] = end
        job_ready[chosen.job_id] = end
        if chosen.op_index == len(jobs[chosen.job_id].operations):
            del pending[chosen.job_id]
        else:
            pending[chosen.job_id] += 1
    return Schedule(instance, starts)


def initial_schedule(instance: ProblemInstance, rule: str = "FCFS") -> Schedule:
    return dispatch_regenerate(instance, FrozenPrefix.empty(), rule)


@dataclass(frozen=True)
class RightShift:
    @property
    def name(self) -> str:
        return "right_shift"


@dataclass(frozen=True)
class Regenerate:
    rule: str = "FCFS"

    def __post_init__(self):
        if self.rule not in DISPATCH_RULES:
            raise ValueError(f"unknown dispatch rule {self.rule!r}")

    @property
    def name(self) -> str:
        return f"regenerate_{self.rule}"


@dataclass(frozen=True)
class LocalSearch:
    """Descent on ``lam * utility + (1 - lam) * instability``.

    The instability ``t0`` is always the event time; only ``I`` and
    ``include_frozen`` are taken from ``instability_cfg``.
    """

    lam: float = 0.5
    utility: str = "makespan"
    instability_cfg: InstabilityConfig = InstabilityConfig()
    iteration_budget: int = 1000
    seed: int = 0
    kicks: int = 2

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam!r}")
        if self.utility not in UTILITIES:
            raise ValueError(f"unknown utility {self.utility!r}")
        if self.iteration_budget < 1:
            raise ValueError("iteration budget must be at least 1")
        if self.kicks < 0:
            raise ValueError("kicks must be non-negative")

    @property
    def name(self) -> str:
        return f"local_search_{self.utility}_lam{self.lam:g}"


RepairPolicy = Union[RightShift, Regenerate, LocalSearch]


def repair_objective(x: Schedule, candidate: Schedule, policy: LocalSearch, t0: int) -> float:
    """Objective minimised by :func:`local_search_repair`."""
    cfg = replace(policy.instability_cfg, t0=t0)
    keys = [k for k in x.starts if k in candidate.starts]
    terms, _ = instability_terms(keys, x.starts, candidate.starts, cfg)
    utility = float(UTILITIES[policy.utility](candidate))
    return policy.lam * utility + (1 - policy.lam) * sum(terms.values())


def local_search_repair(
    instance: ProblemInstance,
    x: Schedule,
    frozen: FrozenPrefix,
    policy: LocalSearch,
    start: Schedule | None = None,
) -> Schedule:
    """First-improvement descent over adjacent swaps in machine sequences.

    Starts from the right-shift repair (or ``start``). Each pass visits all
    adjacent pairs of unfrozen operations in a seeded random order; a swap is
    decoded to earliest starts and accepted as soon as it strictly lowers
    :func:`repair_objective`, which begins a new pass. At a local optimum
    the best sequences get ``kicks`` random adjacent swaps and descent
    resumes from there; with ``kicks=0`` it stops instead. Never runs more
    than ``iteration_budget`` neighbour evaluations and returns the best
    schedule seen, so the result is never worse than ``start``.
    """
    if start is None:
        start = right_shift_repair(instance, x, frozen)
    pair(x, start)  # raises on inconsistent durations before any work
    t0 = frozen.t0
    ops = instance.operations
    release = {op.key: job.release for job in instance.jobs for op in job.operations}
    free = [k for k in ops if k not in frozen.starts]
    machine = {k: op.machine_id for k, op in ops.items()}
    decode = Decoder(instance, frozen.starts, {k: max(t0, release[k]) for k in free})
    seqs = machine_sequences(free, start.starts, machine)

    rng = random.Random(policy.seed)
    best, best_f = start, repair_objective(x, start, policy, t0)
    best_seqs = {m: list(seq) for m, seq in seqs.items()}
    moves = [(m, i) for m in sorted(seqs, key=id_key) for i in range(len(seqs[m]) - 1)]
    budget = policy.iteration_budget
    evaluations = 0
    current, current_f = best, best_f
    while evaluations < budget and moves:
        improved = True
        while improved and evaluations < budget:
            improved = False
            rng.shuffle(moves)
            for m, i in moves:
                if evaluations >= budget:
                    break
                evaluations += 1
                seq = seqs[m]
                seq[i], seq[i + 1] = seq[i + 1], seq[i]
                starts = decode(seqs)
                if starts is not None:
                    candidate = Schedule(instance, starts)
                    f = repair_objective(x, candidate, policy, t0)
                    if f < current_f:
                        current, current_f = candidate, f
                        improved = True
                        break
                seq[i], seq[i + 1] = seq[i + 1], seq[i]
        if current_f < best_f:
            best, best_f = current, current_f
            best_seqs = {m: list(seq) for m, seq in seqs.items()}
        if policy.kicks == 0 or evaluations >= budget:
            break
        # local optimum: restart the descent from a perturbed copy of the best
        seqs = {m: list(seq) for m, seq in best_seqs.items()}
        for _ in range(policy.kicks):
            m, i = rng.choice(moves)
            seqs[m][i], seqs[m][i + 1] = seqs[m][i + 1], seqs[m][i]
        starts = decode(seqs)
        evaluations += 1
        if starts is None:
            seqs = {m: list(seq) for m, seq in best_seqs.items()}
            current, current_f = best, best_f
            continue
        current = Schedule(instance, starts)
        current_f = repair_objective(x, current, policy, t0)
    log.debug("local search: %d evaluations, objective %.6g", evaluations, best_f)
    return best


def repair(policy: RepairPolicy, schedule: Schedule, applied: AppliedEvent) -> Schedule:
    instance, frozen, conflicts = applied
    if isinstance(policy, RightShift):
        return right_shift_repair(instance, schedule, frozen, conflicts)
    if isinstance(policy, Regenerate):
        return dispatch_regenerate(instance, frozen, policy.rule, reference=schedule)
    if isinstance(policy, LocalSearch):
        return local_search_repair(instance, schedule, frozen, policy)
    raise TypeError(f"not a repair policy: {policy!r}")


@dataclass(frozen=True)
class Step:
    event: RescheduleEvent
    applied: AppliedEvent
    schedule: Schedule


def simulate(
    instance: ProblemInstance,
    schedule: Schedule,
    events: Sequence[RescheduleEvent],
    policy: RepairPolicy,
) -> list[Step]:
    """Process ``events`` in order; each repair starts from the previous
    revision."""
    steps = []
    last_t0 = 0
    for event in events:
        if event.t0 < last_t0:
            raise ValueError("events must be ordered by t0")
        last_t0 = event.t0
        applied = apply_event(instance, schedule, event)
        revised = repair(policy, schedule, applied)
        steps.append(Step(event, applied, revised))
        instance, schedule = applied.instance, revised
    return steps
