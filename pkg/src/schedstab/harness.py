"""Instance and disturbance generation plus the experiment runner comparing
repair policies under every configured difference measure.

An experiment cell is one (instance, scenario, policy). The initial schedule
is built by FCFS dispatching, the scenario's events are applied in time
order, and every measure is evaluated between consecutive schedules. The
report has one row per (instance, scenario, policy, measure) whose total is
the sum over the scenario's steps; ``steps.csv`` holds the per-step values.
All intermediate instances and schedules are written so that every total can
be recomputed.
"""

from __future__ import annotations

import csv
import logging
import math
import random
import re
import time
import warnings
from dataclasses import asdict, dataclass, field, is_dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from . import io
from .dynamics import (
    EVENT_KINDS,
    CancelJob,
    DueDateChange,
    LocalSearch,
    MachineDown,
    NewJob,
    RepairPolicy,
    RescheduleEvent,
    RushJob,
    WeightChange,
    apply_event,
    event_to_dict,
    initial_schedule,
    repair,
)
from .measures import InstabilityConfig, evaluate, pair
from .model import Job, Operation, ProblemInstance, Schedule, makespan, total_weighted_tardiness, validate

log = logging.getLogger(__name__)


class ScenarioWarning(UserWarning):
    """A requested disturbance could not be generated and was skipped."""


@dataclass(frozen=True)
class GeneratorConfig:
    n_jobs: int
    n_machines: int
    lo: int = 1
    hi: int = 10
    tightness: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.n_jobs < 1 or self.n_machines < 1:
            raise ValueError("need at least one job and one machine")
        if self.lo < 1 or self.hi < self.lo:
            raise ValueError(f"bad duration range [{self.lo}, {self.hi}]")
        if not self.tightness > 0:
            raise ValueError("due-date tightness must be positive")


def _due(total: int, tightness) -> int:
    return math.ceil(Fraction(str(tightness)) * total)


def _random_job(rng: random.Random, job_id, machines, lo: int, hi: int, tightness, offset: int = 0, weight=1) -> Job:
    route = list(machines)
    rng.shuffle(route)
    ops = [Operation(job_id, k, m, rng.randint(lo, hi)) for k, m in enumerate(route, start=1)]
    total = sum(op.duration for op in ops)
    return Job(job_id, ops, due_date=offset + _due(total, tightness), weight=weight)


def generate_instance(cfg: GeneratorConfig, name: str | None = None) -> ProblemInstance:
    """Classic job shop: each job visits every machine once in a random
    order. The planning horizon is the total processing time."""
    rng = random.Random(cfg.seed)
    machines = list(range(cfg.n_machines))
    jobs = [
        _random_job(rng, j, machines, cfg.lo, cfg.hi, cfg.tightness) for j in range(cfg.n_jobs)
    ]
    horizon = sum(job.total_processing for job in jobs)
    return ProblemInstance(
        jobs,
        machines,
        horizon,
        name=name or f"js{cfg.n_jobs}x{cfg.n_machines}_s{cfg.seed}",
    )


def generate_scenario(
    instance: ProblemInstance,
    seed: int,
    factor_mix: Mapping[str, int],
    *,
    schedule: Schedule | None = None,
    down_range: tuple[int, int] = (5, 20),
    tightness: float = 1.5,
) -> list[RescheduleEvent]:
    """Draw ``factor_mix[kind]`` events of each kind.

    Event times are uniform over the active span of ``schedule`` (the FCFS
    schedule when omitted). Breakdowns start at most ``down_range[0]`` ticks
    after their ``t0`` and last a uniform ``down_range`` duration. Events
    naming a job only pick jobs still alive at that time; a cancellation with
    nothing left to cancel is skipped with a :class:`ScenarioWarning`.
    """
    unknown = set(factor_mix) - set(EVENT_KINDS)
    if unknown:
        raise ValueError(f"unknown event kinds {sorted(unknown)}")
    if any(n < 0 for n in factor_mix.values()):
        raise ValueError("event counts must be non-negative")
    kinds = [kind for kind in EVENT_KINDS for _ in range(factor_mix.get(kind, 0))]
    if not kinds:
        return []

    rng = random.Random(seed)
    if schedule is None:
        schedule = initial_schedule(instance)
    span = max(makespan(schedule) - 1, 0)
    timed = sorted(((rng.randint(0, span), i, kind) for i, kind in enumerate(kinds)))

    durations = [op.duration for op in instance.operations.values()]
    lo, hi = min(durations), max(durations)
    alive = [job.job_id for job in instance.jobs]
    jobs = {job.job_id: job for job in instance.jobs}
    next_id = max((j for j in alive if isinstance(j, int)), default=-1) + 1

    events: list[RescheduleEvent] = []
    for t0, _, kind in timed:
        if kind == "machine_down":
            machine = rng.choice(instance.machines)
            start = t0 + rng.randint(0, down_range[0])
            events.append(MachineDown(t0, machine, start, start + rng.randint(*down_range)))
        elif kind in ("new_job", "rush_job"):
            job = _random_job(rng, next_id, instance.machines, lo, hi, tightness, offset=t0)
            next_id += 1
            alive.append(job.job_id)
            jobs[job.job_id] = job
            events.append(NewJob(t0, job) if kind == "new_job" else RushJob(t0, job))
        elif not alive:
            warnings.warn(f"no job left for {kind} at t0={t0}; skipped", ScenarioWarning, stacklevel=2)
        elif kind == "cancel_job":
            job_id = rng.choice(alive)
            alive.remove(job_id)
            events.append(CancelJob(t0, job_id))
        elif kind == "due_date_change":
            job = jobs[rng.choice(alive)]
            base = job.due_date if job.due_date is not None else t0 + job.total_processing
            events.append(DueDateChange(t0, job.job_id, max(0, base + rng.randint(-hi, hi))))
        else:
            events.append(WeightChange(t0, rng.choice(alive), rng.randint(1, 5)))
    return events


@dataclass(frozen=True)
class ScenarioSpec:
    """A named disturbance scenario. ``events`` is used verbatim when given;
    otherwise events are generated per instance from ``seed`` and
    ``factor_mix``."""

    name: str
    seed: int = 0
    factor_mix: Mapping[str, int] = field(default_factory=dict)
    events: tuple | None = None


@dataclass(frozen=True)
class MeasureSpec:
    """A measure to report. For ``instability`` the ``t0`` of each step is
    the event time and must not be set in ``params``."""

    label: str
    measure: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.measure == "instability":
            InstabilityConfig(**self.params)  # validate early
            if "t0" in self.params:
                raise ValueError("instability t0 is taken from each event")


def default_measures(I: float = 1.0) -> list[MeasureSpec]:
    return [
        MeasureSpec("wu", "wu"),
        MeasureSpec("lin", "lin"),
        MeasureSpec("combined", "combined"),
        MeasureSpec("job_level", "job_level"),
        MeasureSpec("sequence", "sequence"),
        MeasureSpec("sequence_machine", "sequence", {"scope": "per_machine"}),
        MeasureSpec("instability", "instability", {"I": I}),
    ]


def measure_step(spec: MeasureSpec, before: Schedule, after: Schedule, t0: int):
    params = dict(spec.params)
    if spec.measure == "instability":
        params["t0"] = t0
    return evaluate(spec.measure, pair(before, after), params)


REPORT_FIELDS = [
    "instance",
    "scenario",
    "policy",
    "lambda",
    "measure",
    "total",
    "steps",
    "added",
    "removed",
    "makespan_before",
    "makespan_after",
    "tardiness_before",
    "tardiness_after",
    "runtime_s",
    "status",
]
STEP_FIELDS = ["instance", "scenario", "policy", "step", "t0", "kind", "measure", "total"]


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def totals(self) -> dict:
        return {
            (r["instance"], r["scenario"], r["policy"], r["measure"]): r["total"] for r in self.rows
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "report.csv", REPORT_FIELDS, self.rows)
        _write_csv(out / "steps.csv", STEP_FIELDS, self.steps)
        io.write_json(out / "metadata.json", self.metadata)


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _slug(text) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", str(text))


def _jsonable(obj):
    if is_dataclass(obj):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def _policy_meta(policy: RepairPolicy) -> dict:
    return {"name": policy.name, "type": type(policy).__name__, **_jsonable(policy)}


def _save_step(folder: Path | None, index: int, schedule: Schedule) -> None:
    if folder is None:
        return
    folder.mkdir(parents=True, exist_ok=True)
    io.save_instance(schedule.instance, folder / f"step_{index:02d}_instance.json")
    io.save_schedule(schedule, folder / f"step_{index:02d}_schedule.json")


def run_cell(
    x0: Schedule,
    events: Sequence[RescheduleEvent],
    policy: RepairPolicy,
    measures: Sequence[MeasureSpec],
    folder: Path | None = None,
) -> tuple[list[Schedule], list[dict], float]:
    """Simulate one cell. Returns the schedule chain, per-step measure values
    and the total repair runtime. Raises on any invalid intermediate
    schedule."""
    chain = [x0]
    step_rows = []
    runtime = 0.0
    _save_step(folder, 0, x0)
    instance, schedule = x0.instance, x0
    for i, event in enumerate(events, start=1):
        tic = time.perf_counter()
        applied = apply_event(instance, schedule, event)
        revised = repair(policy, schedule, applied)
        runtime += time.perf_counter() - tic
        problems = validate(revised)
        if problems:
            raise ValueError(f"step {i} produced an invalid schedule: {problems[0]}")
        changed = {k for k, s in applied.frozen.starts.items() if revised.starts.get(k) != s}
        if changed:
            raise ValueError(f"step {i} moved frozen operations {sorted(changed, key=str)}")
        for spec in measures:
            report = measure_step(spec, schedule, revised, event.t0)
            step_rows.append(
                {
                    "step": i,
                    "t0": event.t0,
                    "kind": event.kind,
                    "measure": spec.label,
                    "total": report.total,
                    "added": report.added_count,
                    "removed": report.removed_count,
                }
            )
        _save_step(folder, i, revised)
        chain.append(revised)
        instance, schedule = applied.instance, revised
    return chain, step_rows, runtime


def run_experiment(
    instances: Sequence[ProblemInstance],
    scenarios: Sequence[ScenarioSpec],
    policies: Sequence[RepairPolicy],
    measures: Sequence[MeasureSpec],
    out_dir=None,
    initial_rule: str = "FCFS",
) -> ExperimentReport:
    """Run the full (instance, scenario, policy) matrix.

    A failing cell produces rows with ``status`` set to the error instead of
    aborting the run. With ``out_dir`` the report, per-step table, metadata
    and every intermediate schedule are written there.
    """
    names = [inst.name for inst in instances]
    if len(set(names)) != len(names):
        raise ValueError("instance names must be unique")
    out = Path(out_dir) if out_dir is not None else None
    report = ExperimentReport()
    report.metadata = {
        "initial_rule": initial_rule,
        "instances": names,
        "scenarios": [],
        "policies": [_policy_meta(p) for p in policies],
        "measures": [_jsonable(m) for m in measures],
    }

    for inst in instances:
        x0 = initial_schedule(inst, initial_rule)
        if out is not None:
            (out / "instances").mkdir(parents=True, exist_ok=True)
            io.save_instance(inst, out / "instances" / f"{_slug(inst.name)}.json")
        for scen in scenarios:
            if scen.events is not None:
                events = list(scen.events)
            else:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always", ScenarioWarning)
                    events = generate_scenario(inst, scen.seed, scen.factor_mix, schedule=x0)
                for w in caught:
                    log.warning("%s/%s: %s", inst.name, scen.name, w.message)
            report.metadata["scenarios"].append(
                {
                    "instance": inst.name,
                    "scenario": scen.name,
                    "seed": scen.seed,
                    "factor_mix": dict(scen.factor_mix),
                    "events": [_jsonable(event_to_dict(e)) for e in events],
                }
            )
            for policy in policies:
                folder = None
                if out is not None:
                    folder = out / "schedules" / _slug(inst.name) / _slug(scen.name) / _slug(policy.name)
                base = {
                    "instance": inst.name,
                    "scenario": scen.name,
                    "policy": policy.name,
                    "lambda": policy.lam if isinstance(policy, LocalSearch) else "",
                }
                try:
                    chain, step_rows, runtime = run_cell(x0, events, policy, measures, folder)
                except Exception as exc:  # one bad cell must not sink the run
                    log.error("cell %s/%s/%s failed: %s", inst.name, scen.name, policy.name, exc)
                    for spec in measures:
                        report.rows.append(
                            dict.fromkeys(REPORT_FIELDS, "")
                            | base
                            | {"measure": spec.label, "status": f"failed: {exc}"}
                        )
                    continue
                final = chain[-1]
                for row in step_rows:
                    report.steps.append(
                        {k: row[k] for k in ("step", "t0", "kind", "measure", "total")}
                        | {k: base[k] for k in ("instance", "scenario", "policy")}
                    )
                for spec in measures:
                    mine = [r for r in step_rows if r["measure"] == spec.label]
                    report.rows.append(
                        base
                        | {
                            "measure": spec.label,
                            "total": math.fsum(r["total"] for r in mine),
                            "steps": len(mine),
                            "added": sum(r["added"] for r in mine),
                            "removed": sum(r["removed"] for r in mine),
                            "makespan_before": makespan(x0),
                            "makespan_after": makespan(final),
                            "tardiness_before": float(total_weighted_tardiness(x0)),
                            "tardiness_after": float(total_weighted_tardiness(final)),
                            "runtime_s": round(runtime, 6),
                            "status": "ok",
                        }
                    )

    if out is not None:
        report.write(out)
    return report


def recompute_step_total(folder, step: int, spec: MeasureSpec, t0: int) -> float:
    """Recompute one step's measure total from persisted files."""
    folder = Path(folder)
    before_inst = io.load_instance(folder / f"step_{step - 1:02d}_instance.json")
    after_inst = io.load_instance(folder / f"step_{step:02d}_instance.json")
    before = io.load_schedule(folder / f"step_{step - 1:02d}_schedule.json", before_inst)
    after = io.load_schedule(folder / f"step_{step:02d}_schedule.json", after_inst)
    return measure_step(spec, before, after, t0).total
