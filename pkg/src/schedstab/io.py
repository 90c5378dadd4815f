"""JSON persistence for instances, schedules and event lists.

Files hold integers only for time fields. Job weights are written as an
integer when whole and as a ``"p/q"`` string otherwise, so a round trip is
exact.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .model import Downtime, Job, Operation, ProblemInstance, Schedule, op_sort_key


def _weight_out(weight: Fraction):
    return weight.numerator if weight.denominator == 1 else f"{weight.numerator}/{weight.denominator}"


def _int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{what} must be an integer, got {value!r}")
    return value


def _ident(value):
    # JSON arrays come back as lists; identifiers must stay hashable
    return tuple(value) if isinstance(value, list) else value


def job_to_dict(job: Job) -> dict:
    doc = {
        "id": job.job_id,
        "operations": [[op.machine_id, op.duration] for op in job.operations],
        "due_date": job.due_date,
        "weight": _weight_out(job.weight),
    }
    if job.release:
        doc["release"] = job.release
    return doc


def job_from_dict(doc: dict) -> Job:
    job_id = _ident(doc["id"])
    ops = [
        Operation(job_id, k, _ident(machine), _int(duration, "duration"))
        for k, (machine, duration) in enumerate(doc["operations"], start=1)
    ]
    due = doc.get("due_date")
    return Job(
        job_id,
        ops,
        due_date=None if due is None else _int(due, "due_date"),
        weight=Fraction(doc.get("weight", 1)),
        release=_int(doc.get("release", 0), "release"),
    )


def instance_to_dict(inst: ProblemInstance) -> dict:
    doc = {
        "name": inst.name,
        "horizon": inst.horizon,
        "machines": list(inst.machines),
        "jobs": [job_to_dict(j) for j in inst.jobs],
    }
    if inst.downtimes:
        doc["downtimes"] = [[w.machine_id, w.start, w.until] for w in inst.downtimes]
    return doc


def instance_from_dict(doc: dict) -> ProblemInstance:
    return ProblemInstance(
        jobs=[job_from_dict(j) for j in doc["jobs"]],
        machines=[_ident(m) for m in doc["machines"]],
        horizon=_int(doc["horizon"], "horizon"),
        name=doc.get("name", "instance"),
        downtimes=[
            Downtime(_ident(m), _int(a, "downtime start"), _int(b, "downtime end"))
            for m, a, b in doc.get("downtimes", [])
        ],
    )


def schedule_to_dict(schedule: Schedule) -> dict:
    rows = sorted(schedule.starts.items(), key=lambda kv: op_sort_key(kv[0]))
    return {
        "instance": schedule.instance.name,
        "starts": [[j, k, s] for (j, k), s in rows],
    }


def schedule_from_dict(doc: dict, instance: ProblemInstance) -> Schedule:
    if doc.get("instance", instance.name) != instance.name:
        raise ValueError(
            f"schedule belongs to instance {doc['instance']!r}, not {instance.name!r}"
        )
    starts = {}
    for job, k, s in doc["starts"]:
        key = (_ident(job), _int(k, "op_index"))
        if key in starts:
            raise ValueError(f"operation {key} listed twice")
        starts[key] = _int(s, "start")
    return Schedule(instance, starts)


def _render(obj, depth: int) -> str:
    pad, inner = " " * depth, " " * (depth + 1)
    if isinstance(obj, dict) and obj:
        items = [f"{inner}{json.dumps(str(k))}: {_render(obj[k], depth + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)) and any(isinstance(v, (list, tuple, dict)) for v in obj):
        items = [inner + _render(v, depth + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    # scalars and flat arrays stay on one line
    return json.dumps(obj)


def dumps(doc) -> str:
    """Indented JSON with sorted keys; arrays of scalars stay on one line."""
    return _render(doc, 0) + "\n"


def write_json(path, doc) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_instance(inst: ProblemInstance, path) -> None:
    write_json(path, instance_to_dict(inst))


def load_instance(path) -> ProblemInstance:
    return instance_from_dict(read_json(path))


def save_schedule(schedule: Schedule, path) -> None:
    write_json(path, schedule_to_dict(schedule))


def load_schedule(path, instance: ProblemInstance) -> Schedule:
    return schedule_from_dict(read_json(path), instance)
