"""Difference measures between an initial schedule ``x`` and a revised ``x'``.

Every measure returns a :class:`MeasureReport` whose ``total`` is the sum of
its ``per_operation`` contributions. Operations present in only one of the two
schedules (new or canceled jobs) never contribute; they are counted in
``added_count`` / ``removed_count``.

Operation-level measures:

* :func:`wu_measure` -- sum of absolute start-time shifts.
* :func:`lin_measure` -- sum of shifts towards earlier starts only.
* :func:`combined_measure` -- weighted earliness-shift plus lateness-shift.
* :func:`sequence_measure` -- number of operation pairs whose order flips.
* :func:`instability` -- absolute shifts discounted by how far from the
  rescheduling moment they happen.

:func:`job_level_measure` works on job start and completion times instead.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

from .model import OpKey, Schedule, op_sort_key


class PairingError(ValueError):
    """The two schedules disagree on what an operation is."""


@dataclass(frozen=True)
class PairedSchedules:
    x: Schedule
    x_prime: Schedule
    pairing: tuple[OpKey, ...]
    added: tuple[OpKey, ...]
    removed: tuple[OpKey, ...]
    # paired operations whose machine differs between the two instances
    reassigned: tuple[OpKey, ...] = ()

    def starts(self, key: OpKey) -> tuple[int, int]:
        return self.x.starts[key], self.x_prime.starts[key]


@dataclass(frozen=True)
class InstabilityConfig:
    """Parameters of :func:`instability`.

    ``I`` is the per-tick decay base of the impact of a change, ``t0`` the
    rescheduling moment. Operations with ``min(s, s') < t0`` are skipped unless
    ``include_frozen`` is set, in which case their distance is used as is
    (negative, so their impact exceeds 1 when ``I < 1``).
    """

    I: float = 1.0
    t0: int = 0
    include_frozen: bool = False

    def __post_init__(self):
        if not self.I > 0:
            raise ValueError(f"decay base I must be positive, got {self.I!r}")
        if self.I > 1:
            raise ValueError(f"decay base I must not exceed 1, got {self.I!r}")


@dataclass
class MeasureReport:
    total: float
    per_operation: dict = field(default_factory=dict)
    added_count: int = 0
    removed_count: int = 0
    skipped_count: int = 0

    def as_dict(self) -> dict:
        rows = sorted(self.per_operation.items(), key=lambda kv: _report_key(kv[0]))
        return {
            "total": self.total,
            "added_count": self.added_count,
            "removed_count": self.removed_count,
            "skipped_count": self.skipped_count,
            "per_operation": [[*_key_out(k), v] for k, v in rows],
        }


def _report_key(key):
    return op_sort_key(key) if isinstance(key, tuple) else op_sort_key((key, 0))


def _key_out(key) -> list:
    return list(key) if isinstance(key, tuple) else [key]


def pair(x: Schedule, x_prime: Schedule) -> PairedSchedules:
    """Match operations of ``x`` and ``x'`` by ``(job_id, op_index)``."""
    ops, ops_p = x.instance.operations, x_prime.instance.operations
    keys, keys_p = set(x.starts), set(x_prime.starts)
    common = sorted(keys & keys_p, key=op_sort_key)
    reassigned = []
    for key in common:
        a, b = ops[key], ops_p[key]
        if a.duration != b.duration:
            raise PairingError(
                f"operation {key} has duration {a.duration} in x but {b.duration} in x'"
            )
        if a.machine_id != b.machine_id:
            reassigned.append(key)
    return PairedSchedules(
        x,
        x_prime,
        pairing=tuple(common),
        added=tuple(sorted(keys_p - keys, key=op_sort_key)),
        removed=tuple(sorted(keys - keys_p, key=op_sort_key)),
        reassigned=tuple(reassigned),
    )


def _report(p: PairedSchedules, terms: dict, skipped: int = 0) -> MeasureReport:
    return MeasureReport(
        total=math.fsum(terms.values()),
        per_operation=terms,
        added_count=len(p.added),
        removed_count=len(p.removed),
        skipped_count=skipped,
    )


def delta_start(s: int, s_prime: int) -> int:
    return abs(s_prime - s)


def wu_measure(p: PairedSchedules) -> MeasureReport:
    terms = {k: float(delta_start(*p.starts(k))) for k in p.pairing}
    return _report(p, terms)


def lin_measure(p: PairedSchedules) -> MeasureReport:
    terms = {}
    for k in p.pairing:
        s, s_p = p.starts(k)
        terms[k] = float(max(0, s - s_p))
    return _report(p, terms)


def combined_measure(p: PairedSchedules, w_early: float = 1.0, w_late: float = 1.0) -> MeasureReport:
    """Weighted sum of earliness shifts ``max(0, s - s')`` and lateness
    shifts ``max(0, s' - s)``.

    ``w_early = w_late = 1`` gives :func:`wu_measure`; ``w_late = 0`` with
    ``w_early = 1`` gives :func:`lin_measure`.
    """
    for w in (w_early, w_late):
        if not math.isfinite(w) or w < 0:
            raise ValueError(f"weights must be finite and non-negative, got {w!r}")
    terms = {}
    for k in p.pairing:
        s, s_p = p.starts(k)
        terms[k] = w_early * max(0, s - s_p) + w_late * max(0, s_p - s)
    return _report(p, terms)


def _job_span(schedule: Schedule, job) -> tuple[int, int] | None:
    keys = [op.key for op in job.operations]
    if any(k not in schedule.starts for k in keys):
        return None
    return schedule.starts[keys[0]], schedule.end(keys[-1])


def job_level_measure(
    p: PairedSchedules, g_start: float = 1.0, g_completion: float = 1.0
) -> MeasureReport:
    """Per job: ``g_start * |S - S'| + g_completion * |C - C'|``.

    ``S`` is the start of the job's first operation and ``C`` the end of its
    last. Only jobs complete in both schedules contribute; jobs present in
    just one, or truncated in one (a canceled job keeps only its started
    operations), are counted in ``skipped_count``. ``g_start = 0`` leaves a
    completion-time-only measure. ``per_operation`` is keyed by job id.
    """
    for g in (g_start, g_completion):
        if not math.isfinite(g) or g < 0:
            raise ValueError(f"weights must be finite and non-negative, got {g!r}")
    jobs_x = {j.job_id: j for j in p.x.instance.jobs}
    jobs_p = {j.job_id: j for j in p.x_prime.instance.jobs}
    terms = {}
    skipped = 0
    for job_id in sorted(set(jobs_x) | set(jobs_p), key=lambda j: op_sort_key((j, 0))):
        if job_id not in jobs_x or job_id not in jobs_p:
            skipped += 1
            continue
        jx, jp = jobs_x[job_id], jobs_p[job_id]
        a, b = _job_span(p.x, jx), _job_span(p.x_prime, jp)
        if a is None or b is None or len(jx.operations) != len(jp.operations):
            skipped += 1
            continue
        terms[job_id] = g_start * abs(a[0] - b[0]) + g_completion * abs(a[1] - b[1])
    return _report(p, terms, skipped)


class _Fenwick:
    def __init__(self, n: int):
        self.tree = [0] * (n + 1)

    def add(self, i: int) -> None:
        i += 1
        while i < len(self.tree):
            self.tree[i] += 1
            i += i & -i

    def prefix(self, i: int) -> int:
        """Count of inserted positions ``< i``."""
        total = 0
        while i > 0:
            total += self.tree[i]
            i -= i & -i
        return total


def _inversions(items: list[tuple[OpKey, int, int]]) -> dict:
    """Per key, the number of items that start strictly earlier in ``x`` but
    strictly later in ``x'``. Summing gives the inverted-pair count."""
    values = sorted({sp for _, _, sp in items})
    tree = _Fenwick(len(values))
    inserted = 0
    out = {}
    items = sorted(items, key=lambda t: t[1])
    i = 0
    while i < len(items):
        j = i
        while j < len(items) and items[j][1] == items[i][1]:
            j += 1
        group = items[i:j]
        # equal starts in x are not ordered, so query the whole group before inserting it
        for key, _, sp in group:
            rank = bisect_right(values, sp)
            out[key] = inserted - tree.prefix(rank)
        for _, _, sp in group:
            tree.add(bisect_right(values, sp) - 1)
            inserted += 1
        i = j
    return out


def sequence_measure(p: PairedSchedules, scope: str = "global") -> MeasureReport:
    """Count paired operation pairs ``(a, b)`` with ``s_a < s_b`` and
    ``s'_a > s'_b``. Ties in either schedule never count.

    ``scope="per_machine"`` only compares operations that share a machine in
    ``x``. Runs in ``O(n log n)``.
    """
    if scope not in ("global", "per_machine"):
        raise ValueError(f"unknown sequence scope {scope!r}")
    groups: dict = {}
    ops = p.x.instance.operations
    for k in p.pairing:
        s, s_p = p.starts(k)
        group = ops[k].machine_id if scope == "per_machine" else None
        groups.setdefault(group, []).append((k, s, s_p))
    terms = {}
    for items in groups.values():
        for key, count in _inversions(items).items():
            terms[key] = float(count)
    terms = {k: terms[k] for k in p.pairing}
    return _report(p, terms)


def closeness(s: int, s_prime: int, t0: int) -> int:
    return min(s, s_prime) - t0


def impact(dist: float, I: float) -> float:
    if not I > 0:
        raise ValueError(f"decay base I must be positive, got {I!r}")
    return float(I) ** dist


def instability_terms(
    keys: Iterable[OpKey],
    starts: Mapping[OpKey, int],
    starts_prime: Mapping[OpKey, int],
    cfg: InstabilityConfig,
) -> tuple[dict, int]:
    """Per-operation instability terms over ``keys`` plus the number of
    frozen operations left out."""
    terms = {}
    skipped = 0
    for k in keys:
        s, s_p = starts[k], starts_prime[k]
        dist = closeness(s, s_p, cfg.t0)
        if dist < 0 and not cfg.include_frozen:
            skipped += 1
            continue
        delta = delta_start(s, s_p)
        terms[k] = impact(dist, cfg.I) * delta if delta else 0.0
    return terms, skipped


def instability(p: PairedSchedules, cfg: InstabilityConfig) -> MeasureReport:
    """Sum over paired operations of ``I ** (min(s, s') - t0) * |s' - s|``.

    With ``I = 1`` this is exactly :func:`wu_measure` (restricted to
    operations not frozen before ``t0``).
    """
    terms, skipped = instability_terms(p.pairing, p.x.starts, p.x_prime.starts, cfg)
    return _report(p, terms, skipped)


MEASURES = ("wu", "lin", "combined", "job_level", "sequence", "instability")


def evaluate(name: str, p: PairedSchedules, params: Mapping[str, Hashable] | None = None) -> MeasureReport:
    """Dispatch a measure by name. ``params`` holds its keyword arguments;
    for ``instability`` they are the :class:`InstabilityConfig` fields."""
    params = dict(params or {})
    if name == "wu":
        return wu_measure(p)
    if name == "lin":
        return lin_measure(p)
    if name == "combined":
        return combined_measure(p, **params)
    if name == "job_level":
        return job_level_measure(p, **params)
    if name == "sequence":
        return sequence_measure(p, **params)
    if name == "instability":
        return instability(p, InstabilityConfig(**params))
    raise ValueError(f"unknown measure {name!r}; choose from {', '.join(MEASURES)}")
