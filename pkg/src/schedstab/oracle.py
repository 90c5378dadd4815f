"""Slow, obviously-correct reference computations for the test suite.

Nothing here calls the production measures or decoders it is used to check.
"""

from __future__ import annotations

import itertools
import math

import mpmath

from .measures import InstabilityConfig, PairedSchedules
from .model import UTILITIES, ProblemInstance, Schedule

SEQUENCE_CAP = 200
PERMUTATION_CAP = 10**6


def brute_sequence_count(p: PairedSchedules, scope: str = "global") -> int:
    """Literal double loop over ordered pairs ``(a, b)`` of paired operations
    counting ``s_a < s_b and s'_a > s'_b``."""
    keys = list(p.pairing)
    if len(keys) > SEQUENCE_CAP:
        raise ValueError(f"brute_sequence_count refuses more than {SEQUENCE_CAP} operations")
    x, y = p.x.starts, p.x_prime.starts
    machine = p.x.instance.operations
    count = 0
    for a in keys:
        for b in keys:
            if a == b:
                continue
            if scope == "per_machine" and machine[a].machine_id != machine[b].machine_id:
                continue
            if x[a] < x[b] and y[a] > y[b]:
                count += 1
    return count


def term_by_term_instability(p: PairedSchedules, cfg: InstabilityConfig, dps: int = 50) -> float:
    """Instability evaluated in ``dps``-digit arithmetic, summed in reverse key order."""
    with mpmath.workdps(dps):
        base = mpmath.mpf(cfg.I)
        total = mpmath.mpf(0)
        for key in reversed(p.pairing):
            s, s_p = p.x.starts[key], p.x_prime.starts[key]
            earliest = s if s <= s_p else s_p
            if earliest < cfg.t0 and not cfg.include_frozen:
                continue
            change = s_p - s if s_p >= s else s - s_p
            total += mpmath.power(base, earliest - cfg.t0) * change
        return float(total)


def _semi_active(instance: ProblemInstance, orders: dict) -> dict | None:
    """Earliest starts for fixed machine orders by repeated relaxation;
    ``None`` if the orders are cyclic."""
    ops = instance.operations
    preds = {k: [] for k in ops}
    for job in instance.jobs:
        for a, b in zip(job.operations, job.operations[1:]):
            preds[b.key].append(a.key)
    for seq in orders.values():
        for a, b in zip(seq, seq[1:]):
            preds[b].append(a)
    release = {op.key: job.release for job in instance.jobs for op in job.operations}
    starts = dict(release)
    for _ in range(len(ops) + 1):
        changed = False
        for k in ops:
            t = max([release[k]] + [starts[a] + ops[a].duration for a in preds[k]])
            if t != starts[k]:
                starts[k] = t
                changed = True
        if not changed:
            return starts
    return None


def brute_optimal_schedule(instance: ProblemInstance, objective) -> tuple[Schedule, float]:
    """Enumerate every combination of machine sequences and return the best
    earliest-start schedule under ``objective`` (a function of a Schedule).
    The first minimum in lexicographic sequence order wins ties. A utility
    name such as ``"makespan"`` is accepted too."""
    if isinstance(objective, str):
        objective = UTILITIES[objective]
    if instance.downtimes:
        raise ValueError("brute_optimal_schedule does not model machine downtime")
    by_machine = {m: [] for m in instance.machines}
    for key in sorted(instance.operations, key=lambda k: (str(k[0]), k[1])):
        by_machine[instance.operations[key].machine_id].append(key)
    machines = [m for m in instance.machines if by_machine[m]]
    size = math.prod(math.factorial(len(by_machine[m])) for m in machines)
    if size > PERMUTATION_CAP:
        raise ValueError(f"{size} sequence combinations exceed the cap of {PERMUTATION_CAP}")

    best, best_value = None, None
    for combo in itertools.product(*(itertools.permutations(by_machine[m]) for m in machines)):
        starts = _semi_active(instance, dict(zip(machines, combo)))
        if starts is None:
            continue
        candidate = Schedule(instance, starts)
        value = objective(candidate)
        if best_value is None or value < best_value:
            best, best_value = candidate, value
    return best, best_value
