"""Acceptance criteria 1-9, one test each.

Every test records a ``criterion N: PASS|FAIL ...`` line; pytest prints them
in a summary section, and running this file directly prints them as it goes.
"""

import csv
import math
import random
import time

import pytest

from schedstab.cli import main as cli_main
from schedstab.dynamics import (
    EVENT_KINDS,
    LocalSearch,
    Regenerate,
    RightShift,
    WeightChange,
    apply_event,
    initial_schedule,
    local_search_repair,
    repair_objective,
    right_shift_repair,
    simulate,
)
from schedstab.elicitation import HorizonStatement, PeriodStatement, i_from_horizon, i_from_period
from schedstab.harness import GeneratorConfig, generate_instance, generate_scenario
from schedstab.measures import (
    InstabilityConfig,
    impact,
    instability,
    lin_measure,
    pair,
    sequence_measure,
    wu_measure,
)
from schedstab.model import makespan, validate
from schedstab.oracle import brute_optimal_schedule, brute_sequence_count

from _gen import random_pair, shifted
from conftest import ACCEPTANCE_LINES


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


PAIRS_500 = range(500)


def test_criterion_1_wu_reduction():
    t = time.perf_counter()
    worst = 0.0
    for seed in PAIRS_500:
        p = pair(*random_pair(seed))
        a, b = instability(p, InstabilityConfig(I=1.0)).total, wu_measure(p).total
        worst = max(worst, abs(a - b) / max(abs(b), 1.0))
    elapsed = time.perf_counter() - t
    record(1, worst <= 1e-9 and elapsed < 5, f"max rel err {worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_lin_decomposition():
    bad = 0
    for seed in PAIRS_500:
        x, y = random_pair(seed)
        if lin_measure(pair(x, y)).total + lin_measure(pair(y, x)).total != wu_measure(pair(x, y)).total:
            bad += 1
    record(2, bad == 0, f"{bad} of 500 pairs differ")


def test_criterion_3_elicitation_round_trip():
    errs = [abs(impact(T, i_from_horizon(HorizonStatement(0.3, T))) - 0.3) for T in (5, 20, 100)]
    errs.append(abs(impact(5, i_from_period(PeriodStatement(0.2, 5))) - 0.8))
    cross = all(
        i_from_period(PeriodStatement(dec, P)) == i_from_horizon(HorizonStatement(1 - dec, P))
        for dec in (0.0, 0.05, 0.2, 0.5, 0.9)
        for P in (1, 5, 7, 30)
    )
    record(3, max(errs) <= 1e-9 and cross, f"max abs err {max(errs):.2e}, cross-route exact={cross}")


def test_criterion_4_impact_decay():
    T = 20
    I = i_from_horizon(HorizonStatement(0.3, T))
    values = [impact(d, I) for d in range(10 * T + 1)]
    decreasing = all(a > b for a, b in zip(values, values[1:]))
    record(4, decreasing and values[-1] > 0, f"strictly decreasing={decreasing}, imp(10T)={values[-1]:.3e}")


def test_criterion_5_sequence_oracle():
    bad = 0
    for seed in range(1000):
        p = pair(*random_pair(10_000 + seed))
        scope = "global" if seed % 2 == 0 else "per_machine"
        if sequence_measure(p, scope).total != brute_sequence_count(p, scope):
            bad += 1
    record(5, bad == 0, f"{bad} of 1000 pairs differ")


def test_criterion_6_repair_feasibility():
    t = time.perf_counter()
    kinds = list(EVENT_KINDS)
    seen, problems, steps = set(), [], 0
    for seed in range(200):
        inst = generate_instance(GeneratorConfig(6, 6, seed=seed))
        x0 = initial_schedule(inst)
        events = generate_scenario(inst, seed, {kinds[seed % 6]: 1, kinds[(seed + 3) % 6]: 1}, schedule=x0)
        seen.update(e.kind for e in events)
        policies = [
            RightShift(),
            Regenerate("SPT"),
            Regenerate("EDD"),
            Regenerate("FCFS"),
            LocalSearch(lam=(seed % 5) / 4, iteration_budget=100, seed=seed, instability_cfg=InstabilityConfig(I=0.95)),
        ]
        for policy in policies:
            before = x0
            for step in simulate(inst, x0, events, policy):
                steps += 1
                revised, frozen, _ = step.applied
                tag = (seed, policy.name, step.event.kind)
                if step.schedule.instance is not revised or validate(step.schedule):
                    problems.append((*tag, "invalid"))
                if any(step.schedule.starts.get(k) != s for k, s in frozen.starts.items()):
                    problems.append((*tag, "frozen start moved"))
                if isinstance(policy, RightShift):
                    p = pair(before, step.schedule)
                    if sequence_measure(p, "per_machine").total or lin_measure(p).total:
                        problems.append((*tag, "right shift reordered or advanced"))
                before = step.schedule
    elapsed = time.perf_counter() - t
    ok = not problems and seen == set(EVENT_KINDS) and elapsed < 60
    record(6, ok, f"{steps} steps, {len(problems)} problems, kinds {len(seen)}/6, {elapsed:.1f}s")


def test_criterion_7_local_search_sanity():
    t = time.perf_counter()
    gaps, regressions = [], 0
    for seed in range(20):
        inst = generate_instance(GeneratorConfig(3, 3, seed=seed))
        x0 = initial_schedule(inst)
        revised, frozen, conflicts = apply_event(inst, x0, WeightChange(0, 0, 2))
        start = right_shift_repair(revised, x0, frozen, conflicts)
        _, optimum = brute_optimal_schedule(revised, "makespan")
        for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
            policy = LocalSearch(lam=lam, iteration_budget=10_000, seed=seed, instability_cfg=InstabilityConfig(I=0.95))
            out = local_search_repair(revised, x0, frozen, policy, start=start)
            if repair_objective(x0, out, policy, 0) > repair_objective(x0, start, policy, 0):
                regressions += 1
            if lam == 1.0:
                gaps.append(makespan(out) / optimum - 1)
    elapsed = time.perf_counter() - t
    ok = max(gaps) <= 0.05 and regressions == 0 and elapsed < 120
    record(7, ok, f"worst makespan gap {max(gaps):.1%}, {regressions} objective regressions, {elapsed:.1f}s")


def test_criterion_8_shift_invariance_and_symmetry():
    worst = 0.0
    for seed in PAIRS_500:
        x, y = random_pair(20_000 + seed)
        rng = random.Random(seed)
        t0 = rng.randint(0, 20)
        c = rng.randint(-t0, 500)
        I = rng.choice([0.5, 0.9, 0.99, 1.0])
        base = instability(pair(x, y), InstabilityConfig(I=I, t0=t0)).total
        moved = instability(pair(shifted(x, c), shifted(y, c)), InstabilityConfig(I=I, t0=t0 + c)).total
        swapped = instability(pair(y, x), InstabilityConfig(I=I, t0=t0)).total
        for v in (moved, swapped):
            worst = max(worst, abs(v - base) / max(abs(base), 1e-300) if base else abs(v))
    record(8, worst <= 1e-9, f"max rel deviation {worst:.2e}")


def _experiment(out):
    args = [
        "experiment", "--instances", "2", "--scenarios", "2", "--jobs", "4", "--machines", "3",
        "--lambdas", "0,1", "--budget", "100", "--out", str(out),
    ]
    assert cli_main(args) == 0
    with open(out / "report.csv", newline="") as fh:
        totals = [(r["instance"], r["scenario"], r["policy"], r["measure"], r["total"]) for r in csv.DictReader(fh)]
    files = {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted((out / "schedules").rglob("*.json"))}
    return totals, files


def test_criterion_9_end_to_end_determinism(tmp_path):
    totals_a, files_a = _experiment(tmp_path / "a")
    totals_b, files_b = _experiment(tmp_path / "b")
    same_files = files_a == files_b and len(files_a) > 0
    same_totals = totals_a == totals_b
    record(9, same_files and same_totals, f"{len(files_a)} schedule files identical={same_files}, totals identical={same_totals}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
