import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schedstab.measures import (
    InstabilityConfig,
    PairingError,
    closeness,
    combined_measure,
    delta_start,
    evaluate,
    impact,
    instability,
    job_level_measure,
    lin_measure,
    pair,
    sequence_measure,
    wu_measure,
)
from schedstab.model import Job, Operation, ProblemInstance, Schedule
from schedstab.oracle import brute_sequence_count, term_by_term_instability

from _gen import random_pair, shifted

seeds = st.integers(min_value=0, max_value=2**32 - 1)
decay = st.floats(min_value=0.05, max_value=1.0)


def singles(xs, ys, machine=None):
    """One single-operation job per entry; each on its own machine unless
    ``machine`` is given."""
    jobs = [Job(j, [Operation(j, 1, machine if machine is not None else j, 1)]) for j in range(len(xs))]
    machines = [machine] if machine is not None else list(range(len(xs)))
    inst = ProblemInstance(jobs, machines, 100)
    x = Schedule(inst, {(j, 1): s for j, s in enumerate(xs)})
    y = Schedule(inst, {(j, 1): s for j, s in enumerate(ys)})
    return pair(x, y)


def close(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)


# -- worked examples ----------------------------------------------------------


def test_delta_start():
    assert delta_start(5, 5) == 0
    assert delta_start(3, 7) == 4
    assert delta_start(7, 3) == 4


def test_pairing_counts_added_and_removed():
    base = [Job(0, [Operation(0, 1, "A", 2), Operation(0, 2, "B", 2)])]
    rush = Job(1, [Operation(1, 1, "A", 1), Operation(1, 2, "B", 1)])
    gone = Job(2, [Operation(2, k, "C", 1) for k in (1, 2, 3)])
    inst_x = ProblemInstance(base + [gone], ["A", "B", "C"], 20)
    inst_y = ProblemInstance(base + [rush], ["A", "B", "C"], 20)
    x = Schedule(inst_x, {(0, 1): 0, (0, 2): 2, (2, 1): 0, (2, 2): 1, (2, 3): 2})
    y = Schedule(inst_y, {(0, 1): 0, (0, 2): 2, (1, 1): 2, (1, 2): 4})
    p = pair(x, y)
    assert p.pairing == ((0, 1), (0, 2))
    assert len(p.added) == 2 and len(p.removed) == 3
    report = wu_measure(p)
    assert (report.total, report.added_count, report.removed_count) == (0, 2, 3)
    same = pair(x, x)
    assert same.added == same.removed == ()


def test_pairing_rejects_conflicting_durations():
    a = ProblemInstance([Job(0, [Operation(0, 1, "A", 2)])], ["A"], 10)
    b = ProblemInstance([Job(0, [Operation(0, 1, "A", 3)])], ["A"], 10)
    with pytest.raises(PairingError):
        pair(Schedule(a, {(0, 1): 0}), Schedule(b, {(0, 1): 0}))


def test_reassigned_operations_are_metadata_only():
    a = ProblemInstance([Job(0, [Operation(0, 1, "A", 2)])], ["A", "B"], 10)
    b = ProblemInstance([Job(0, [Operation(0, 1, "B", 2)])], ["A", "B"], 10)
    p = pair(Schedule(a, {(0, 1): 0}), Schedule(b, {(0, 1): 0}))
    assert p.reassigned == ((0, 1),)
    assert wu_measure(p).total == 0


def test_wu_examples():
    assert wu_measure(singles([0, 5], [0, 5])).total == 0
    assert wu_measure(singles([0, 5], [2, 4])).total == 3
    assert wu_measure(singles([2, 4], [0, 5])).total == 3


def test_lin_examples():
    assert lin_measure(singles([1, 2, 3], [4, 2, 9])).total == 0
    assert lin_measure(singles([10, 10], [7, 12])).total == 3


def test_combined_examples():
    p = singles([10, 10, 4], [7, 12, 0])
    assert combined_measure(p, 1, 1).total == wu_measure(p).total
    assert combined_measure(p, 1, 0).total == lin_measure(p).total
    assert combined_measure(singles([5, 6], [1, 2]), 0, 1).total == 0
    assert combined_measure(p, 2, 0.5).total == 2 * 7 + 0.5 * 2
    with pytest.raises(ValueError):
        combined_measure(p, -1, 1)


def test_job_level_examples():
    inst = ProblemInstance([Job(0, [Operation(0, 1, "A", 3), Operation(0, 2, "B", 3)])], ["A", "B"], 20)
    x = Schedule(inst, {(0, 1): 0, (0, 2): 6})
    y = Schedule(inst, {(0, 1): 2, (0, 2): 6})
    assert job_level_measure(pair(x, y), 1, 1).total == 2
    assert job_level_measure(pair(x, y), 0, 1).total == 0
    assert job_level_measure(pair(x, x)).total == 0
    z = Schedule(inst, {(0, 1): 0, (0, 2): 8})
    # completion-only variant sees the 2-tick later completion
    assert job_level_measure(pair(x, z), 0, 1).total == 2
    assert job_level_measure(pair(x, z), 0, 1).per_operation == {0: 2}


def test_job_level_skips_partial_jobs():
    full = Job(0, [Operation(0, 1, "A", 1), Operation(0, 2, "A", 1)])
    cut = Job(0, [Operation(0, 1, "A", 1)])
    x = Schedule(ProblemInstance([full], ["A"], 9), {(0, 1): 0, (0, 2): 1})
    y = Schedule(ProblemInstance([cut], ["A"], 9), {(0, 1): 0})
    report = job_level_measure(pair(x, y))
    assert report.total == 0 and report.skipped_count == 1


def test_sequence_examples():
    assert sequence_measure(singles([0, 1, 2], [0, 1, 2])).total == 0
    assert sequence_measure(singles([0, 1, 2], [2, 1, 0])).total == 3
    # ties never count, in either schedule
    assert sequence_measure(singles([0, 0, 1], [5, 3, 5])).total == 0
    assert sequence_measure(singles([0, 1], [3, 3])).total == 0
    assert brute_sequence_count(singles([0, 1, 2], [2, 1, 0])) == 3


def test_sequence_per_machine_scope():
    # jobs 0, 1 share machine "A"; job 2 is alone on "B"
    jobs = [Job(j, [Operation(j, 1, m, 1)]) for j, m in enumerate("AAB")]
    inst = ProblemInstance(jobs, ["A", "B"], 20)
    x = Schedule(inst, {(0, 1): 0, (1, 1): 1, (2, 1): 2})
    y = Schedule(inst, {(0, 1): 3, (1, 1): 1, (2, 1): 0})
    p = pair(x, y)
    assert sequence_measure(p).total == 3
    assert sequence_measure(p, "per_machine").total == 1
    assert brute_sequence_count(p, "per_machine") == 1


def test_closeness_examples():
    assert closeness(4, 4, 4) == 0
    assert closeness(10, 4, 2) == 2
    assert closeness(1, 5, 3) == -2


def test_impact_examples():
    for I in (0.1, 0.5, 0.93, 1.0):
        assert impact(0, I) == 1
    for dist in (0, 3, 50, 1000):
        assert impact(dist, 1.0) == 1
    assert impact(3, 0.5) == 0.125
    with pytest.raises(ValueError):
        impact(1, 0)


def test_instability_examples():
    p = singles([1], [3])
    assert instability(p, InstabilityConfig(I=0.5, t0=0)).total == 1.0
    same = singles([1, 2, 9], [1, 2, 9])
    for I in (0.2, 1.0):
        for t0 in (0, 1):
            assert instability(same, InstabilityConfig(I=I, t0=t0)).total == 0
    near_far = instability(singles([0, 10], [3, 13]), InstabilityConfig(I=0.9, t0=0))
    assert near_far.per_operation[(0, 1)] > near_far.per_operation[(1, 1)]


def test_instability_config_domain():
    for bad in (0, -0.5, 1.01):
        with pytest.raises(ValueError):
            InstabilityConfig(I=bad)


def test_frozen_policy():
    # operation 0 moved from 1 to 5 with t0 = 3: min(s, s') < t0
    p = singles([1, 6], [5, 8])
    skipped = instability(p, InstabilityConfig(I=0.5, t0=3))
    assert skipped.skipped_count == 1
    assert skipped.total == 0.5**3 * 2
    included = instability(p, InstabilityConfig(I=0.5, t0=3, include_frozen=True))
    assert included.total == 0.5**-2 * 4 + 0.5**3 * 2


def test_evaluate_dispatch():
    p = singles([0, 5], [2, 4])
    assert evaluate("wu", p).total == 3
    assert evaluate("instability", p, {"I": 1.0}).total == 3
    assert evaluate("sequence", p, {"scope": "per_machine"}).total == 0
    with pytest.raises(ValueError):
        evaluate("nope", p)


# -- properties -----------------------------------------------------------------


ALL = [
    lambda p: wu_measure(p),
    lambda p: lin_measure(p),
    lambda p: combined_measure(p, 0.3, 2.0),
    lambda p: job_level_measure(p, 0.5, 1.5),
    lambda p: sequence_measure(p),
    lambda p: sequence_measure(p, "per_machine"),
    lambda p: instability(p, InstabilityConfig(I=0.87, t0=2, include_frozen=True)),
]


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_totals_nonnegative_and_consistent(seed):
    p = pair(*random_pair(seed))
    for measure in ALL:
        report = measure(p)
        assert report.total >= 0
        assert close(report.total, math.fsum(report.per_operation.values()))


@settings(max_examples=60, deadline=None)
@given(seeds, decay)
def test_symmetry(seed, I):
    x, y = random_pair(seed)
    cfg = InstabilityConfig(I=I, t0=3)
    fwd, back = pair(x, y), pair(y, x)
    assert wu_measure(fwd).total == wu_measure(back).total
    assert sequence_measure(fwd).total == sequence_measure(back).total
    assert close(instability(fwd, cfg).total, instability(back, cfg).total)
    assert lin_measure(fwd).total + lin_measure(back).total == wu_measure(fwd).total


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_zero_iff_identical(seed):
    x, y = random_pair(seed)
    p = pair(x, y)
    identical = x.starts == y.starts
    assert (wu_measure(p).total == 0) == identical
    assert (instability(p, InstabilityConfig(I=0.7)).total == 0) == identical


@settings(max_examples=60, deadline=None)
@given(seeds, decay, st.integers(0, 40), st.integers(-20, 60))
def test_shift_covariance(seed, I, t0, c):
    x, y = random_pair(seed)
    c = max(c, -t0)  # keep starts and t0 non-negative
    base = instability(pair(x, y), InstabilityConfig(I=I, t0=t0))
    moved = instability(pair(shifted(x, c), shifted(y, c)), InstabilityConfig(I=I, t0=t0 + c))
    assert close(base.total, moved.total)


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(min_value=0.05, max_value=0.999), st.integers(1, 30))
def test_monotone_in_shift_size(seed, I, d):
    x, y = random_pair(seed)
    key = next(iter(x.starts))
    y = Schedule(y.instance, {**y.starts, key: max(y.starts[key], x.starts[key])})
    further = Schedule(y.instance, {**y.starts, key: y.starts[key] + d})
    cfg = InstabilityConfig(I=I, t0=0)
    assert instability(pair(x, further), cfg).total > instability(pair(x, y), cfg).total


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_wu_is_instability_at_one(seed):
    p = pair(*random_pair(seed))
    assert instability(p, InstabilityConfig(I=1.0)).total == wu_measure(p).total


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_sequence_matches_brute_force(seed):
    p = pair(*random_pair(seed))
    assert sequence_measure(p).total == brute_sequence_count(p)
    assert sequence_measure(p, "per_machine").total == brute_sequence_count(p, "per_machine")


@settings(max_examples=60, deadline=None)
@given(seeds, decay, st.integers(0, 30), st.booleans())
def test_instability_matches_high_precision(seed, I, t0, frozen):
    p = pair(*random_pair(seed, max_ops=20))
    cfg = InstabilityConfig(I=I, t0=t0, include_frozen=frozen)
    assert close(instability(p, cfg).total, term_by_term_instability(p, cfg))


@pytest.mark.parametrize("seed", range(5))
def test_near_changes_weigh_more(seed):
    rng = random.Random(seed)
    I = rng.uniform(0.5, 0.99)
    gap = rng.randint(1, 5)
    report = instability(singles([0, 10], [gap, 10 + gap]), InstabilityConfig(I=I))
    assert report.per_operation[(0, 1)] > report.per_operation[(1, 1)]
