"""Command line interface: ``schedstab {measure,elicit,simulate,gen,experiment}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import io
from .dynamics import (
    DISPATCH_RULES,
    EVENT_KINDS,
    FrozenPrefix,
    LocalSearch,
    Regenerate,
    RightShift,
    dispatch_regenerate,
    event_from_dict,
    event_to_dict,
    initial_schedule,
    simulate,
)
from .elicitation import WORK_WEEK, HorizonStatement, PeriodStatement, i_from_horizon, i_from_period
from .harness import (
    GeneratorConfig,
    ScenarioSpec,
    default_measures,
    generate_instance,
    generate_scenario,
    measure_step,
    run_experiment,
)
from .measures import MEASURES, InstabilityConfig, evaluate, impact, pair
from .model import validate

OUT_ENV = "SCHEDSTAB_OUT"
log = logging.getLogger("schedstab")


def _decay_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("decay base I (give --I, or --pc with --horizon, or --dec)")
    g.add_argument("--I", dest="I", type=float, help="decay base directly")
    g.add_argument("--pc", type=float, help="impact left at the horizon end, in (0, 1]")
    g.add_argument("--horizon", type=int, help="planning horizon T in ticks")
    g.add_argument("--dec", type=float, help="impact decrease over one period, in [0, 1)")
    g.add_argument("--period", type=int, default=WORK_WEEK, help="reference period in ticks")


def _resolve_I(args, default_horizon: int | None = None) -> float:
    if args.I is not None:
        return args.I
    if args.pc is not None:
        horizon = args.horizon or default_horizon
        if horizon is None:
            raise SystemExit("--pc needs --horizon")
        return i_from_horizon(HorizonStatement(args.pc, horizon))
    if args.dec is not None:
        return i_from_period(PeriodStatement(args.dec, args.period))
    return 1.0


def _measure_params(args, I: float) -> dict:
    name = args.measure
    if name == "combined":
        return {"w_early": args.w_early, "w_late": args.w_late}
    if name == "job_level":
        return {"g_start": args.g_start, "g_completion": args.g_completion}
    if name == "sequence":
        return {"scope": args.scope}
    if name == "instability":
        return {"I": I, "t0": args.t0, "include_frozen": args.include_frozen}
    return {}


def cmd_measure(args) -> int:
    inst = io.load_instance(args.instance)
    inst_p = io.load_instance(args.revised_instance) if args.revised_instance else inst
    x = io.load_schedule(args.x, inst)
    x_p = io.load_schedule(args.x_prime, inst_p)
    bad = False
    for label, sched in (("x", x), ("x'", x_p)):
        for v in validate(sched):
            print(f"invalid {label}: {v}", file=sys.stderr)
            bad = True
    if bad:
        return 2
    I = _resolve_I(args, inst.horizon)
    params = _measure_params(args, I)
    report = evaluate(args.measure, pair(x, x_p), params)
    print(io.dumps({"measure": args.measure, "params": params, **report.as_dict()}), end="")
    return 0


def cmd_elicit(args) -> int:
    if args.pc is not None:
        if args.horizon is None:
            raise SystemExit("--pc needs --horizon")
        I = i_from_horizon(HorizonStatement(args.pc, args.horizon))
    elif args.dec is not None:
        I = i_from_period(PeriodStatement(args.dec, args.period))
    else:
        raise SystemExit("give either --pc and --horizon, or --dec [--period]")
    print(f"I = {I!r}")
    print(f"{'dist':>8}  {'impact':>20}")
    points = {0: "now", args.period: "period"}
    if args.horizon is not None:
        points.setdefault(args.horizon, "horizon")
    for dist in sorted(points):
        print(f"{dist:>8}  {impact(dist, I):>20.15f}  {points[dist]}")
    return 0


def _policy(args, I: float, lam: float | None = None):
    if args.policy == "right_shift":
        return RightShift()
    if args.policy in DISPATCH_RULES:
        return Regenerate(args.policy)
    return LocalSearch(
        lam=args.lam if lam is None else lam,
        utility=args.utility,
        instability_cfg=InstabilityConfig(I=I),
        iteration_budget=args.budget,
        seed=args.seed,
        kicks=args.kicks,
    )


def cmd_simulate(args) -> int:
    inst = io.load_instance(args.instance)
    x = io.load_schedule(args.schedule, inst)
    problems = validate(x)
    if problems:
        print(f"invalid schedule: {problems[0]}", file=sys.stderr)
        return 2
    events = [event_from_dict(d) for d in io.read_json(args.events)]
    I = _resolve_I(args, inst.horizon)
    steps = simulate(inst, x, events, _policy(args, I))
    final = steps[-1] if steps else None
    if final is not None:
        io.save_schedule(final.schedule, args.output)
        io.save_instance(final.applied.instance, args.instance_output)
    else:
        io.save_schedule(x, args.output)
        io.save_instance(inst, args.instance_output)

    specs = [s for s in default_measures(I) if s.label in args.measures]
    out = []
    before = x
    for i, step in enumerate(steps, start=1):
        reports = {
            spec.label: measure_step(spec, before, step.schedule, step.event.t0).as_dict()
            for spec in specs
        }
        out.append({"step": i, "event": event_to_dict(step.event), "measures": reports})
        before = step.schedule
    print(io.dumps(out), end="")
    return 0


def _mix(text: str) -> dict:
    mix = {}
    for part in filter(None, text.split(",")):
        kind, _, count = part.partition("=")
        if kind not in EVENT_KINDS:
            raise argparse.ArgumentTypeError(f"unknown event kind {kind!r}")
        mix[kind] = int(count or 1)
    return mix


def cmd_gen(args) -> int:
    if args.what == "instance":
        cfg = GeneratorConfig(args.jobs, args.machines, args.lo, args.hi, args.tightness, args.seed)
        inst = generate_instance(cfg, args.name)
        io.save_instance(inst, args.output)
        if args.schedule_output:
            io.save_schedule(initial_schedule(inst), args.schedule_output)
    elif args.what == "schedule":
        inst = io.load_instance(args.instance)
        io.save_schedule(dispatch_regenerate(inst, FrozenPrefix.empty(), args.rule), args.output)
    else:
        inst = io.load_instance(args.instance)
        events = generate_scenario(inst, args.seed, args.mix, down_range=(args.down_lo, args.down_hi))
        io.write_json(args.output, [event_to_dict(e) for e in events])
    return 0


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def cmd_experiment(args) -> int:
    instances = [
        generate_instance(
            GeneratorConfig(args.jobs, args.machines, args.lo, args.hi, args.tightness, args.instance_seed + i)
        )
        for i in range(args.instances)
    ]
    scenarios = [
        ScenarioSpec(f"sc{i:02d}", seed=args.scenario_seed + i, factor_mix=args.mix)
        for i in range(args.scenarios)
    ]
    I = _resolve_I(args, instances[0].horizon if instances else None)
    policies = []
    for name in args.policies.split(","):
        args.policy = name
        if name == "local_search":
            policies.extend(_policy(args, I, lam) for lam in _floats(args.lambdas))
        else:
            policies.append(_policy(args, I))
    measures = [s for s in default_measures(I) if s.label in args.measures.split(",")]
    out = Path(args.out or os.environ.get(OUT_ENV, "results"))
    report = run_experiment(instances, scenarios, policies, measures, out_dir=out)
    failed = sum(1 for r in report.rows if r["status"] != "ok")
    print(f"{len(report.rows)} rows ({failed} failed) written to {out}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schedstab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="compare two schedule files")
    p.add_argument("x", help="initial schedule")
    p.add_argument("x_prime", help="revised schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--revised-instance", help="instance of x' when it differs from x's")
    p.add_argument("--measure", choices=MEASURES, default="instability")
    p.add_argument("--t0", type=int, default=0)
    p.add_argument("--include-frozen", action="store_true")
    p.add_argument("--w-early", type=float, default=1.0)
    p.add_argument("--w-late", type=float, default=1.0)
    p.add_argument("--g-start", type=float, default=1.0)
    p.add_argument("--g-completion", type=float, default=1.0)
    p.add_argument("--scope", choices=("global", "per_machine"), default="global")
    _decay_args(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("elicit", help="decay base I from decision-maker statements")
    p.add_argument("--pc", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--dec", type=float)
    p.add_argument("--period", type=int, default=WORK_WEEK)
    p.set_defaults(func=cmd_elicit)

    def policy_args(p):
        p.add_argument("--lam", type=float, default=0.5)
        p.add_argument("--utility", choices=("makespan", "weighted_tardiness"), default="makespan")
        p.add_argument("--budget", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--kicks", type=int, default=2)

    labels = [s.label for s in default_measures()]
    p = sub.add_parser("simulate", help="apply an event file and repair")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--policy", choices=("right_shift", *DISPATCH_RULES, "local_search"), default="right_shift")
    p.add_argument("-o", "--output", required=True, help="revised schedule file")
    p.add_argument("--instance-output", required=True, help="revised instance file")
    p.add_argument("--measures", type=lambda t: t.split(","), default=labels)
    policy_args(p)
    _decay_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen", help="generate instances, schedules or scenarios")
    gsub = p.add_subparsers(dest="what", required=True)
    g = gsub.add_parser("instance")
    g.add_argument("--jobs", type=int, default=6)
    g.add_argument("--machines", type=int, default=6)
    g.add_argument("--lo", type=int, default=1)
    g.add_argument("--hi", type=int, default=10)
    g.add_argument("--tightness", type=float, default=1.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--name")
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--schedule-output", help="also write the FCFS initial schedule")
    g = gsub.add_parser("schedule")
    g.add_argument("--instance", required=True)
    g.add_argument("--rule", choices=DISPATCH_RULES, default="FCFS")
    g.add_argument("-o", "--output", required=True)
    g = gsub.add_parser("scenario")
    g.add_argument("--instance", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mix", type=_mix, default=_mix("machine_down=1"))
    g.add_argument("--down-lo", type=int, default=5)
    g.add_argument("--down-hi", type=int, default=20)
    g.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("experiment", help="run the policy x measure comparison matrix")
    p.add_argument("--instances", type=int, default=3)
    p.add_argument("--jobs", type=int, default=6)
    p.add_argument("--machines", type=int, default=6)
    p.add_argument("--lo", type=int, default=1)
    p.add_argument("--hi", type=int, default=10)
    p.add_argument("--tightness", type=float, default=1.5)
    p.add_argument("--instance-seed", type=int, default=0)
    p.add_argument("--scenarios", type=int, default=3)
    p.add_argument("--scenario-seed", type=int, default=100)
    p.add_argument(
        "--mix",
        type=_mix,
        default=_mix("machine_down=1,new_job=1,rush_job=1,cancel_job=1,due_date_change=1,weight_change=1"),
    )
    p.add_argument("--policies", default="right_shift,SPT,EDD,FCFS,local_search")
    p.add_argument("--lambdas", default="0,0.25,0.5,0.75,1")
    p.add_argument("--measures", default=",".join(labels))
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    policy_args(p)
    _decay_args(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
