"""Command-line interface.

Subcommands: run, sweep, capacity, ranks, schedules, validate.  Scenario
arguments are either YAML files or ``builtin:<name>`` (see
``generators.BUILTIN_SCENARIOS``).  Exit codes: 0 ok, 1 validation error,
2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from . import generators
from .capacity import region_membership
from .rank import (
    FlowLoopError,
    assign_ranks,
    decompose_components,
    enumerate_flow_paths,
    find_flow_loops,
)
from .scenario import ScenarioError, load_scenario
from .schedule_engine import enumerate_maximal_schedules
from .schedulers import SchedulerKind
from .sim import Scenario, average_delay, run, stability_estimate
from .sweep import CSV_HEADER, SweepSpec, run_sweep
from .topology import ValidationError


def resolve_scenario(arg: str) -> Scenario:
    if arg.startswith("builtin:"):
        name = arg.split(":", 1)[1]
        try:
            return generators.BUILTIN_SCENARIOS[name]()
        except KeyError:
            known = ", ".join(sorted(generators.BUILTIN_SCENARIOS))
            raise ScenarioError(f"unknown builtin scenario {name!r} (one of: {known})")
    return load_scenario(arg)


def _apply_overrides(sc: Scenario, args) -> Scenario:
    if getattr(args, "rate", None) is not None:
        sc = sc.with_uniform_rate(args.rate)
    over = {}
    if getattr(args, "scheduler", None):
        over["scheduler"] = SchedulerKind(args.scheduler)
    for key in ("epsilon", "horizon", "seed", "stride"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = val
    return sc.with_overrides(**over) if over else sc


def _add_scenario_args(p: argparse.ArgumentParser):
    p.add_argument("scenario", help="scenario YAML path or builtin:<name>")
    p.add_argument("--lambda", dest="rate", type=float, help="uniform flow rate")
    p.add_argument(
        "--scheduler", choices=[k.value for k in SchedulerKind], help="override scheduler"
    )
    p.add_argument("--epsilon", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--stride", type=int)


def cmd_run(args) -> int:
    sc = _apply_overrides(resolve_scenario(args.scenario), args)
    dump = None
    observer = None
    if args.dump_queues:
        dump = open(args.dump_queues, "w")
        dump.write("slot,queue,length,shadow_length\n")

    trace = None
    try:
        if dump is not None:

            def observer(slot, result, bank, shadow):
                for qi, label in enumerate(bank.labels):
                    shq = f"{shadow.q[qi]:.6f}" if shadow is not None else ""
                    dump.write(f"{slot},{label},{bank.lengths[qi]},{shq}\n")

        trace = run(sc, observer=observer)
    finally:
        if dump is not None:
            dump.close()

    print(f"scenario:       {sc.name or args.scenario}")
    print(f"scheduler:      {sc.scheduler.value}")
    print(f"horizon:        {trace.horizon}")
    print(f"injected:       {trace.injected}")
    print(f"delivered:      {trace.delivered}")
    if trace.delivered:
        print(f"avg_delay:      {average_delay(trace):.3f}")
    print(f"final_backlog:  {trace.final_backlog}")
    try:
        verdict = stability_estimate(trace)
        print(f"slope:          {verdict.slope:.3e}")
        print(f"verdict:        {verdict.status}")
    except ValueError:
        print("verdict:        inconclusive (horizon too short to classify)")
    return 0


def load_sweep_file(path: str) -> SweepSpec:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark else "?"
        raise ScenarioError(f"YAML parse error at line {line}: {e.problem}")
    if not isinstance(doc, dict):
        raise ScenarioError("sweep document must be a mapping")
    if "scenario" not in doc:
        raise ScenarioError("missing required key: scenario")
    base = resolve_scenario(str(doc["scenario"]))
    if "horizon" in doc:
        base = base.with_overrides(horizon=int(doc["horizon"]))
    axes = doc.get("axes", {})
    if not isinstance(axes, dict):
        raise ScenarioError("axes: expected a mapping")
    try:
        schedulers = tuple(
            SchedulerKind(s) for s in axes.get("scheduler", [base.scheduler.value])
        )
    except ValueError as e:
        raise ScenarioError(f"axes.scheduler: {e}")
    return SweepSpec(
        base=base,
        lambdas=tuple(float(x) for x in axes.get("lambda", [0.0])),
        epsilons=tuple(float(x) for x in axes.get("epsilon", [base.epsilon])),
        schedulers=schedulers,
        seeds=tuple(int(x) for x in axes.get("seed", [base.seed])),
    )


def cmd_sweep(args) -> int:
    spec = load_sweep_file(args.spec)
    rows = run_sweep(spec, args.out, workers=args.workers)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_capacity(args) -> int:
    sc = _apply_overrides(resolve_scenario(args.scenario), args)
    rates = list(sc.flows.rates())
    if all(r == 0 for r in rates):
        rates = [1.0] * len(rates)
        print("all flow rates are zero; using the uniform unit direction")
    result = region_membership(sc.graph, sc.flows, rates=rates)
    if result.unbounded:
        print("theta*:   unbounded (zero offered load)")
        return 0
    print(f"theta*:   {result.theta:.9f}")
    print(f"status:   {result.status}")
    scaled = [f"{r * result.theta:.6f}" for r in rates]
    print(f"boundary rates (theta* * lambda): {', '.join(scaled)}")
    print(f"binding links: {', '.join(map(str, result.binding_links)) or 'none'}")
    print("supporting schedule combination:")
    for sched, x in result.support:
        print(f"  x={x:.6f}  links {set(sched.active) or '{}'}")
    return 0


def cmd_ranks(args) -> int:
    sc = resolve_scenario(args.scenario)
    comps = decompose_components(sc.flows)
    for ci, comp in enumerate(comps):
        print(f"component {ci}: links {sorted(comp.links)} flows {list(comp.flows)}")
        loops = find_flow_loops(sc.flows, comp)
        if loops:
            for loop in loops:
                print(f"  flow-loop through links {loop.links} via flows {loop.flows}")
            print("  no ranking exists (component is not a flow-tree)")
            continue
        paths = enumerate_flow_paths(sc.flows, comp)
        print(f"  flow-tree with {len(paths)} flow-path(s):")
        for pi, p in enumerate(paths):
            print(f"    P{pi}: {p.links}")
        order = None
        if args.order:
            order = [int(x) for x in args.order.split(",")]
        result = assign_ranks(sc.flows, comp, path_order=order)
        links = sorted(comp.links)
        print("  rank evolution (one row per processed path):")
        header = " ".join(f"{l:>4}" for l in links)
        print(f"    iter  {header}")
        for i, snap in enumerate(result.snapshots):
            row = " ".join(f"{snap[l]:>4}" for l in links)
            print(f"    {i:>4}  {row}")
    return 0


def cmd_schedules(args) -> int:
    sc = resolve_scenario(args.scenario)
    sched_set = enumerate_maximal_schedules(sc.graph)
    print(f"{len(sched_set)} maximal feasible schedules over {sc.graph.n_links} links:")
    for s in sched_set:
        print(f"  {sorted(s.active)}")
    return 0


def cmd_validate(args) -> int:
    sc = resolve_scenario(args.scenario)
    print(
        f"ok: {len(sc.graph.nodes)} nodes, {sc.graph.n_links} links, "
        f"{len(sc.flows)} flows, scheduler {sc.scheduler.value}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linksched",
        description="Shadow-queue link scheduling simulator and analysis tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario and print metrics")
    _add_scenario_args(p)
    p.add_argument("--dump-queues", help="write per-slot queue lengths to a CSV")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="run a sweep spec and write a CSV")
    p.add_argument("spec", help="sweep YAML path")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("capacity", help="supportable-load analysis for a scenario")
    _add_scenario_args(p)
    p.set_defaults(fn=cmd_capacity)

    p = sub.add_parser("ranks", help="flow structure and rank assignment")
    p.add_argument("scenario", help="scenario YAML path or builtin:<name>")
    p.add_argument("--order", help="comma-separated flow-path order")
    p.set_defaults(fn=cmd_ranks)

    p = sub.add_parser("schedules", help="dump the maximal feasible schedules")
    p.add_argument("scenario", help="scenario YAML path or builtin:<name>")
    p.set_defaults(fn=cmd_schedules)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario", help="scenario YAML path or builtin:<name>")
    p.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ScenarioError, ValidationError, FlowLoopError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # pragma: no cover - defensive
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
