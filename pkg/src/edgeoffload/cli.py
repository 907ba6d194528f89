"""Command line entry point: ``edgeoffload {gen-network,gen-tasks,solve,experiment}``.

Exit codes: 0 success, 1 a solver or experiment run failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

from .assignment import AssignmentError, InfeasibleInstanceError, normalized_utility, verify_assignment
from .baselines import SCHEDULERS, NodeLimitError, solve_exact
from .formulation import relaxation_lp
from .harness import KINDS, ConfigError, emit_outputs, load_config, run_experiment, run_scheduler
from .network import GeneratorConfig, InvariantError, generate_scenario, generate_tasks
from .options import TaskInfeasibleError, build_instance, dump_options
from .selr import FALLBACKS, SelrConfig, SelrFallbackError
from .serialization import SchemaError, attach_tasks, load_scenario, load_tasks, save_scenario, save_tasks


class _InputError(Exception):
    pass


def _gen_network(args) -> int:
    cfg = GeneratorConfig.for_availability(args.server_availability, args.nodes, args.seed)
    save_scenario(args.out, generate_scenario(cfg))
    return 0


def _gen_tasks(args) -> int:
    scen = load_scenario(args.network)
    save_tasks(args.out, generate_tasks(scen.graph, args.count, args.seed), args.seed)
    return 0


def _solve(args) -> int:
    if args.trace and args.scheduler != "selr":
        raise _InputError("--trace is only available for the selr scheduler")
    if args.utility_histogram and args.scheduler != "greedy-t-multi":
        raise _InputError("--utility-histogram is only available for greedy-t-multi")
    scen = attach_tasks(load_scenario(args.network), load_tasks(args.tasks))
    inst = build_instance(scen, args.lam)
    if args.dump_options:
        dump_options(inst, args.dump_options)
    if args.dump_lp:
        relaxation_lp(inst).dump(args.dump_lp)
    selr_cfg = SelrConfig(gamma=args.gamma, alpha=args.alpha, delta=args.delta, epsilon=args.epsilon,
                          max_iters=args.max_iters, fallback=args.fallback)
    a = run_scheduler(inst, args.scheduler, seed=args.seed, permutations_m=args.permutations,
                      selr_config=selr_cfg, node_limit=args.node_limit, backend=args.backend)
    verify_assignment(inst, a)
    norm = None
    if args.normalize:
        exact = a if args.scheduler == "optimal" else solve_exact(inst, node_limit=args.node_limit,
                                                                  backend=args.backend)
        norm = normalized_utility(a.total_utility, exact.total_utility)
    out = {
        "scheduler": a.scheduler, "lambda": args.lam, "num_tasks": a.num_tasks,
        "assignment": [{"task_id": inst.tasks[i].id, "option_id": j, "server": inst.options[j].server,
                        "route": list(inst.options[j].route.nodes), "model_id": inst.options[j].profile.model_id}
                       for i, j in enumerate(a.chosen)],
        "total_utility": a.total_utility, "normalized_utility": norm, "avg_accuracy_percent": a.avg_accuracy,
        "avg_latency_s": a.avg_latency, "on_device_count": a.on_device_count, "runtime_ms": a.runtime_ms,
        "iterations_used": a.iterations_used, "fallback_used": a.fallback_used,
    }
    text = json.dumps(out, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.trace:
        with open(args.trace, "w") as fh:
            for rec in a.extras["trace"]:
                fh.write(json.dumps(rec.as_dict()) + "\n")
    if args.utility_histogram:
        with open(args.utility_histogram, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["permutation", "total_utility"])
            w.writerows([k, repr(u)] for k, u in enumerate(a.extras["utilities"]))
    return 0


def _experiment(args) -> int:
    cfg = load_config(args.config, kind=args.kind, out_dir=args.out)
    result = run_experiment(cfg, strict=False)
    paths = emit_outputs(result)
    print(f"{len(result.records)} records, {len(result.failures)} failures -> {paths['results'].parent}")
    for f in result.failures[:10]:
        print(f"failed: instance {f.instance_id} load {f.num_tasks} {f.scheduler}: {f.error}", file=sys.stderr)
    return 0 if result.ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgeoffload", description="Joint computation offloading and routing.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-network", help="generate a random network with service profiles")
    g.add_argument("--nodes", type=int, default=300)
    g.add_argument("--server-availability", choices=("standard", "richer"), default="standard")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_gen_network)

    t = sub.add_parser("gen-tasks", help="generate tasks on a network's sensors")
    t.add_argument("--network", required=True)
    t.add_argument("--count", type=int, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=_gen_tasks)

    s = sub.add_parser("solve", help="schedule one instance")
    s.add_argument("--scheduler", choices=SCHEDULERS, required=True)
    s.add_argument("--network", required=True)
    s.add_argument("--tasks", required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    d = SelrConfig()
    s.add_argument("--gamma", type=float, default=d.gamma)
    s.add_argument("--alpha", type=float, default=d.alpha)
    s.add_argument("--delta", type=float, default=d.delta)
    s.add_argument("--epsilon", type=float, default=d.epsilon)
    s.add_argument("--max-iters", type=int, default=d.max_iters)
    s.add_argument("--fallback", choices=FALLBACKS, default=d.fallback)
    s.add_argument("--permutations", type=int, default=100)
    s.add_argument("--seed", type=int, default=0, help="seed for the randomized greedy schedulers")
    s.add_argument("--node-limit", type=int, default=None)
    s.add_argument("--backend", choices=("numba", "numpy"), default=None)
    s.add_argument("--normalize", action="store_true", help="also run the exact solver and report the ratio")
    s.add_argument("--out")
    s.add_argument("--trace", help="selr: per-iteration JSON lines")
    s.add_argument("--utility-histogram", help="greedy-t-multi: utility of every permutation (CSV)")
    s.add_argument("--dump-options", help="write the option universe as JSON")
    s.add_argument("--dump-lp", help="write the LP relaxation in plain text")
    s.set_defaults(func=_solve)

    e = sub.add_parser("experiment", help="run an experiment sweep from a config file")
    e.add_argument("kind", choices=KINDS)
    e.add_argument("--config", required=True)
    e.add_argument("--out", default=None)
    e.set_defaults(func=_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, InvariantError, ConfigError, TaskInfeasibleError, _InputError, ValueError,
            FileNotFoundError) as exc:
        if isinstance(exc, (InfeasibleInstanceError, TaskInfeasibleError)):
            print(f"infeasible: {exc}", file=sys.stderr)
            return 1
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SelrFallbackError, NodeLimitError, AssignmentError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
