"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 bad data, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import bench
from .benchgen import GTG_WEIGHT_SCALE, GridConfig, GtgConfig, config_hash, grid_generate, gtg_generate, make_instance
from .io import dumps_instance, instance_to_dict, read_instance, read_instance_file, write_instance
from .mip import export_mip
from .model import InvalidInstanceError, NumericalError, ProblemInstance, objective, path_objective_oracle
from .solvers import brute_force_solve, greedy_solve, priority_greedy_solve
from .transforms import NodeProblem, edge_problem_to_node_problem, node_problem_to_edge_problem

log = logging.getLogger("ume")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(path, tolerance):
    problem = read_instance(path)
    if tolerance is not None:
        problem = ProblemInstance(problem.graph, problem.evaders, problem.budget, tolerance)
    return problem


def cmd_generate(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    base_seed = args.seed or 0
    seeds = range(base_seed, base_seed + args.seeds)
    lambdas = tuple(args.lambdas)
    manifest = []
    for seed in seeds:
        if args.family == "gtg":
            cfg = GtgConfig(n=args.n, theta=args.theta, alpha=args.alpha,
                            weight_scale=args.weight_scale, seed=seed)
            graph = gtg_generate(cfg)
            stem = f"gtg-n{args.n}-th{args.theta:g}-s{seed}"
        else:
            cfg = GridConfig(rows=args.rows, cols=args.cols, extra=args.extra, seed=seed)
            graph = grid_generate(cfg)
            stem = f"grid-{args.rows}x{args.cols}-x{args.extra}-s{seed}"
        problem = make_instance(graph, len(lambdas), lambdas, args.d, args.budget, seed,
                                restrict_sources=not args.all_sources,
                                unit_costs=not args.keep_costs)
        meta = {"generator": args.family, "config": asdict(cfg)}
        path = out / f"{stem}.json"
        write_instance(path, problem, meta=meta)
        manifest.append({"file": path.name, "seed": seed, "n_nodes": graph.n_nodes,
                         "n_edges": graph.n_edges, "config_hash": config_hash(cfg)})
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["file", "seed", "n_nodes", "n_edges", "config_hash"])
        w.writeheader()
        w.writerows(manifest)
    log.info("wrote %d instances to %s", len(manifest), out)
    return 0


def cmd_solve(args) -> int:
    problem = _load(args.instance, args.tolerance)
    if args.budget is not None:
        problem = problem.with_budget(args.budget)
    if args.solver == "greedy":
        sol = greedy_solve(problem, early_stop=args.early_stop, workers=args.threads)
    elif args.solver == "priority":
        sol = priority_greedy_solve(problem, early_stop=args.early_stop)
    else:
        sol = brute_force_solve(problem, args.max_combinations, at_most=args.at_most)
    d = sol.to_dict()
    d["config"].update({"instance": str(args.instance), "tolerance": problem.tolerance})
    _emit(json.dumps(d, indent=1) + "\n", args.out)
    if args.records:
        g = problem.graph
        rec = bench.BenchmarkRecord(Path(args.instance).stem, sol.solver, problem.budget, g.n_nodes,
                                    g.n_edges, problem.n_evaders, sol.objective, sol.eval_count,
                                    sol.wall_time, args.seed or 0,
                                    step_evals=" ".join(map(str, sol.step_evals)))
        path = Path(args.records)
        new = not path.exists()
        with open(path, "a", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=bench.FIELDS)
            if new:
                w.writeheader()
            row = asdict(rec)
            row["objective"] = repr(float(rec.objective))
            w.writerow(row)
    return 0


def cmd_benchmark(args) -> int:
    out = Path(args.out or "benchmark")
    out.mkdir(parents=True, exist_ok=True)
    base = args.seed or 0
    seeds = range(base, base + args.seeds)
    summary = {}
    cfg = bench.ProtocolConfig(budget=args.budget)
    if args.suite in ("protocol", "all"):
        results = bench.run_suite(seeds, cfg, workers=args.threads)
        bench.write_records(out / "protocol_records.csv", [r for r, _ in results])
        by = {s: [r for r, sol in results if r.solver == s and sol is not None] for s in cfg.solvers}
        stats = {s: bench._summary([r.eval_count for r in recs]) for s, recs in by.items() if recs}
        if "greedy" in stats and "priority" in stats:
            stats["speedup"] = stats["greedy"]["mean"] / stats["priority"]["mean"]
        stats["failures"] = sum(1 for r, sol in results if sol is None)
        summary["protocol"] = stats
        summary["budget_sweep"] = bench.budget_sweep(results, range(1, args.budget + 1))
    if args.suite in ("theta", "all"):
        results = []
        for theta in args.thetas:
            results += bench.run_suite(seeds, replace(cfg, theta=theta), workers=args.threads)
        bench.write_records(out / "theta_records.csv", [r for r, _ in results])
        summary["theta_sweep"] = bench.theta_sweep(results)
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    sys.stdout.write(json.dumps(summary, indent=1) + "\n")
    return 0


def cmd_export_mip(args) -> int:
    problem = _load(args.instance, args.tolerance)
    _emit(export_mip(problem, budget_equality=not args.budget_le, pi_upper_bounds=args.pi_upper),
          args.out)
    return 0


def cmd_oracle(args) -> int:
    problem = _load(args.instance, args.tolerance)
    S = tuple(int(x) for x in args.set.split(",") if x.strip()) if args.set else ()
    per = [path_objective_oracle(ev, S, problem.graph, args.max_paths) for ev in problem.evaders]
    J_paths = sum(ev.weight * j for ev, j in zip(problem.evaders, per))
    J_solve = objective(problem, S)
    d = {"set": list(S), "objective_paths": J_paths, "objective_solve": J_solve,
         "difference": abs(J_paths - J_solve), "per_evader": per}
    _emit(json.dumps(d, indent=1) + "\n", args.out)
    return 0


def cmd_transform(args) -> int:
    problem, _ = read_instance_file(args.instance)
    if isinstance(problem, NodeProblem):
        new, tmap = node_problem_to_edge_problem(problem)
    else:
        new, tmap = edge_problem_to_node_problem(problem)
    _emit(dumps_instance(instance_to_dict(new, explicit_matrices=True, transform=tmap)), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base random seed")
    common.add_argument("--tolerance", type=float, default=None, help="linear-solve tolerance")
    common.add_argument("--threads", type=int, default=1, help="worker count")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ume", description="Interdiction of unreactive Markovian evaders")
    sub = p.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate benchmark instances")
    fam = gen.add_subparsers(dest="family", required=True)
    inst = argparse.ArgumentParser(add_help=False)
    inst.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    inst.add_argument("--evaders", type=int, default=None, help="defaults to len(--lambdas)")
    inst.add_argument("--lambdas", type=float, nargs="+", default=[0.1, 1000.0])
    inst.add_argument("--d", type=float, default=0.5, help="uniform interdiction efficiency")
    inst.add_argument("--budget", type=int, default=10)
    inst.add_argument("--all-sources", action="store_true",
                      help="uniform source over all non-target nodes")
    inst.add_argument("--keep-costs", action="store_true", help="keep generator edge costs")
    g = fam.add_parser("gtg", parents=[common, inst], help="geographical threshold graph")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--theta", type=float, required=True)
    g.add_argument("--alpha", type=float, default=2.0)
    g.add_argument("--weight-scale", type=float, default=GTG_WEIGHT_SCALE)
    g = fam.add_parser("grid", parents=[common, inst], help="lattice with random extra edges")
    g.add_argument("--rows", type=int, required=True)
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--extra", type=int, default=1, help="random out-edges added per node")

    s = sub.add_parser("solve", parents=[common], help="run a solver on an instance")
    s.add_argument("instance")
    s.add_argument("--solver", choices=["greedy", "priority", "exact"], default="priority")
    s.add_argument("--budget", type=int, default=None, help="override the instance budget")
    s.add_argument("--early-stop", action="store_true", help="stop when no edge has positive gain")
    s.add_argument("--max-combinations", type=int, default=2_000_000)
    s.add_argument("--at-most", action="store_true", help="exact: search all sizes up to B")
    s.add_argument("--records", default=None, help="append a benchmark record to this CSV")

    b = sub.add_parser("benchmark", parents=[common], help="evaluation-count benchmarks")
    b.add_argument("--suite", choices=["protocol", "theta", "all"], default="protocol")
    b.add_argument("--seeds", type=int, default=50)
    b.add_argument("--budget", type=int, default=10)
    b.add_argument("--thetas", type=float, nargs="+", default=[50, 45, 40, 35, 30, 25, 20])

    m = sub.add_parser("export-mip", parents=[common], help="write the MIP in LP format")
    m.add_argument("instance")
    m.add_argument("--budget-le", action="store_true", help="budget as <= instead of =")
    m.add_argument("--pi-upper", action="store_true", help="add pi <= 1 bounds")

    o = sub.add_parser("oracle", parents=[common], help="objective by path enumeration")
    o.add_argument("instance")
    o.add_argument("--set", default="", help="comma-separated edge ids")
    o.add_argument("--max-paths", type=int, default=100_000)

    t = sub.add_parser("transform", parents=[common], help="edge <-> node interdiction reduction")
    t.add_argument("instance")
    return p


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "benchmark": cmd_benchmark,
    "export-mip": cmd_export_mip,
    "oracle": cmd_oracle,
    "transform": cmd_transform,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "generate" and args.evaders not in (None, len(args.lambdas)):
        parser.error("--evaders must equal the number of --lambdas")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"ume: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidInstanceError, OSError) as exc:
        print(f"ume: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
