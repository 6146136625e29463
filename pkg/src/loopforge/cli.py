"""Batch front door: generate instances, solve designs, report KPIs, export
LP files and run benchmark sweeps.

Exit codes: 0 success, 1 hard failure, 2 bad input, 3 solver hit its time
limit. Failures print a single JSON object describing the error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime
from pathlib import Path

from .estimators import MODEL_NAMES, LoopDesigner
from .generator import GenerationConfig, generate_instance
from .geometry import build_neighbourhood_graph
from .instance import Instance, LegalParams, baseline_objective, validate_instance
from .lp import OPTIMAL, TIME_LIMIT, SolveLimits, export_lp, relax, solve
from .metrics import compute_kpis, write_bench_csv
from .solution import DesignSolution

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_TIME_LIMIT = 3


def _compact_builder(name: str, instance: Instance, max_loops=None):
    from .cliques import build_mlcol, generate_loop_candidates
    from .compact import build_mlcpct, build_slcpct
    graph = build_neighbourhood_graph(instance)
    if name == "slcpct":
        return build_slcpct(instance, graph), None
    if name == "mlcpct":
        return build_mlcpct(instance, graph, max_loops), None
    if name == "mlcol":
        candidates = generate_loop_candidates(instance, graph)
        return build_mlcol(instance, candidates, graph), candidates
    raise ValueError(f"model {name!r} has no standalone LP formulation; "
                     "export one of slcpct, mlcpct, mlcol")


def _config_defaults(args: argparse.Namespace) -> dict:
    """Optional JSON config file; explicit flags win over file values."""
    if not getattr(args, "config", None):
        return {}
    return json.loads(Path(args.config).read_text())


def _merged(args: argparse.Namespace, name: str, fallback):
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    return _config_defaults(args).get(name, fallback)


def _generation_config(args: argparse.Namespace) -> GenerationConfig:
    seed = _merged(args, "seed", None)
    if seed is None:
        raise ValueError("--seed is required for generation (reproducibility)")
    days = float(_merged(args, "days", 7))
    step_minutes = int(_merged(args, "step-minutes", 60))
    horizon_steps = int(round(days * 24 * 60 / step_minutes))
    legal = LegalParams(
        max_distance_km=float(_merged(args, "max-distance-km", 2.0)),
        max_installed_power_kwc=float(_merged(args, "max-power-kwc", 3000.0)),
    )
    return GenerationConfig(
        seed=int(seed),
        n_actors=int(_merged(args, "n", 10)),
        density_per_km2=float(_merged(args, "density", 0.5)),
        distribution=str(_merged(args, "distribution", "uniform")),
        exposition=str(_merged(args, "exposition", "bc")),
        start=datetime.fromisoformat(str(_merged(args, "start", "2022-01-10T00:00:00"))),
        step_minutes=step_minutes,
        horizon_steps=horizon_steps,
        n_scenarios=int(_merged(args, "scenarios", 1)),
        legal=legal,
    )


def _cmd_generate(args: argparse.Namespace) -> int:
    config = _generation_config(args)
    instance = generate_instance(config)
    problems = validate_instance(instance)
    if problems:
        raise RuntimeError("generated instance failed validation: "
                           + "; ".join(problems))
    instance.to_json(args.out)
    print(json.dumps({"written": str(args.out), "n_actors": instance.n_actors,
                      "horizon_steps": instance.time_grid.horizon_steps,
                      "baseline_objective": baseline_objective(instance)}))
    return EXIT_OK


def _cmd_solve(args: argparse.Namespace) -> int:
    instance = Instance.from_json(args.instance)
    designer = LoopDesigner(model=args.model, time_limit=args.time_limit,
                            rel_gap=args.rel_gap, max_loops=args.max_loops)
    started = time.perf_counter()
    designer.fit(instance)
    elapsed = time.perf_counter() - started
    summary = {
        "model": args.model,
        "status": designer.status_,
        "objective": designer.objective_,
        "best_bound": designer.best_bound_,
        "baseline_objective": designer.baseline_,
        "wall_time_s": elapsed,
    }
    if designer.solution_ is not None:
        if args.out:
            designer.solution_.to_json(args.out)
            summary["solution"] = str(args.out)
        report = designer.kpis()
        if args.kpi_out:
            report.to_json(args.kpi_out)
            summary["kpis"] = report.to_dict()
    print(json.dumps(summary))
    return EXIT_TIME_LIMIT if designer.status_ == TIME_LIMIT else EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    instance = Instance.from_json(args.instance)
    solution = DesignSolution.from_json(args.solution)
    report = compute_kpis(instance, solution, baseline_objective(instance))
    if args.out:
        report.to_json(args.out)
    print(json.dumps(report.to_dict()))
    return EXIT_OK


def _cmd_export_lp(args: argparse.Namespace) -> int:
    instance = Instance.from_json(args.instance)
    model, _ = _compact_builder(args.model, instance, args.max_loops)
    if args.relaxed:
        model = relax(model)
    export_lp(model, args.out)
    print(json.dumps({"written": str(args.out), "variables": model.n_vars,
                      "constraints": model.n_constraints,
                      "binaries": model.n_binary}))
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    for m in models:
        if m not in MODEL_NAMES:
            raise ValueError(f"unknown model {m!r} in --models")
    n_list = [int(v) for v in str(_merged(args, "n-actors", "10")).split(",")]
    day_list = [float(v) for v in str(_merged(args, "horizon-days", "7")).split(",")]
    base_seed = int(_merged(args, "seed", 0))
    rows = []
    legal = LegalParams(
        max_distance_km=float(_merged(args, "max-distance-km", 2.0)),
        max_installed_power_kwc=float(_merged(args, "max-power-kwc", 3000.0)),
    )
    for n in n_list:
        for days in day_list:
            for rep in range(args.replicates):
                cfg = GenerationConfig(
                    seed=base_seed * 100_003 + rep + 7919 * (n + int(days * 24)),
                    n_actors=n,
                    horizon_steps=int(round(days * 24)),
                    density_per_km2=float(_merged(args, "density", 0.5)),
                    distribution=str(_merged(args, "distribution", "uniform")),
                    exposition=str(_merged(args, "exposition", "bc")),
                    start=datetime.fromisoformat(
                        str(_merged(args, "start", "2022-01-10T00:00:00"))),
                    legal=legal,
                )
                instance = generate_instance(cfg)
                label = (f"{cfg.distribution}_n{n}_d{days:g}"
                         f"_dens{cfg.density_per_km2:g}"
                         f"_pow{legal.max_installed_power_kwc:g}_{cfg.exposition}")
                for model_name in models:
                    rows.append(_bench_row(instance, model_name, label, rep,
                                           args.time_limit, args.root_gap))
    write_bench_csv(args.out, rows)
    print(json.dumps({"written": str(args.out), "rows": len(rows)}))
    return EXIT_OK


def _bench_row(instance: Instance, model_name: str, label: str, replicate: int,
               time_limit: float | None, want_gap: bool) -> dict:
    designer = LoopDesigner(model=model_name, time_limit=time_limit)
    started = time.perf_counter()
    designer.fit(instance)
    elapsed = time.perf_counter() - started
    row = {
        "configuration": label,
        "replicate": replicate,
        "model": model_name,
        "n_actors": instance.n_actors,
        "horizon_steps": instance.time_grid.horizon_steps,
        "n_scenarios": instance.scenarios.count,
        "status": designer.status_,
        "objective": designer.objective_,
        "best_bound": designer.best_bound_,
        "baseline_objective": designer.baseline_,
        "wall_time_s": round(elapsed, 4),
    }
    if designer.model_size_ is not None:
        row["n_vars"], row["n_constraints"], row["n_binaries"] = designer.model_size_
    if designer.solution_ is not None:
        report = compute_kpis(instance, designer.solution_, designer.baseline_)
        row.update({k: v for k, v in zip(report.CSV_FIELDS, report.csv_row())})
    if want_gap and model_name in ("slcpct", "mlcpct", "mlcol") \
            and designer.status_ == OPTIMAL:
        model, _ = _compact_builder(model_name, instance)
        lp_res = solve(relax(model), SolveLimits(time_limit=time_limit,
                                                 feasibility_tol=1e-9))
        if lp_res.status == OPTIMAL:
            diff = designer.objective_ - lp_res.objective
            if abs(designer.objective_) > 1e-9:
                row["root_gap_percent"] = 100.0 * diff / abs(designer.objective_)
            else:
                row["root_gap_percent"] = diff
    return row


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopforge",
        description="Design collective electricity self-consumption loops.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic instance")
    gen.add_argument("--config", help="JSON file with default parameter values")
    gen.add_argument("--seed", type=int, help="generation seed (required)")
    gen.add_argument("--n", type=int, help="number of actors")
    gen.add_argument("--density", type=float, help="actors per km^2")
    gen.add_argument("--distribution", choices=["uniform", "clustered"])
    gen.add_argument("--exposition", choices=["bc", "wc"])
    gen.add_argument("--start", help="period start (ISO datetime)")
    gen.add_argument("--days", type=float, help="horizon length in days")
    gen.add_argument("--step-minutes", type=int, dest="step_minutes")
    gen.add_argument("--scenarios", type=int, help="number of scenarios")
    gen.add_argument("--max-distance-km", type=float, dest="max_distance_km")
    gen.add_argument("--max-power-kwc", type=float, dest="max_power_kwc")
    gen.add_argument("--out", required=True, help="output instance JSON path")
    gen.set_defaults(func=_cmd_generate)

    slv = sub.add_parser("solve", help="solve a design model on an instance")
    slv.add_argument("--model", required=True, choices=list(MODEL_NAMES))
    slv.add_argument("--instance", required=True)
    slv.add_argument("--time-limit", type=float, dest="time_limit")
    slv.add_argument("--rel-gap", type=float, dest="rel_gap", default=1e-6)
    slv.add_argument("--max-loops", type=int, dest="max_loops")
    slv.add_argument("--out", help="solution JSON output path")
    slv.add_argument("--kpi-out", dest="kpi_out", help="KPI JSON output path")
    slv.set_defaults(func=_cmd_solve)

    rep = sub.add_parser("report", help="recompute KPIs from saved artifacts")
    rep.add_argument("--instance", required=True)
    rep.add_argument("--solution", required=True)
    rep.add_argument("--out", help="KPI JSON output path")
    rep.set_defaults(func=_cmd_report)

    exp = sub.add_parser("export-lp", help="write a model as a CPLEX LP file")
    exp.add_argument("--model", required=True, choices=["slcpct", "mlcpct", "mlcol"])
    exp.add_argument("--instance", required=True)
    exp.add_argument("--max-loops", type=int, dest="max_loops")
    exp.add_argument("--relaxed", action="store_true",
                     help="export the LP relaxation instead of the MILP")
    exp.add_argument("--out", required=True)
    exp.set_defaults(func=_cmd_export_lp)

    ben = sub.add_parser("bench", help="benchmark sweep writing one CSV row "
                                       "per configuration, replicate and model")
    ben.add_argument("--config", help="JSON file with default parameter values")
    ben.add_argument("--models", required=True,
                     help="comma-separated model names")
    ben.add_argument("--replicates", type=int, default=1)
    ben.add_argument("--seed", type=int)
    ben.add_argument("--n-actors", dest="n_actors",
                     help="comma-separated actor counts")
    ben.add_argument("--horizon-days", dest="horizon_days",
                     help="comma-separated horizons in days")
    ben.add_argument("--density", type=float)
    ben.add_argument("--distribution", choices=["uniform", "clustered"])
    ben.add_argument("--exposition", choices=["bc", "wc"])
    ben.add_argument("--start", help="period start (ISO datetime)")
    ben.add_argument("--max-distance-km", type=float, dest="max_distance_km")
    ben.add_argument("--max-power-kwc", type=float, dest="max_power_kwc")
    ben.add_argument("--time-limit", type=float, dest="time_limit")
    ben.add_argument("--root-gap", dest="root_gap", action="store_true",
                     help="also record the root-node gap (one extra LP solve)")
    ben.add_argument("--out", required=True, help="benchmark CSV path")
    ben.set_defaults(func=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)}}))
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - single front door
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)}}))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
