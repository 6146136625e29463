"""loopforge: optimal design of collective electricity self-consumption loops.

Builds and solves the single-loop and multi-loop design MILPs, their Benders
and candidate-loop (clique generation) decompositions, generates realistic
prosumer instances and reports operational KPIs.
"""

from .benders import (BendersConfig, BendersCut, BendersTrace, run_benders_ml,
                      run_benders_sl, solve_subproblem_ml, solve_subproblem_sl)
from .cliques import (LoopCandidate, build_mlcol, enumerate_maximal_cliques,
                      generate_loop_candidates, knapsack_maximal_subsets)
from .compact import (brute_force_oracle, build_mlcpct, build_slcpct,
                      flow_value_at_assignment)
from .estimators import LoopDesigner, check_instance
from .generator import (GenerationConfig, ReferenceProfile, generate_instance,
                        load_reference_profiles, sample_locations,
                        synth_consumption)
from .geometry import NeighbourhoodGraph, build_neighbourhood_graph, distance_km
from .instance import (Actor, Instance, LegalParams, ScenarioSet, TimeGrid,
                       baseline_objective, validate_instance)
from .lp import LinearModel, SolveLimits, SolveResult, export_lp, relax, solve
from .metrics import KpiReport, compute_kpis, root_gap
from .solar import compute_production, solar_tile_irradiance
from .solution import DesignSolution, check_solution, extract_solution
from .tariffs import assign_prices, price_series, sell_price

__version__ = "0.1.0"

__all__ = [
    "Actor", "BendersConfig", "BendersCut", "BendersTrace", "DesignSolution",
    "GenerationConfig", "Instance", "KpiReport", "LegalParams", "LinearModel",
    "LoopCandidate", "LoopDesigner", "NeighbourhoodGraph", "ReferenceProfile",
    "ScenarioSet", "SolveLimits", "SolveResult", "TimeGrid", "assign_prices",
    "baseline_objective", "brute_force_oracle", "build_mlcol", "build_mlcpct",
    "build_neighbourhood_graph", "build_slcpct", "check_instance",
    "check_solution", "compute_kpis", "compute_production", "distance_km",
    "enumerate_maximal_cliques", "export_lp", "extract_solution",
    "flow_value_at_assignment", "generate_instance", "generate_loop_candidates",
    "knapsack_maximal_subsets", "load_reference_profiles", "price_series",
    "relax", "root_gap", "run_benders_ml", "run_benders_sl", "sample_locations",
    "sell_price", "solar_tile_irradiance", "solve", "solve_subproblem_ml",
    "solve_subproblem_sl", "synth_consumption", "validate_instance",
]
