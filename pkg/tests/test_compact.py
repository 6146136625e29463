import pytest

from loopforge.compact import (brute_force_oracle, build_mlcpct, build_slcpct,
                               flow_value_at_assignment)
from loopforge.geometry import build_neighbourhood_graph
from loopforge.instance import baseline_objective
from loopforge.lp import OPTIMAL, solve
from loopforge.solution import ExtractionError, check_solution, extract_solution

from conftest import generated, pair_instance


def rel_diff(a, b):
    return abs(a - b) / max(1.0, abs(b))


def test_pair_forms_loop_with_full_transfer():
    inst = pair_instance(p=5.0, c=5.0)
    graph = build_neighbourhood_graph(inst)
    assert baseline_objective(inst) == pytest.approx(0.3505)
    model = build_slcpct(inst, graph)
    res = solve(model)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(0.0, abs=1e-9)
    sol = extract_solution("slcpct", model, res, inst, graph)
    assert sol.loop_assignment == [0, 0]
    assert sol.flows[(0, 1, 0, 0)] == pytest.approx(5.0)
    assert check_solution(inst, graph, sol) == []


def test_pair_out_of_range_stays_on_grid():
    inst = pair_instance(km_apart=5.0, d_leg=2.0)
    graph = build_neighbourhood_graph(inst)
    model = build_slcpct(inst, graph)
    res = solve(model)
    assert res.objective == pytest.approx(baseline_objective(inst))
    sol = extract_solution("slcpct", model, res, inst, graph)
    assert sol.flows == {}


def test_direct_consumers_only_yield_baseline():
    inst = pair_instance(p=0.0, c=5.0)
    graph = build_neighbourhood_graph(inst)
    res = solve(build_slcpct(inst, graph))
    assert res.objective == pytest.approx(baseline_objective(inst))


def test_oracle_tiny_cases():
    inst = pair_instance()
    graph = build_neighbourhood_graph(inst)
    # all four membership vectors enumerated: loop {0,1} wins at 0
    assert brute_force_oracle(inst, graph) == pytest.approx(0.0, abs=1e-9)
    # single actor: nothing to pair with
    single = generated(seed=11, n=1, steps=4)
    g1 = build_neighbourhood_graph(single)
    assert brute_force_oracle(single, g1) == pytest.approx(baseline_objective(single))


def test_oracle_size_cap():
    inst = generated(seed=12, n=9, steps=2)
    graph = build_neighbourhood_graph(inst)
    with pytest.raises(ValueError, match="n <= 8"):
        brute_force_oracle(inst, graph)
    inst7 = generated(seed=12, n=7, steps=2)
    with pytest.raises(ValueError, match="n <= 6"):
        brute_force_oracle(inst7, build_neighbourhood_graph(inst7), multi=True)


@pytest.mark.parametrize("seed", range(6))
def test_slcpct_matches_oracle(seed):
    from datetime import datetime
    inst = generated(seed=100 + seed, n=6, steps=8,
                     density_per_km2=[0.4, 1.5, 4.0][seed % 3],
                     distribution="clustered" if seed % 2 else "uniform",
                     start=datetime(2022, 1, 10, 6) if seed % 2
                     else datetime(2022, 6, 20, 5))
    graph = build_neighbourhood_graph(inst)
    res = solve(build_slcpct(inst, graph))
    oracle = brute_force_oracle(inst, graph)
    assert rel_diff(res.objective, oracle) < 1e-6


@pytest.mark.parametrize("seed", range(4))
def test_mlcpct_matches_partition_oracle(seed):
    from datetime import datetime
    inst = generated(seed=200 + seed, n=5, steps=8, density_per_km2=2.0,
                     start=datetime(2022, 6, 20, 5))
    graph = build_neighbourhood_graph(inst)
    res = solve(build_mlcpct(inst, graph))
    oracle = brute_force_oracle(inst, graph, multi=True)
    assert rel_diff(res.objective, oracle) < 1e-6


def test_mlcpct_equals_slcpct_for_two_actors():
    inst = pair_instance(p=4.0, c=7.0)
    graph = build_neighbourhood_graph(inst)
    sl = solve(build_slcpct(inst, graph)).objective
    ml = solve(build_mlcpct(inst, graph)).objective
    assert ml == pytest.approx(sl, abs=1e-9)


def test_two_distant_clusters_form_two_loops():
    # two producer/consumer pairs far apart: multi-loop captures both savings
    inst_a = pair_instance(p=5.0, c=5.0)
    from loopforge.instance import Instance
    from conftest import make_actor
    far = 1.0  # degrees latitude ~ 110 km away
    actors = inst_a.actors + [
        make_actor(2, 43.6 + far, 1.44, 3.0, [[0.0]], [[3.0]]),
        make_actor(3, 43.6 + far + 0.005, 1.44, 0.0, [[3.0]], [[0.0]]),
    ]
    inst = Instance(actors, inst_a.time_grid, inst_a.scenarios, inst_a.legal)
    graph = build_neighbourhood_graph(inst)
    res = solve(build_mlcpct(inst, graph))
    model = build_mlcpct(inst, graph)
    sol = extract_solution("mlcpct", model, solve(model), inst, graph)
    loops = sol.loops
    assert len(loops) == 2
    memberships = sorted(sorted(m) for m in loops.values())
    assert memberships == [[0, 1], [2, 3]]
    # objective equals the sum of per-cluster single-loop optima
    per_cluster = flow_value_at_assignment(inst, graph, [{0, 1}]) \
        + flow_value_at_assignment(inst, graph, [{2, 3}]) \
        - baseline_objective(inst)
    assert res.objective == pytest.approx(per_cluster, abs=1e-6)


def test_max_loops_validation():
    inst = pair_instance()
    graph = build_neighbourhood_graph(inst)
    with pytest.raises(ValueError, match="max_loops"):
        build_mlcpct(inst, graph, max_loops=0)


def test_symmetry_breaking_objective_invariant():
    for seed in (301, 302):
        inst = generated(seed=seed, n=5, steps=4, density_per_km2=2.0)
        graph = build_neighbourhood_graph(inst)
        with_sb = build_mlcpct(inst, graph)
        without = build_mlcpct(inst, graph)
        without.constraints = [c for c in without.constraints
                               if not c.name.startswith("symbreak")]
        a = solve(with_sb).objective
        b = solve(without).objective
        assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


def test_surplus_tie_is_outcome_neutral():
    # pair surplus exactly zero: both indicator values cap member sales at 0,
    # so the optimum and flows match the oracle either way
    inst = pair_instance(p=5.0, c=5.0)
    graph = build_neighbourhood_graph(inst)
    model = build_slcpct(inst, graph)
    res = solve(model)
    sol = extract_solution("slcpct", model, res, inst, graph)
    assert res.objective == pytest.approx(0.0, abs=1e-9)
    assert float(sol.grid_sell.sum()) == pytest.approx(0.0, abs=1e-7)


def test_extract_rejects_non_optimal():
    inst = pair_instance()
    graph = build_neighbourhood_graph(inst)
    model = build_slcpct(inst, graph)
    res = solve(model)
    res.status = "TimeLimit"
    with pytest.raises(ExtractionError):
        extract_solution("slcpct", model, res, inst, graph)


def test_extract_rejects_fractional_binaries():
    inst = pair_instance()
    graph = build_neighbourhood_graph(inst)
    model = build_slcpct(inst, graph)
    res = solve(model)
    res.values[model.var(("x", 0))] = 0.5
    with pytest.raises(ExtractionError, match="fractional"):
        extract_solution("slcpct", model, res, inst, graph)


def test_solution_checks_cover_redundant_inflow_cap():
    inst = generated(seed=400, n=5, steps=6, density_per_km2=2.0)
    graph = build_neighbourhood_graph(inst)
    model = build_slcpct(inst, graph)
    res = solve(model)
    sol = extract_solution("slcpct", model, res, inst, graph)
    assert check_solution(inst, graph, sol) == []
    # poke an inconsistency and see it flagged
    sol.grid_buy[0, 0, 0] += 1.0
    assert any("Kirchhoff" in p for p in check_solution(inst, graph, sol))


def test_exclusion_semantics_in_optimum():
    inst = generated(seed=401, n=6, steps=6, density_per_km2=2.0)
    graph = build_neighbourhood_graph(inst)
    model = build_slcpct(inst, graph)
    res = solve(model)
    sol = extract_solution("slcpct", model, res, inst, graph)
    for (i, j, s, t), v in sol.flows.items():
        assert sol.loop_assignment[i] == sol.loop_assignment[j] != None  # noqa: E711
        assert v <= min(inst.production_net[i, s, t],
                        inst.consumption_net[j, s, t]) + 1e-6


def test_baseline_equals_flow_lp_with_empty_assignment():
    inst = generated(seed=402, n=5, steps=24, density_per_km2=1.0)
    graph = build_neighbourhood_graph(inst)
    value = flow_value_at_assignment(inst, graph, [])
    assert value == pytest.approx(baseline_objective(inst), abs=1e-7)
