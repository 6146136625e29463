import math
import re

import numpy as np
import pytest

from loopforge.lp import (BINARY, EQUAL, GREATER_EQUAL, INFEASIBLE, LESS_EQUAL,
                          OPTIMAL, UNBOUNDED, LinearModel, ModelError,
                          SolveLimits, export_lp, relax, solve)


def one_var_model():
    m = LinearModel("one_var")
    x = m.add_var("x")
    m.add_objective(x, 1.0)
    m.add_constraint("floor", [(x, 1.0)], GREATER_EQUAL, 3.0)
    return m


def test_min_x_with_floor_and_dual():
    res = solve(one_var_model())
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(3.0)
    assert res.dual_by_name["floor"] == pytest.approx(1.0, abs=1e-9)


def test_bounded_maximisation_shapes():
    m = LinearModel()
    x = m.add_var("x", ub=5.0)
    m.add_objective(x, -1.0)
    res = solve(m)
    assert res.status == OPTIMAL
    assert res.values[x] == pytest.approx(5.0)
    m2 = LinearModel()
    b = m2.add_var("b", kind=BINARY)
    m2.add_objective(b, -1.0)
    res2 = solve(m2)
    assert res2.values[b] == pytest.approx(1.0)


def test_unbounded_and_infeasible_status():
    m = LinearModel()
    x = m.add_var("x", lb=-math.inf)
    m.add_objective(x, 1.0)
    assert solve(m).status == UNBOUNDED
    m2 = LinearModel()
    x2 = m2.add_var("x")
    m2.add_constraint("lo", [(x2, 1.0)], GREATER_EQUAL, 2.0)
    m2.add_constraint("hi", [(x2, 1.0)], LESS_EQUAL, 1.0)
    assert solve(m2).status == INFEASIBLE


def test_build_errors_before_solve():
    m = LinearModel()
    m.add_var("x")
    with pytest.raises(ModelError):
        m.add_var("x")
    with pytest.raises(ModelError):
        m.add_constraint("c", [(5, 1.0)], LESS_EQUAL, 1.0)
    with pytest.raises(ModelError):
        m.add_constraint("c", [(0, 1.0)], "<>", 1.0)
    m.add_constraint("c", [(0, 1.0)], LESS_EQUAL, 1.0)
    with pytest.raises(ModelError):
        m.add_constraint("c", [(0, 1.0)], LESS_EQUAL, 2.0)


def test_duals_satisfy_complementary_slackness():
    # min 2x + 3y  s.t. x + y >= 4, x - y <= 1, x,y >= 0
    m = LinearModel()
    x = m.add_var("x")
    y = m.add_var("y")
    m.add_objective(x, 2.0)
    m.add_objective(y, 3.0)
    m.add_constraint("cover", [(x, 1.0), (y, 1.0)], GREATER_EQUAL, 4.0)
    m.add_constraint("gap", [(x, 1.0), (y, -1.0)], LESS_EQUAL, 1.0)
    res = solve(m)
    assert res.status == OPTIMAL
    # dual feasibility: reduced costs nonnegative at optimum of a min problem
    duals = res.duals
    for j, cost in enumerate([2.0, 3.0]):
        activity = sum(duals[r] * coef
                       for r, con in enumerate(m.constraints)
                       for col, coef in con.coeffs if col == j)
        rc = cost - activity
        assert rc >= -1e-7
        if res.values[j] > 1e-9:
            assert abs(rc) <= 1e-7
    # complementary slackness on rows
    for r, con in enumerate(m.constraints):
        lhs = sum(coef * res.values[col] for col, coef in con.coeffs)
        slack = con.rhs - lhs
        assert abs(duals[r] * slack) <= 1e-6


def test_relax_keeps_bounds_and_structure():
    m = LinearModel()
    b = m.add_var("b", kind=BINARY)
    x = m.add_var("x", lb=1.0, ub=4.0)
    m.add_objective(b, 1.0)
    m.add_constraint("link", [(b, 1.0), (x, 1.0)], LESS_EQUAL, 4.0)
    r = relax(m)
    assert r.n_binary == 0
    assert r.var_lb == [0.0, 1.0]
    assert r.var_ub == [1.0, 4.0]
    assert len(r.constraints) == 1
    # relaxation of an integral model is structurally identical
    plain = LinearModel()
    plain.add_var("x", ub=2.0)
    assert relax(plain).var_ub == [2.0]


def test_relaxation_bounds_minimisation():
    # knapsack-ish: relaxation must not be worse than the MILP
    rng = np.random.default_rng(1)
    for _ in range(10):
        m = LinearModel()
        cols = [m.add_var(("b", k), kind=BINARY) for k in range(6)]
        weights = rng.uniform(1, 4, 6)
        values = rng.uniform(0.1, 2.0, 6)
        for k, col in enumerate(cols):
            m.add_objective(col, -values[k])
        m.add_constraint("cap", [(col, weights[k]) for k, col in enumerate(cols)],
                         LESS_EQUAL, 6.0)
        milp_obj = solve(m).objective
        lp_obj = solve(relax(m)).objective
        assert lp_obj <= milp_obj + 1e-9


def test_milp_respects_time_limit_status():
    m = LinearModel()
    x = m.add_var("x", kind=BINARY)
    m.add_objective(x, -1.0)
    res = solve(m, SolveLimits(time_limit=30.0))
    assert res.status == OPTIMAL  # trivially fast, limit not hit


def test_determinism():
    m = one_var_model()
    r1 = solve(m)
    r2 = solve(m)
    assert r1.objective == r2.objective
    assert np.array_equal(r1.values, r2.values)


# -- LP file export -----------------------------------------------------------

def small_model():
    m = LinearModel("export_me")
    x = m.add_var(("x", 0), ub=2.5)
    b = m.add_var(("flag",), kind=BINARY)
    free = m.add_var("free", lb=-math.inf)
    m.add_objective(x, 1.5)
    m.add_objective(b, -1.0)
    m.add_objective(free, 2.0)
    m.add_constraint("mix", [(x, 1.0), (b, -2.0)], GREATER_EQUAL, -1.0)
    m.add_constraint("tie", [(x, 1.0), (free, 1.0)], EQUAL, 1.0)
    return m


def test_export_contains_expected_sections(tmp_path):
    path = tmp_path / "m.lp"
    export_lp(small_model(), path)
    text = path.read_text()
    assert text.startswith("\\ export_me\nMinimize\n obj:")
    assert "Subject To" in text
    assert " mix: x_0 - 2 flag >= -1" in text
    assert "Bounds" in text
    assert " 0 <= x_0 <= 2.5" in text
    assert " free free" in text
    assert "Binaries\n flag" in text
    assert text.rstrip().endswith("End")


def test_export_deterministic(tmp_path):
    p1, p2 = tmp_path / "a.lp", tmp_path / "b.lp"
    export_lp(small_model(), p1)
    export_lp(small_model(), p2)
    assert p1.read_bytes() == p2.read_bytes()


def _parse_lp(text):
    """Minimal CPLEX-LP reader used as the re-import oracle for the writer."""
    section = None
    objective, constraints, bounds, binaries = {}, [], {}, set()

    def parse_terms(expr):
        terms = {}
        for sign, coef, name in re.findall(
                r"([+-]?)\s*(\d+(?:\.\d+)?(?:e-?\d+)?)?\s*([A-Za-z_][\w]*)", expr):
            value = float(coef) if coef else 1.0
            if sign == "-":
                value = -value
            terms[name] = terms.get(name, 0.0) + value
        return terms

    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            objective = parse_terms(line.split(":", 1)[1])
        elif section == "subject to":
            name, body = line.split(":", 1)
            match = re.search(r"(<=|>=|=)\s*([-\d.e+]+)\s*$", body)
            sense, rhs = match.group(1), float(match.group(2))
            constraints.append((name.strip(), parse_terms(body[:match.start()]),
                                sense, rhs))
        elif section == "bounds":
            if line.endswith(" free"):
                bounds[line.split()[0]] = (-math.inf, math.inf)
            elif "<=" in line:
                lo, name, hi = re.match(
                    r"([-\d.e+]+)\s*<=\s*(\w+)\s*<=\s*([-\d.e+]+)", line).groups()
                bounds[name] = (float(lo), float(hi))
            elif ">=" in line:
                name, lo = re.match(r"(\w+)\s*>=\s*([-\d.e+]+)", line).groups()
                bounds[name] = (float(lo), math.inf)
        elif section == "binaries":
            binaries.add(line)
    return objective, constraints, bounds, binaries


def test_export_roundtrip_resolves_to_same_objective(tmp_path):
    model = small_model()
    direct = solve(model)
    path = tmp_path / "m.lp"
    export_lp(model, path)
    objective, constraints, bounds, binaries = _parse_lp(path.read_text())
    rebuilt = LinearModel("reimported")
    names = {}
    for j, name in enumerate(model.var_names):
        lb, ub = bounds.get(name, (0.0, math.inf))
        kind = BINARY if name in binaries else "continuous"
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        names[name] = rebuilt.add_var(name, lb=lb, ub=ub, kind=kind)
    for name, coef in objective.items():
        rebuilt.add_objective(names[name], coef)
    sense_map = {"<=": LESS_EQUAL, ">=": GREATER_EQUAL, "=": EQUAL}
    for cname, terms, sense, rhs in constraints:
        rebuilt.add_constraint(cname, [(names[n], c) for n, c in terms.items()],
                               sense_map[sense], rhs)
    back = solve(rebuilt)
    assert back.status == OPTIMAL
    assert back.objective == pytest.approx(direct.objective, abs=1e-6)
