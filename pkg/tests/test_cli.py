import json

from loopforge.cli import main
from loopforge.instance import Instance
from loopforge.solution import DesignSolution


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip()
    payload = json.loads(out.splitlines()[-1]) if out else {}
    return code, payload


def make_instance_file(capsys, tmp_path, name="inst.json", **extra):
    path = tmp_path / name
    args = ["generate", "--seed", "7", "--n", "6", "--density", "1.5",
            "--days", "0.5", "--start", "2022-06-01T05:00:00",
            "--out", str(path)]
    for key, value in extra.items():
        args += [f"--{key}", str(value)]
    code, payload = run_cli(capsys, *args)
    assert code == 0, payload
    return path


def test_generate_is_deterministic(capsys, tmp_path):
    a = make_instance_file(capsys, tmp_path, "a.json")
    b = make_instance_file(capsys, tmp_path, "b.json")
    assert a.read_bytes() == b.read_bytes()


def test_generate_requires_seed(capsys, tmp_path):
    code, payload = run_cli(capsys, "generate", "--n", "4",
                            "--out", str(tmp_path / "x.json"))
    assert code == 2
    assert "seed" in payload["error"]["message"]


def test_solve_writes_solution_and_kpis(capsys, tmp_path):
    instance_path = make_instance_file(capsys, tmp_path)
    sol_path = tmp_path / "sol.json"
    kpi_path = tmp_path / "kpi.json"
    code, payload = run_cli(capsys, "solve", "--model", "slcpct",
                            "--instance", str(instance_path),
                            "--out", str(sol_path), "--kpi-out", str(kpi_path))
    assert code == 0
    assert payload["status"] == "Optimal"
    assert sol_path.exists() and kpi_path.exists()
    solution = DesignSolution.from_json(sol_path)
    assert solution.model_kind == "slcpct"
    assert payload["objective"] <= payload["baseline_objective"] + 1e-9


def test_solve_cross_model_equivalence(capsys, tmp_path):
    instance_path = make_instance_file(capsys, tmp_path)
    _, compact = run_cli(capsys, "solve", "--model", "slcpct",
                         "--instance", str(instance_path))
    _, decomposed = run_cli(capsys, "solve", "--model", "slext",
                            "--instance", str(instance_path))
    rel = abs(compact["objective"] - decomposed["objective"]) \
        / max(1.0, abs(compact["objective"]))
    assert rel < 1e-4


def test_report_recomputes_kpis(capsys, tmp_path):
    instance_path = make_instance_file(capsys, tmp_path)
    sol_path = tmp_path / "sol.json"
    run_cli(capsys, "solve", "--model", "mlcol", "--instance", str(instance_path),
            "--out", str(sol_path))
    code, payload = run_cli(capsys, "report", "--instance", str(instance_path),
                            "--solution", str(sol_path),
                            "--out", str(tmp_path / "kpi.json"))
    assert code == 0
    assert "n_loops" in payload
    assert (tmp_path / "kpi.json").exists()


def test_export_lp(capsys, tmp_path):
    instance_path = make_instance_file(capsys, tmp_path)
    lp_path = tmp_path / "model.lp"
    code, payload = run_cli(capsys, "export-lp", "--model", "slcpct",
                            "--instance", str(instance_path),
                            "--out", str(lp_path))
    assert code == 0
    text = lp_path.read_text()
    assert text.startswith("\\ slcpct\nMinimize")
    assert payload["binaries"] > 0
    # exporting again is byte-identical
    lp2 = tmp_path / "model2.lp"
    run_cli(capsys, "export-lp", "--model", "slcpct",
            "--instance", str(instance_path), "--out", str(lp2))
    assert lp_path.read_bytes() == lp2.read_bytes()


def test_unknown_model_is_input_error(capsys, tmp_path):
    instance_path = make_instance_file(capsys, tmp_path)
    code, payload = run_cli(capsys, "solve", "--model", "slcpct",
                            "--instance", str(tmp_path / "missing.json"))
    assert code in (1, 2)
    assert "error" in payload


def test_bench_row_count(capsys, tmp_path):
    out = tmp_path / "bench.csv"
    code, payload = run_cli(capsys, "bench", "--models", "slcpct,slext",
                            "--replicates", "2", "--seed", "3",
                            "--n-actors", "5", "--horizon-days", "0.25,0.5",
                            "--out", str(out))
    assert code == 0
    assert payload["rows"] == 2 * 2 * 2
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 8
    header = lines[0].split(",")
    for column in ("configuration", "replicate", "model", "objective",
                   "wall_time_s", "root_gap_percent"):
        assert column in header


def test_bench_with_root_gap(capsys, tmp_path):
    out = tmp_path / "gaps.csv"
    code, payload = run_cli(capsys, "bench", "--models", "slcpct",
                            "--replicates", "1", "--seed", "5",
                            "--n-actors", "5", "--horizon-days", "0.25",
                            "--root-gap", "--out", str(out))
    assert code == 0
    import csv as csvmod
    with open(out) as fh:
        rows = list(csvmod.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["root_gap_percent"] != ""
    assert float(rows[0]["root_gap_percent"]) >= -1e-6


def test_config_file_defaults_with_flag_override(capsys, tmp_path):
    config = tmp_path / "gen.json"
    config.write_text(json.dumps({"seed": 7, "n": 6, "density": 1.5,
                                  "days": 0.5, "start": "2022-06-01T05:00:00"}))
    path_a = tmp_path / "a.json"
    code, _ = run_cli(capsys, "generate", "--config", str(config),
                      "--out", str(path_a))
    assert code == 0
    baseline = make_instance_file(capsys, tmp_path, "b.json")
    assert path_a.read_bytes() == baseline.read_bytes()
    # flag overrides the file value
    path_c = tmp_path / "c.json"
    run_cli(capsys, "generate", "--config", str(config), "--n", "4",
            "--out", str(path_c))
    assert Instance.from_json(path_c).n_actors == 4
