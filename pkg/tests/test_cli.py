import csv
import json
import shutil
import subprocess
import sys

import pytest

from parcelcon.cli import main
from parcelcon.pipeline import (ExperimentConfig, PipelineError, PlannedInstance, dumps, plan_instance,
                                preset_config, read_json, run_matrix)

FILES = ("instance.json", "solution.json", "report.json", "report.csv", "savings.svg", "capacity.svg")


def test_config_defaults_match_base_scenario():
    c = ExperimentConfig()
    assert (c.container_size, c.n_commodities, c.total_volume) == (40, 1000, 10000)
    assert [tuple(p) for p in c.promises] == [(300, 0.5), (600, 0.5)]
    assert (c.max_intermediate, c.max_deviation, c.max_paths) == (7, 0.05, 20)
    assert c.gap == 1e-4


def test_config_round_trip(tmp_path):
    c = preset_config("desk", seed=9, link_structure="HS")
    assert ExperimentConfig.from_dict(json.loads(dumps(c.to_dict()))) == c
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"preset": "toy", "n_commodities": 12}))
    loaded = ExperimentConfig.load(p, {"seed": 3})
    assert loaded.n_commodities == 12 and loaded.seed == 3
    assert loaded.grid == preset_config("toy").grid


def test_config_unknown_key(tmp_path):
    with pytest.raises(KeyError, match="colour"):
        ExperimentConfig.from_dict({"colour": "blue"})
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"planner": {"gama": 0.5}}))
    assert main(["run", "--config", str(p), "--seed", "1", "--out-dir", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("cmd", ["gen-network", "gen-demand", "run", "matrix"])
def test_seed_is_mandatory_for_generation(cmd, capsys):
    with pytest.raises(SystemExit) as e:
        main([cmd, "--preset", "toy"])
    assert e.value.code == 2
    assert "--seed" in capsys.readouterr().err


def _staged(out, seed):
    common = ["--preset", "toy", "--out-dir", str(out)]
    assert main(["gen-network", "--seed", str(seed), *common]) == 0
    assert main(["gen-demand", "--seed", str(seed), *common]) == 0
    assert main(["plan-capacity", *common]) == 0
    assert main(["gen-paths", *common]) == 0
    assert main(["solve", *common]) == 0
    assert main(["report", *common]) == 0


def test_staged_commands_equal_single_run(tmp_path, capsys):
    _staged(tmp_path / "staged", 4)
    assert main(["run", "--preset", "toy", "--seed", "4", "--out-dir", str(tmp_path / "run")]) == 0
    for f in FILES:
        a = (tmp_path / "staged" / f).read_bytes()
        b = (tmp_path / "run" / f).read_bytes()
        assert a == b, f
    out = capsys.readouterr().out
    assert "transit_pct_improvement=" in out


def test_stage_files_round_trip(tmp_path):
    _staged(tmp_path, 2)
    d = read_json(tmp_path / "instance.json")
    inst = PlannedInstance.from_dict(d)
    again = inst.to_dict()
    assert {k: d[k] for k in again} == json.loads(dumps(again))


def test_solve_without_instance_fails(tmp_path, capsys):
    assert main(["solve", "--preset", "toy", "--out-dir", str(tmp_path)]) == 2
    assert "plan-capacity" in capsys.readouterr().err


def test_unreachable_promise_is_a_demand_error(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"preset": "toy", "promises": [[1, 1.0]]}))
    assert main(["run", "--config", str(p), "--seed", "1", "--out-dir", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "[demand]" in err and "k0" in err
    with pytest.raises(PipelineError) as e:
        plan_instance(preset_config("toy", seed=1, promises=[(1, 1.0)]))
    assert e.value.stage == "demand"


def test_baseline_only_run(tmp_path):
    assert main(["run", "--preset", "toy", "--seed", "2", "--baseline-only", "--out-dir", str(tmp_path)]) == 0
    sol = read_json(tmp_path / "solution.json")
    assert sol["containerized"] is None and sol["baseline"]["objective_parcel_min"] > 0


def test_progress_stream(tmp_path, capsys):
    assert main(["run", "--preset", "toy", "--seed", "2", "--progress", "--out-dir", str(tmp_path)]) == 0
    err = capsys.readouterr().err.splitlines()
    assert "node,bound,incumbent,gap,time" in err


def test_single_cell_matrix(tmp_path, capsys):
    code = main(["matrix", "--preset", "toy", "--seed", "1", "--structures", "HC2/noLH", "--patterns", "centric",
                 "--out-dir", str(tmp_path)])
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "matrix.csv")))
    assert len(rows) == 1
    assert rows[0]["structure"] == "HC2/noLH" and rows[0]["status"] == "ok"
    assert (tmp_path / "seed1" / "centric" / "HC2_noLH" / "solution.json").exists()


def test_full_matrix_rows_and_shared_commodities(tmp_path):
    rows, errors = run_matrix(preset_config("toy", seed=5), out_dir=tmp_path, baseline_only=True)
    assert errors == []
    assert len(rows) == 27
    assert {(r["pattern"], r["structure"]) for r in rows} == {
        (p, f"{l}/{h}") for p in ("uniform", "centric", "bipolar")
        for l in ("HS", "HC1", "HC2") for h in ("Default", "noLH", "noGH")}
    for pattern in ("uniform", "centric", "bipolar"):
        lists = set()
        for cell in (tmp_path / "seed5" / pattern).iterdir():
            inst = read_json(cell / "instance.json")
            lists.add(json.dumps([[c["id"], c["origin"], c["destination"], c["quantity"], c["service_promise_min"]]
                                  for c in inst["commodities"]]))
        assert len(lists) == 1


def test_matrix_exit_status_on_failed_cell(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"preset": "toy", "promises": [[1, 1.0]]}))
    code = main(["matrix", "--config", str(p), "--seed", "1", "--structures", "HS/Default", "HC1/Default",
                 "--patterns", "uniform", "--out-dir", str(tmp_path / "m")])
    assert code == 1
    rows = list(csv.DictReader(open(tmp_path / "m" / "matrix.csv")))
    assert len(rows) == 2 and all(r["status"].startswith("error") for r in rows)


def test_console_entry_point(tmp_path):
    exe = shutil.which("parcelcon")
    cmd = [exe] if exe else [sys.executable, "-m", "parcelcon.cli"]
    r = subprocess.run([*cmd, "gen-network", "--preset", "toy", "--seed", "1", "--out-dir", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    d = read_json(tmp_path / "network.json")
    assert d["config"]["seed"] == 1 and d["network"]
