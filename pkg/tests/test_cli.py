import csv
import json
import math
import subprocess
import sys

import pytest

from pathparse.cli import main


def run(tmp_path, command, doc, *extra):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def strip_created(doc):
    if isinstance(doc, dict):
        return {k: strip_created(v) for k, v in doc.items() if k != "created"}
    if isinstance(doc, list):
        return [strip_created(v) for v in doc]
    return doc


def test_propagate_uniform_conditional(tmp_path):
    code, out = run(tmp_path, "propagate", {"lattice": {"num_slices": 2, "num_sites": 5}})
    assert code == 0
    rows = list(csv.DictReader((out / "conditional.csv").open()))
    assert len(rows) == 5
    assert all(float(r["probability"]) == pytest.approx(0.2) for r in rows)
    doc = json.loads((out / "probability.json").read_text())
    assert doc["meta"]["command"] == "propagate"


def test_propagate_severed(tmp_path):
    blocked = [[1, j] for j in range(5)]
    code, out = run(tmp_path, "propagate", {"lattice": {"num_slices": 3, "num_sites": 5, "blocked": blocked}})
    assert code == 0
    doc = json.loads((out / "probability.json").read_text())
    assert doc["probability"]["joint"] == 0.0
    assert "severed" in doc["probability"]["note"]


def test_malformed_config_exits_2(tmp_path, capsys):
    code, _ = run(tmp_path, "propagate", {"lattice": {"num_slices": 1, "num_sites": 5}})
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_over_budget_reports_count(tmp_path, capsys):
    doc = {"lattice": {"num_slices": 6, "num_sites": 9, "path_budget": 1000}}
    code, _ = run(tmp_path, "propagate", doc)
    assert code == 2
    assert str(9**4) in capsys.readouterr().err


def test_parse_explicit_actions(tmp_path):
    code, out = run(tmp_path, "parse", {"explicit_actions": [0.0, 0.0, math.pi / 2]})
    assert code == 0
    part = json.loads((out / "partition.json").read_text())["partition"]
    assert part["strict_valid"]
    assert part["num_sets"] == 2
    assert sum(s["F"] for s in part["sets"]) == pytest.approx(5.0, abs=1e-12)


def test_parse_is_reproducible(tmp_path):
    doc = {"explicit_actions": [0.1 * i * i for i in range(30)], "solver": {"strategy": "annealing", "move_budget": 2000}}
    outs = []
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        outs.append(run(tmp_path / name, "parse", doc, "--seed", "5")[1])
    a, b = outs
    da = strip_created(json.loads((a / "partition.json").read_text()))
    db = strip_created(json.loads((b / "partition.json").read_text()))
    assert da == db


def test_oracle_refuses_eleven_paths(tmp_path, capsys):
    code, _ = run(tmp_path, "oracle", {"explicit_actions": [0.0] * 11})
    assert code == 2
    assert "B(11) = 678570" in capsys.readouterr().err


def test_oracle_lists_partitions(tmp_path):
    code, out = run(tmp_path, "oracle", {"explicit_actions": [0.0, 0.0, math.pi / 2]})
    assert code == 0
    assert json.loads((out / "oracle.json").read_text())["num_valid"] == 2


def test_reconstruct_members(tmp_path):
    doc = {"lattice": {"num_slices": 3, "num_sites": 5}, "reconstruct": {"members": [0, 1, 2, 3, 4]}}
    code, out = run(tmp_path, "reconstruct", doc)
    assert code == 0
    fields = json.loads((out / "fields.json").read_text())["fields"]
    assert fields[0]["phase_front"]["locus_rows"] == [1]
    assert (out / "field_000.csv").exists()


def test_reconstruct_rejects_explicit_actions(tmp_path):
    code, _ = run(tmp_path, "reconstruct", {"explicit_actions": [0.0]})
    assert code == 2


def scenario_dir(out):
    (d,) = [p for p in out.iterdir() if p.is_dir()]
    return d


def test_triple_slit_scenario_files(tmp_path):
    doc = {"scenario": {"kind": "triple_slit", "num_slices": 5, "num_sites": 9, "slit_sites": [1, 4, 7]}}
    code, out = run(tmp_path, "scenario", doc)
    assert code == 0
    d = scenario_dir(out)
    manifest = json.loads((d / "manifest.json").read_text())
    assert "sorkin.csv" in manifest["files"]
    rows = list(csv.DictReader((d / "sorkin.csv").open()))
    assert "max_abs_sorkin" in rows[0]
    assert abs(float(rows[0]["max_abs_sorkin"])) <= 1e-9


def test_double_slit_fringe_csv_symmetric(tmp_path):
    doc = {"scenario": {"kind": "double_slit", "num_slices": 5, "num_sites": 9, "slit_sites": [2, 6]}}
    code, out = run(tmp_path, "scenario", doc, "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader((scenario_dir(out) / "fringe.csv").open()))
    p = [float(r["probability"]) for r in rows]
    assert p == pytest.approx(p[::-1], abs=1e-10)


def test_free_exchange_flags_mid_slice(tmp_path):
    doc = {"scenario": {"kind": "free_exchange", "num_slices": 3, "num_sites": 5}}
    code, out = run(tmp_path, "scenario", doc)
    assert code == 0
    rows = list(csv.DictReader((scenario_dir(out) / "geometric_000.csv").open()))
    flagged = {int(r["slice"]) for r in rows if r["locus"] == "1"}
    assert flagged == {1}


def test_unknown_keys_are_rejected(tmp_path):
    code, _ = run(tmp_path, "parse", {"explicit_actions": [0.0], "solver": {"bogus": 1}})
    assert code == 2


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"explicit_actions": [0.0, 1.0]}))
    proc = subprocess.run(
        [sys.executable, "-m", "pathparse", "propagate", "--config", str(cfg), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
