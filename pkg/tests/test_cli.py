import csv
import json
from dataclasses import replace

import pytest

from lpwa_plan import config
from lpwa_plan.cli import ExperimentPreset, build_parser, main, run_preset


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _small(doc, **changes):
    return replace(doc, experiment=replace(doc.experiment, **changes))


def test_validate_preset(builtin, tmp_path):
    doc = _small(builtin("two_type_probe"), episodes=2000, z_grid_m=(200.0, 1500.0))
    assert run_preset(doc, "validate", tmp_path) == 0
    rows = _rows(tmp_path / "validate.csv")
    assert len(rows) == 4
    assert {"p_s_closed", "p_s_numeric", "p_s_mc", "mc_se"} <= set(rows[0])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == 0 and "validate.csv" in manifest["files"]
    assert json.loads((tmp_path / "validate.plot.json").read_text())["x"] == "z_m"


def test_tradeoff_preset(builtin, tmp_path):
    assert run_preset(builtin("density_tradeoff"), ExperimentPreset.Tradeoff, tmp_path) == 0
    rows = _rows(tmp_path / "tradeoff.csv")
    cost = [float(r["cost"]) for r in rows]
    ps = [float(r["P_s"]) for r in rows]
    assert all(b > a for a, b in zip(cost, cost[1:]))
    assert all(b >= a for a, b in zip(ps, ps[1:]))


def test_provision_preset(builtin, tmp_path):
    doc = _small(builtin("edge_tradeoff"), per_decade=16)
    assert run_preset(doc, "provision", tmp_path) == 0
    assert len(_rows(tmp_path / "provision_map.csv")) == 17 * 17
    result = json.loads((tmp_path / "manifest.json").read_text())["result"]
    assert result["feasible"] is True


def test_operate_preset(builtin, tmp_path):
    assert run_preset(builtin("two_type_equal"), "operate", tmp_path) == 0
    rows = _rows(tmp_path / "operate.csv")
    assert {r["curve"] for r in rows} == {"power", "replicas"}
    assert "P_s_type2" in rows[0]


def test_scale_preset(builtin, tmp_path):
    assert run_preset(builtin("scale_density"), "scale", tmp_path) == 0
    rows = _rows(tmp_path / "scale.csv")
    lam = [float(r["required_lambda_a"]) for r in rows]
    assert all(b >= a for a, b in zip(lam, lam[1:]))


def test_sweep_preset(builtin, tmp_path):
    doc = _small(builtin("reference"), sweep_path="type.1.parent_density_km2", sweep_values=(0.8, 1.6, 3.2))
    assert run_preset(doc, "sweep", tmp_path) == 0
    ps = [float(r["P_s"]) for r in _rows(tmp_path / "sweep.csv")]
    assert ps[0] > ps[1] > ps[2]
    assert run_preset(builtin("reference"), "sweep", tmp_path / "none") == 1


def test_monte_carlo_rejected_for_optimizers(builtin, tmp_path):
    assert run_preset(builtin("two_type_equal"), "operate", tmp_path, method="mc") == 1
    assert run_preset(builtin("reference"), "validate", tmp_path, method="bogus") == 1


def test_infeasible_exit_code(builtin, tmp_path):
    doc = _small(builtin("edge_tradeoff"), per_decade=4, target_success=0.999, W_max_hz=20e3)
    assert run_preset(doc, "provision", tmp_path) == 2
    doc = _small(builtin("two_type_equal"), P_o_req=1e-9, n_max=1)
    assert run_preset(doc, "operate", tmp_path / "op") == 2


def test_main_entry_point(tmp_path):
    scen = str(config.builtin_path("density_tradeoff"))
    assert main(["tradeoff", "--scenario", scen, "--out", str(tmp_path), "--workers", "2"]) == 0
    assert (tmp_path / "tradeoff.csv").exists()
    assert main(["tradeoff", "--scenario", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit):
        build_parser().parse_args(["nonsense", "--scenario", scen, "--out", "x"])


def test_builtin_name_accepted(tmp_path):
    assert main(["validate", "--scenario", "reference", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "manifest.json").exists()
