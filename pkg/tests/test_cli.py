import json
from pathlib import Path

import numpy as np
import pytest

from wavesim.cli import RunConfig, load_config, main, make_plan, read_plan
from wavesim.planner import ProductPlan, TruncationPlan

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
EX1 = CONFIGS / "example1.json"
EX2 = CONFIGS / "example2.json"


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["plan", "--config", str(EX1), "--out", str(d / "plan1.json")]) == 0
    return d


def _write_config(path, **changes):
    doc = json.loads(EX1.read_text())
    doc.update(changes)
    path.write_text(json.dumps(doc))
    return path


def test_plan_counts(work):
    doc = json.loads((work / "plan1.json").read_text())
    p = doc["plan"]
    assert p["N0"] > 1 and p["N"] > 1 and all(m > 1 for m in p["M"])
    assert set(p["constants"]) >= {"A", "B", "A1", "B1", "R0"}


def test_plan_roundtrip(work):
    cfg = load_config(EX1)
    _, plan, _ = read_plan(work / "plan1.json", cfg)
    fresh = TruncationPlan.from_dict(make_plan(cfg)["plan"])
    assert plan == fresh and plan.constants == fresh.constants
    assert plan.variance_budget == fresh.variance_budget


def test_product_plan_roundtrip(tmp_path):
    out = tmp_path / "p2.json"
    assert main(["plan", "--config", str(EX2), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    pp = ProductPlan.from_dict(doc["plan"])
    assert pp.as_dict() == doc["plan"]


def test_n1_rejected(tmp_path, capsys):
    cfg = _write_config(tmp_path / "c.json", density={"family": "inverse_poly", "n": 1})
    assert main(["plan", "--config", str(cfg), "--out", str(tmp_path / "p.json")]) == 2
    assert not (tmp_path / "p.json").exists()


@pytest.mark.parametrize("delta", [0.0, 1.0, 1.5, -0.1])
def test_delta_rejected(tmp_path, delta):
    cfg = _write_config(tmp_path / "c.json", delta=delta)
    assert main(["plan", "--config", str(cfg), "--out", str(tmp_path / "p.json")]) == 2


def test_config_validation():
    base = json.loads(EX1.read_text())
    for bad in ({"grid_points": 100}, {"process": "sum"}, {"s": 0}, {"p": 1}):
        with pytest.raises(ValueError):
            RunConfig.from_dict({**base, **bad})
    prod = {**base, "process": "product"}
    with pytest.raises(ValueError, match="density2"):
        RunConfig.from_dict(prod)


def test_simulate_deterministic(work):
    args = ["simulate", "--config", str(EX1), "--plan", str(work / "plan1.json"),
            "--cache-dir", str(work / "cache")]
    assert main(args + ["--out", str(work / "a.csv")]) == 0
    assert main(args + ["--out", str(work / "b.csv")]) == 0
    a, b = (work / "a.csv").read_bytes(), (work / "b.csv").read_bytes()
    assert a == b
    lines = a.decode().splitlines()
    assert lines[0].startswith("# seed=20240601 plan_hash=")
    assert lines[1] == "t,value"
    assert len(lines) - 2 == 512
    assert main(args + ["--seed", "5", "--out", str(work / "c.csv")]) == 0
    assert (work / "c.csv").read_bytes() != a


def test_emit_base_square(work):
    out = work / "base.csv"
    assert main(["simulate", "--config", str(EX1), "--plan", str(work / "plan1.json"),
                 "--out", str(out), "--emit-base", "--cache-dir", str(work / "cache")]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=2)
    assert data.shape == (512, 3)
    # 17 significant digits round-trip exactly, so the square is exact
    assert np.array_equal(data[:, 1], data[:, 2] ** 2)


def test_hash_mismatch(work, tmp_path):
    cfg = _write_config(tmp_path / "c.json", epsilon=0.4)
    rc = main(["simulate", "--config", str(cfg), "--plan", str(work / "plan1.json"),
               "--out", str(tmp_path / "x.csv")])
    assert rc == 3
    # non-planning fields do not change the hash
    cfg2 = _write_config(tmp_path / "c2.json", replications=7)
    assert load_config(cfg2).config_hash() == load_config(EX1).config_hash()


def test_verify_example1(work):
    out = work / "report.json"
    rc = main(["verify", "--config", str(EX1), "--plan", str(work / "plan1.json"),
               "--out", str(out), "--cache-dir", str(work / "cache")])
    rep = json.loads(out.read_text())
    assert rc == 0, rep["checks"]
    assert rep["passed"] and rep["replications"] == 200
    assert rep["inputs"]["config_hash"] == load_config(EX1).config_hash()


def test_verify_tiny_plan_fails(work, tmp_path, capsys):
    doc = json.loads((work / "plan1.json").read_text())
    doc["plan"].update({"N0": 2, "N": 2, "M": [2, 2]})
    plan = tmp_path / "tiny.json"
    plan.write_text(json.dumps(doc))
    cfg = _write_config(tmp_path / "c.json", replications=20, covariance_paths=0)
    out = tmp_path / "r.json"
    assert main(["verify", "--config", str(cfg), "--plan", str(plan), "--out", str(out)]) == 4
    assert "variance_deficit" in capsys.readouterr().err
    assert json.loads(out.read_text())["checks"]["variance_deficit"] is False


def test_verify_zero_replications(work, tmp_path):
    cfg = _write_config(tmp_path / "c.json", replications=0, covariance_paths=0)
    out = tmp_path / "r.json"
    rc = main(["verify", "--config", str(cfg), "--plan", str(work / "plan1.json"),
               "--out", str(out), "--cache-dir", str(work / "cache")])
    rep = json.loads(out.read_text())
    assert rc == 0
    assert "reliability" not in rep["checks"]
    assert rep["details"]["reliability"].startswith("skipped")


def test_constants(capsys):
    assert main(["constants", "--config", str(EX1)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert all(c["finite"] for c in out[0]["admissibility"].values())
    assert out[0]["constants"]["R0"] > 0
