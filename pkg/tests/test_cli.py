import json

import numpy as np
import pytest

from levy_extract.cli import main
from levy_extract.drift_estimator import load_field
from levy_extract.flows import load_model
from levy_extract.simulator import load_dataset


def _sim(tmp_path, name="d.csv", *extra):
    path = tmp_path / name
    code = main(["simulate", "--system", "ex1", "--n", "300", "--grid-points", "5", "-o", str(path),
                 *extra])
    assert code == 0
    return path


def _report(capsys):
    return json.loads(capsys.readouterr().out)


def test_simulate_and_estimate_levy(tmp_path, capsys):
    path = _sim(tmp_path)
    ds = load_dataset(path)
    assert len(ds) == 1500
    assert json.loads((tmp_path / "d.csv.json").read_text())["seed"] == 0
    out = tmp_path / "levy.json"
    assert main(["estimate-levy", str(path), "-o", str(out)]) == 0
    printed = _report(capsys)
    assert printed == json.loads(out.read_text())
    assert 1.2 < printed["alpha_hat"] < 1.8
    assert printed["config"]["dataset"] == str(path)


def test_per_z(tmp_path, capsys):
    path = _sim(tmp_path)
    assert main(["estimate-levy", str(path), "--per-z"]) == 0
    assert len(_report(capsys)["per_z"]) == 5


@pytest.mark.parametrize("argv", [
    ["simulate", "--system", "ex1"],
    ["simulate", "--system", "nonsense", "-o", "x.csv"],
    ["simulate", "--system", "poly", "-o", "x.csv"],
    ["simulate", "--system", "ex2", "--dim", "1", "-o", "x.csv"],
    ["simulate", "--system", "ex1", "--n", "0", "-o", "x.csv"],
    ["estimate-drift", "d.csv", "--epsilon", "0", "-o", "f.csv"],
    ["estimate-drift", "d.csv", "--epsilon", "-1", "-o", "f.csv"],
    ["estimate-drift", "d.csv"],
    ["frobnicate"],
    [],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_computation_errors(tmp_path, capsys):
    one = tmp_path / "one.csv"
    one.write_text("# t_star=0.001,dim=1\nz_1,x_1\n0,0.5\n")
    assert main(["estimate-levy", str(one)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "EstimationError"
    assert "fewer than 2 usable records" in err["message"]
    assert main(["estimate-levy", str(tmp_path / "missing.csv")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("# t_star=0.001,dim=1\nz_1,x_1\n0,0.5\n0,oops\n")
    assert main(["estimate-levy", str(bad)]) == 1
    last = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(last)["error"] == "ParseError"
    assert "line 4" in json.loads(last)["message"]


def test_seed_determinism_and_env(tmp_path, monkeypatch):
    a = _sim(tmp_path, "a.csv", "--seed", "4")
    b = _sim(tmp_path, "b.csv", "--seed", "4", "--threads", "1")
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("LEVY_EXTRACT_SEED", "4")
    c = _sim(tmp_path, "c.csv")
    assert c.read_bytes() == a.read_bytes()
    d = _sim(tmp_path, "d.csv", "--seed", "5")
    assert d.read_bytes() != a.read_bytes()


def test_config_precedence(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"seed": 9, "simulate": {"n": 50, "system": "ex1"}}))
    out = tmp_path / "x.csv"
    assert main(["simulate", "--config", str(conf), "--grid-points", "2", "-o", str(out)]) == 0
    ds = load_dataset(out)
    assert len(ds) == 100 and ds.metadata["seed"] == 9
    assert main(["simulate", "--config", str(conf), "--grid-points", "2", "--n", "7",
                 "--seed", "1", "-o", str(out)]) == 0
    ds = load_dataset(out)
    assert len(ds) == 14 and ds.metadata["seed"] == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["simulate", "--config", str(broken), "--system", "ex1", "-o", str(out)]) == 2


def test_estimate_drift_direct_with_plot(tmp_path, capsys):
    path = _sim(tmp_path)
    out, svg = tmp_path / "f.csv", tmp_path / "f.svg"
    assert main(["estimate-drift", str(path), "--epsilon", "0.3", "--system", "ex1",
                 "--plot", str(svg), "-o", str(out)]) == 0
    rep = _report(capsys)
    assert rep["points"] == 5 and rep["epsilon"] == 0.3 and "rmse" in rep
    fld = load_field(out)
    assert fld.method_tag == "direct" and len(fld) == 5
    assert "<svg" in svg.read_text()
    table = np.loadtxt(str(svg) + ".csv", delimiter=",", skiprows=1)
    assert table.shape == (5, 3)


def test_estimate_drift_density_and_train_flow(tmp_path, capsys):
    path = _sim(tmp_path)
    out, models = tmp_path / "f.csv", tmp_path / "models"
    assert main(["estimate-drift", str(path), "--method", "density", "--epsilon", "0.3",
                 "--points", "2", "--epochs", "2", "--model-dir", str(models), "-o", str(out)]) == 0
    fld = load_field(out)
    assert fld.method_tag == "density" and len(fld) == 2
    assert np.all(np.isfinite(fld.values))
    assert len(list(models.glob("flow_*.json"))) == 2
    capsys.readouterr()
    flow, hist = tmp_path / "m.json", tmp_path / "h.csv"
    assert main(["train-flow", str(path), "--z", "0.0", "--epsilon", "0.3", "--epochs", "3",
                 "--history", str(hist), "-o", str(flow)]) == 0
    rep = _report(capsys)
    assert 0 < rep["ball_probability"] <= 1
    assert load_model(flow).dim == 1
    assert len(hist.read_text().splitlines()) == 4
    assert main(["train-flow", str(path), "--z", "0.1", "--epochs", "1", "-o", str(flow)]) == 1
