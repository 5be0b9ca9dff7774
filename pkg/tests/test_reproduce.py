import json

import pytest

from levy_extract.flows import TrainConfig
from levy_extract.reproduce import REPORTED, ReproduceConfig, StageError, run_reproduction


def _tiny(threads):
    return ReproduceConfig(seed=3, threads=threads, n_samples=300, grid_points_1d=10,
                           drift_grid_points_1d=6, grid_points_2d=4, density_points_1d=2,
                           density_points_2d=1, epsilon_1d=0.3, epsilon_2d=0.5,
                           train=TrainConfig(epochs=2, batch_size=64))


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in root.rglob("*") if p.is_file()}


def test_tiny_reproduction_is_thread_invariant(tmp_path):
    run_reproduction(_tiny(1), tmp_path / "a")
    run_reproduction(_tiny(4), tmp_path / "b")
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert set(a) == set(b)
    assert {"summary.json", "summary.md"} <= set(a)
    for name in a:
        assert a[name] == b[name], name
    summary = json.loads(a["summary.json"])
    assert summary["ex1"]["levy"]["alpha_reported"] == REPORTED["ex1"]["alpha"]
    assert "1.58" in a["summary.md"].decode()


def test_stage_failure_names_stage(tmp_path):
    cfg = _tiny(1)
    cfg.t_star = -1.0
    with pytest.raises(StageError) as info:
        run_reproduction(cfg, tmp_path / "c")
    assert info.value.stage == "ex1/simulate"
