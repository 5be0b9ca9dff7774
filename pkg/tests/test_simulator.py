import json
import math

import numpy as np
import pytest
from scipy import stats

from levy_extract import systems
from levy_extract.errors import DomainError, ParseError, SchemaError, SimulationError
from levy_extract.simulator import (BurstDataset, SdeModel, SimConfig, default_grid, em_step,
                                    load_dataset, save_dataset, simulate_burst)
from levy_extract.stable import StableParams, sample_isotropic_vector


def _model(drift, alpha=1.5, sigma=1.0, dim=1):
    return SdeModel(drift, StableParams(alpha, sigma, dim))


def test_em_step_deterministic_example():
    model = _model(systems.linear(-1.0), sigma=0.0)
    out = em_step(model, np.array([1.0]), 0.1, np.random.default_rng(0))
    assert out == pytest.approx([0.9], abs=1e-15)


def test_em_step_batch_and_errors():
    model = _model(systems.zero, dim=2)
    out = em_step(model, np.zeros((5, 2)), 0.01, np.random.default_rng(0))
    assert out.shape == (5, 2)
    with pytest.raises(DomainError):
        em_step(model, np.zeros(2), 0.0, np.random.default_rng(0))
    bad = _model(lambda x: x / 0.0 * 0.0, dim=1)
    with np.errstate(all="ignore"), pytest.raises(SimulationError) as info:
        em_step(bad, np.array([0.0]), 0.1, np.random.default_rng(0))
    np.testing.assert_array_equal(info.value.state, [0.0])


def test_one_step_burst_example():
    model = _model(systems.ex1, sigma=0.0)
    ds = simulate_burst(model, SimConfig([[1.0]], n_samples_per_z=3, dt=0.001), 0.001)
    np.testing.assert_allclose(ds.x, 1.003, atol=1e-15)


@pytest.mark.parametrize("dt", [None, 0.01, 0.003])
def test_deterministic_limit_matches_explicit_euler(dt):
    model = _model(systems.ex2, sigma=0.0, dim=2)
    grid = np.array([[0.5, -1.0], [1.2, 0.3]])
    t_star = 0.05
    ds = simulate_burst(model, SimConfig(grid, n_samples_per_z=2, dt=dt), t_star)
    steps = 1 if dt is None else math.ceil(t_star / dt - 1e-9)
    h = t_star / steps
    for k, z in enumerate(grid):
        x = z.copy()
        for _ in range(steps):
            x = x + systems.ex2(x[None, :])[0] * h
        np.testing.assert_array_equal(ds.x[2 * k:2 * k + 2], np.tile(x, (2, 1)))


def test_zero_drift_increment_is_scaled_stable_draw():
    model = _model(systems.zero, alpha=1.5, sigma=1.0)
    ds = simulate_burst(model, SimConfig([[0.0]], n_samples_per_z=100_000, seed=3), 0.001)
    scaled = ds.increments[:, 0] / 0.001 ** (2 / 3)
    ref = sample_isotropic_vector(StableParams(1.5, 1.0, 1), np.random.default_rng(4), 100_000)[:, 0]
    assert stats.ks_2samp(scaled, ref).pvalue > 1e-3


def test_zero_drift_independent_of_dt():
    model = _model(systems.zero, alpha=1.5, sigma=0.8, dim=2)
    one = simulate_burst(model, SimConfig([[0.0, 0.0]], 50_000, seed=5), 0.01)
    many = simulate_burst(model, SimConfig([[0.0, 0.0]], 50_000, dt=0.001, seed=6), 0.01)
    r1 = np.linalg.norm(one.increments, axis=1)
    r2 = np.linalg.norm(many.increments, axis=1)
    assert stats.ks_2samp(r1, r2).pvalue > 1e-3


def test_heavy_tail_kurtosis_grows():
    model = _model(systems.zero, alpha=1.2)
    ds = simulate_burst(model, SimConfig([[0.0]], 1_000_000, seed=7), 1.0)
    inc = ds.increments[:, 0]
    kurt = [stats.kurtosis(inc[:n]) for n in (1_000, 10_000, 100_000, 1_000_000)]
    assert all(b > a for a, b in zip(kurt, kurt[1:]))


def test_seed_determinism_and_thread_invariance():
    model = _model(systems.ex1)
    grid = default_grid(1, 12)
    a = simulate_burst(model, SimConfig(grid, 200, seed=11, threads=1), 0.001)
    b = simulate_burst(model, SimConfig(grid, 200, seed=11, threads=4), 0.001)
    c = simulate_burst(model, SimConfig(grid, 200, seed=12, threads=4), 0.001)
    assert a == b
    np.testing.assert_array_equal(a.x, b.x)
    assert a != c


def test_default_grids():
    g1 = default_grid(1)
    assert g1.shape == (100, 1)
    assert g1[0, 0] == -2.5 and g1[-1, 0] == 2.5
    g2 = default_grid(2)
    assert g2.shape == (441, 2)
    assert g2.min() == -2.0 and g2.max() == 2.0


def test_blow_up_is_counted():
    model = _model(lambda x: x ** 5, sigma=1e-6)
    with np.errstate(over="ignore"):
        ds = simulate_burst(model, SimConfig([[0.0], [1e80]], 10, dt=0.1, seed=0), 1.0)
    assert ds.metadata["aborted_trajectories"] == 10
    assert len(ds) == 10


def test_simulate_validation():
    model = _model(systems.ex1)
    with pytest.raises(DomainError):
        simulate_burst(model, SimConfig([[0.0]], 10), 0.0)
    with pytest.raises(DomainError):
        simulate_burst(model, SimConfig([[0.0, 0.0]], 10), 0.1)
    with pytest.raises(DomainError):
        SimConfig([[0.0]], 0)
    with pytest.raises(DomainError):
        SimConfig([[0.0]], 10, dt=-1.0)


def test_drift_exception_carries_context():
    def broken(x):
        raise RuntimeError("boom")
    with pytest.raises(SimulationError) as info:
        simulate_burst(_model(broken), SimConfig([[0.5]], 3, threads=1), 0.1)
    assert info.value.step == 0
    np.testing.assert_array_equal(info.value.z, [0.5])


def test_round_trip(tmp_path):
    ds = simulate_burst(_model(systems.ex2, dim=2), SimConfig(default_grid(2, 3), 7, seed=2), 1e-3)
    path = tmp_path / "d.csv"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back == ds
    np.testing.assert_array_equal(back.x, ds.x)
    side = json.loads((tmp_path / "d.csv.json").read_text())
    assert side["t_star"] == 1e-3 and side["dim"] == 2 and side["seed"] == 2
    assert side["aborted_trajectories"] == 0
    assert (tmp_path / "d.csv").read_text().splitlines()[1] == "z_1,z_2,x_1,x_2"


def test_load_from_sidecar_only(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("z_1,x_1\n0.5,0.75\n")
    (tmp_path / "d.csv.json").write_text(json.dumps({"t_star": 0.01, "dim": 1}))
    ds = load_dataset(path)
    assert ds.t_star == 0.01 and ds.x[0, 0] == 0.75


@pytest.mark.parametrize("text, exc, line", [
    ("# t_star=0.1,dim=1\nz_1,x_2\n1,2\n", SchemaError, None),
    ("# t_star=0.1,dim=1\nz_1,x_1\n", SchemaError, None),
    ("# t_star=0.1,dim=1\nz_1,x_1\n1,2\n3,abc\n", ParseError, 4),
    ("# t_star=0.1,dim=1\nz_1,x_1\n1,2\n1,2,3\n", ParseError, 4),
    ("# t_star=zz,dim=1\nz_1,x_1\n1,2\n", ParseError, 1),
    ("z_1,x_1\n1,2\n", SchemaError, None),
    ("# t_star=0.1,dim=2\nz_1,x_1\n1,2\n", SchemaError, None),
])
def test_load_errors(tmp_path, text, exc, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(exc) as info:
        load_dataset(path)
    if line is not None:
        assert info.value.line == line
        assert str(info.value).startswith(f"line {line}:")


def test_dataset_invariants():
    with pytest.raises(SchemaError):
        BurstDataset(0.0, [[0.0]], [[1.0]])
    with pytest.raises(SchemaError):
        BurstDataset(0.1, [[0.0, 1.0]], [[1.0]])
    with pytest.raises(SchemaError):
        BurstDataset(0.1, np.empty((0, 1)), np.empty((0, 1)))


def test_rows_for():
    ds = BurstDataset(0.1, [[0.0], [0.0], [1.0]], [[0.1], [0.2], [1.1]])
    np.testing.assert_array_equal(ds.rows_for([1.0]), [2])
    assert ds.rows_for([0.9]).size == 0
    np.testing.assert_array_equal(ds.rows_for([0.9], nearest=True), [2])
    assert len(ds.records) == 3
