import math

import numpy as np
import pytest
from scipy import integrate

from levy_extract.errors import EvaluationError, TrainingError
from levy_extract.flows import (MLP, AffineCoupling, FlowModel, SplineCoupling, Standardize,
                                TrainConfig, build_realnvp_flow, build_spline_flow, from_json,
                                grad_nll, load_model, nll_loss, save_model, spline_knots, to_json,
                                train)


def _perturbed(model, seed, scale=0.3):
    rng = np.random.default_rng(seed)
    model.set_params(model.get_params() + scale * rng.normal(size=model.n_params))
    return model


def test_fresh_flows_are_standard_normal():
    f1 = build_spline_flow(dim=1)
    assert f1.log_density(0.0) == pytest.approx(-0.9189385332, abs=1e-9)
    f2 = build_realnvp_flow(dim=2)
    assert f2.log_density([0.0, 0.0]) == pytest.approx(-1.8378770664, abs=1e-9)
    f3 = build_spline_flow(dim=2)
    assert f3.log_density(np.zeros((3, 2))) == pytest.approx(np.full(3, -1.8378770664), abs=1e-9)


def test_standardize_shifts_density():
    f = build_spline_flow(dim=1, shift=2.0, scale=0.5)
    # N(2, 0.25) at its mean
    assert f.log_density(2.0) == pytest.approx(-0.9189385332 - math.log(0.5), abs=1e-9)


def test_spline_knots_pin_boundaries():
    rng = np.random.default_rng(0)
    k = 6
    xk, yk, dk, _ = spline_knots(rng.normal(size=(4, k)), rng.normal(size=(4, k)),
                                 rng.normal(size=(4, k - 1)), 2.5)
    np.testing.assert_array_equal(xk[:, 0], -2.5)
    np.testing.assert_array_equal(xk[:, -1], 2.5)
    np.testing.assert_array_equal(yk[:, [0, -1]], np.tile([-2.5, 2.5], (4, 1)))
    np.testing.assert_array_equal(dk[:, [0, -1]], 1.0)
    assert np.all(np.diff(xk, axis=1) >= 2 * 2.5 * 1e-3 - 1e-15)
    assert np.all(dk > 1e-3)


def test_zero_raw_parameters_give_identity_spline():
    k = 5
    xk, yk, dk, _ = spline_knots(np.zeros((1, k)), np.zeros((1, k)), np.zeros((1, k - 1)), 3.0)
    np.testing.assert_allclose(xk, yk)
    np.testing.assert_allclose(dk, 1.0)


def test_spline_log_det_matches_jacobian():
    layer = SplineCoupling(1, bins=5, rng=np.random.default_rng(1))
    layer.set_params(0.5 * np.random.default_rng(2).normal(size=layer.n_params))
    x = np.linspace(-3.9, 3.9, 101)[:, None]
    z, ld, _ = layer.forward(x)
    h = 1e-6
    zp = layer.forward(x + h)[0]
    zm = layer.forward(x - h)[0]
    np.testing.assert_allclose(np.log((zp - zm) / (2 * h))[:, 0], ld, atol=1e-6)


def test_affine_coupling_example():
    layer = AffineCoupling(2, mask=[True, False], hidden=(4,))
    layer.mu.biases[-1][:] = math.log(2.0)
    z, ld, _ = layer.forward(np.array([[7.0, 3.0]]))
    np.testing.assert_allclose(z, [[7.0, 6.0]])
    assert ld[0] == pytest.approx(math.log(2.0))
    layer.nu.biases[-1][:] = 1.0
    layer.C = 2.0
    z, ld, _ = layer.forward(np.array([[7.0, 3.0]]))
    np.testing.assert_allclose(z, [[7.0, 3.5]])
    assert ld[0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("builder", [
    lambda: build_spline_flow(dim=1, shift=0.3, scale=0.7),
    lambda: build_spline_flow(dim=2, n_layers=3, hidden=(8, 8)),
    lambda: build_realnvp_flow(dim=2, n_layers=4, hidden=(8, 8), C=1.5),
])
def test_inverse_round_trip(builder):
    model = _perturbed(builder(), 3)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(500, model.dim)) * 1.5
    z, ld = model.forward(x)
    xr, ild = model.inverse(z)
    np.testing.assert_allclose(xr, x, atol=1e-10)
    np.testing.assert_allclose(ild, -ld, atol=1e-10)


def test_nll_is_additive():
    model = _perturbed(build_spline_flow(dim=1, hidden=(8, 8)), 5)
    a = np.random.default_rng(6).normal(size=30)
    b = np.random.default_rng(7).normal(size=20)
    assert nll_loss(model, np.concatenate([a, b])) == pytest.approx(
        nll_loss(model, a) + nll_loss(model, b), rel=1e-13)
    with pytest.raises(ValueError):
        nll_loss(model, np.empty((0, 1)))


@pytest.mark.parametrize("builder", [
    lambda: build_spline_flow(dim=1, n_layers=3, hidden=(6, 6), shift=0.2, scale=0.5),
    lambda: build_spline_flow(dim=2, n_layers=2, hidden=(5,)),
    lambda: build_realnvp_flow(dim=2, n_layers=3, hidden=(5, 5), C=1.3),
])
def test_gradient_matches_finite_differences(builder):
    model = _perturbed(builder(), 8)
    batch = np.random.default_rng(9).normal(size=(40, model.dim))
    g = grad_nll(model, batch)
    p0 = model.get_params()
    h = 1e-6
    fd = np.empty_like(p0)
    for i in range(p0.size):
        e = np.zeros_like(p0)
        e[i] = h
        model.set_params(p0 + e)
        up = nll_loss(model, batch)
        model.set_params(p0 - e)
        down = nll_loss(model, batch)
        fd[i] = (up - down) / (2 * h)
    model.set_params(p0)
    np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-6)


def test_standardize_is_frozen():
    model = build_spline_flow(dim=1, hidden=(4,), shift=1.0, scale=2.0)
    assert not model.transforms[0].trainable
    assert model.n_params == sum(t.n_params for t in model.transforms[1:])
    assert grad_nll(model, np.ones((3, 1))).size == model.n_params
    with pytest.raises(ValueError):
        model.set_params(np.zeros(model.n_params + 1))


@pytest.mark.parametrize("seed", [10, 11])
def test_density_integrates_to_one_1d(seed):
    model = _perturbed(build_spline_flow(dim=1, hidden=(8, 8), shift=0.5, scale=0.8), seed, 0.5)
    grid = np.linspace(-30, 30, 200_001)
    mass = integrate.simpson(model.density(grid), x=grid)
    assert mass == pytest.approx(1.0, abs=1e-3)


def test_density_integrates_to_one_2d():
    model = _perturbed(build_realnvp_flow(dim=2, n_layers=4, hidden=(8,), C=1.0), 12, 0.3)
    t = np.linspace(-10, 10, 801)
    xx, yy = np.meshgrid(t, t, indexing="ij")
    d = model.density(np.column_stack([xx.ravel(), yy.ravel()])).reshape(xx.shape)
    mass = integrate.simpson(integrate.simpson(d, x=t, axis=1), x=t)
    assert mass == pytest.approx(1.0, abs=1e-3)


def test_training_decreases_loss_and_fits_gaussian():
    rng = np.random.default_rng(13)
    data = 1.0 + 0.5 * rng.normal(size=4000)
    model = build_spline_flow(dim=1, hidden=(16, 16), shift=0.0, scale=1.0, seed=1)
    before = nll_loss(model, data) / data.size
    model, hist = train(model, data, TrainConfig(epochs=40, batch_size=256, learning_rate=1e-2))
    assert hist.train_nll[-1] < before
    assert hist.train_nll[-1] < hist.train_nll[0]
    want = -0.5 * math.log(2 * math.pi * 0.25)
    assert model.log_density(1.0) == pytest.approx(want, abs=0.1)


def test_training_is_deterministic():
    data = np.random.default_rng(14).normal(size=(300, 2))
    runs = []
    for _ in range(2):
        m, h = train(build_realnvp_flow(hidden=(4,), n_layers=2), data,
                     TrainConfig(epochs=3, batch_size=64, validation_fraction=0.2))
        runs.append((m.get_params(), h))
    np.testing.assert_array_equal(runs[0][0], runs[1][0])
    assert runs[0][1] == runs[1][1]
    assert len(runs[0][1].val_nll) == 3


def test_training_reports_non_finite_gradient():
    model = build_spline_flow(dim=1, hidden=(4,))
    data = np.array([[0.0], [np.nan]])
    with pytest.raises((TrainingError, EvaluationError)) as info:
        train(model, data, TrainConfig(epochs=1))
    assert isinstance(info.value, TrainingError)
    assert info.value.epoch == 1


def test_forward_flags_the_failing_transform():
    model = build_realnvp_flow(hidden=(4,), n_layers=2)
    model.transforms[2].mu.biases[-1][:] = 800.0
    with pytest.raises(EvaluationError) as info:
        model.forward(np.array([[1.0, 1.0]]))
    assert info.value.transform_index == 2


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(schedule="step")
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=0.9)


def test_history_csv(tmp_path):
    m, h = train(build_spline_flow(hidden=(4,), n_layers=1), np.zeros(10) + 0.1,
                 TrainConfig(epochs=2, batch_size=5))
    path = tmp_path / "h.csv"
    h.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_nll,val_nll"
    assert len(lines) == 3


@pytest.mark.parametrize("builder", [lambda: build_spline_flow(dim=1, shift=0.4, scale=0.1),
                                     lambda: build_realnvp_flow(dim=2, C=2.0)])
def test_json_round_trip_is_exact(builder, tmp_path):
    model = _perturbed(builder(), 15)
    path = tmp_path / "m.json"
    save_model(model, path)
    clone = load_model(path)
    x = np.random.default_rng(16).normal(size=(50, model.dim))
    np.testing.assert_array_equal(clone.log_density(x), model.log_density(x))
    np.testing.assert_array_equal(from_json(to_json(model)).get_params(), model.get_params())


def test_from_json_rejects_version():
    text = to_json(build_spline_flow(hidden=(2,), n_layers=1)).replace('"version": 1', '"version": 9')
    with pytest.raises(ValueError):
        from_json(text)


def test_model_validation():
    with pytest.raises(ValueError):
        FlowModel([])
    with pytest.raises(ValueError):
        FlowModel([Standardize([0.0], [1.0]), Standardize([0.0, 0.0], [1.0, 1.0])])
    with pytest.raises(ValueError):
        build_spline_flow(dim=1).log_density(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        AffineCoupling(2, mask=[True, True])
    with pytest.raises(ValueError):
        build_realnvp_flow(dim=1)


def test_mlp_output_starts_at_zero():
    net = MLP((3, 5, 2), np.random.default_rng(0))
    out, _ = net.forward(np.ones((4, 3)))
    np.testing.assert_array_equal(out, 0.0)
    assert net.n_params == 3 * 5 + 5 + 5 * 2 + 2
