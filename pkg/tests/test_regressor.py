import numpy as np
import pytest

from eventseer.core import DataError, TrainingDiverged
from eventseer.regressor import (
    FeatureMatrix,
    FfnConfig,
    FfnModel,
    RidgeModel,
    fit_ffn,
    fit_ridge,
    load_model,
    predict,
    save_model,
    standardize_fit,
)

from oracles import numeric_gradient


def test_scaler_two_points():
    s = standardize_fit([[0.0], [2.0]])
    assert s.mean[0] == 1.0 and s.std[0] == 1.0


def test_scaler_constant_column():
    rows = np.array([[3.0, 1.0], [3.0, 2.0], [3.0, 5.0]])
    s = standardize_fit(rows)
    assert s.std[0] == 1.0
    assert np.all(s.transform(rows)[:, 0] == 0.0)


def test_scaler_random_matrix():
    rows = np.random.default_rng(0).normal(3, 7, size=(100, 5))
    z = standardize_fit(rows).transform(rows)
    assert np.all(np.abs(z.mean(axis=0)) < 1e-10)
    assert np.all(np.abs(z.std(axis=0) - 1) < 1e-10)


def test_scaler_empty():
    with pytest.raises(DataError):
        standardize_fit(np.zeros((0, 3)))


def test_scaler_width_mismatch():
    with pytest.raises(DataError):
        standardize_fit(np.zeros((2, 3))).transform(np.zeros((2, 2)))


def _gradient_case(seed, activation="relu", layers=(3,), n_in=4, rows=8):
    rng = np.random.default_rng(seed)
    cfg = FfnConfig(hidden_layers=layers, activation=activation, seed=seed)
    model = FfnModel.init(n_in, cfg, rng)
    for b in model.biases:
        b[:] = rng.normal(0, 0.3, size=b.shape)
    x = rng.normal(size=(rows, n_in))
    y = rng.uniform(size=rows)
    _, gw, gb = model.loss_and_gradients(x, y)
    analytic = [g for pair in zip(gw, gb) for g in pair]

    def loss():
        d = model.output(x) - y
        return float(np.mean(d * d))

    numeric = numeric_gradient(loss, model.parameters(), h=1e-4)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        worst = max(worst, float(rel.max()))
    return worst


def gradient_check_worst(n_nets=20, base_seed=100):
    """Largest per-parameter relative error over ``n_nets`` random 4-3-1 nets."""
    return max(_gradient_case(base_seed + k) for k in range(n_nets))


def test_gradient_check_relu():
    assert gradient_check_worst() < 1e-4


@pytest.mark.parametrize("layers", [(), (5,), (4, 3)])
def test_gradient_check_tanh_and_depths(layers):
    for seed in range(5):
        assert _gradient_case(seed, "tanh", layers) < 1e-4


def test_constant_target():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(600, 3))
    y = np.full(600, 0.5)
    cfg = FfnConfig(hidden_layers=(8,), epochs=100, batch_size=64, learning_rate=1e-2, seed=1)
    model, _ = fit_ffn(FeatureMatrix(x[:500], y[:500]), FeatureMatrix(x[500:], y[500:]), cfg)
    pred = predict(model, x)
    assert np.max(np.abs(pred - 0.5)) <= 0.01


def test_logistic_target_learned():
    rng = np.random.default_rng(7)
    w = rng.normal(size=5)
    x = rng.normal(size=(2000, 5))
    y = 1 / (1 + np.exp(-(x @ w)))
    cfg = FfnConfig(hidden_layers=(20, 20), epochs=200, batch_size=64, learning_rate=1e-3, seed=7,
                    early_stop_patience=20)
    model, rep = fit_ffn(FeatureMatrix(x[:1600], y[:1600]), FeatureMatrix(x[1600:], y[1600:]), cfg)
    assert rep.val_loss[rep.best_epoch] <= 1e-3
    assert len(rep.val_loss) <= 200


def test_training_deterministic_and_reports():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(300, 4))
    y = (x[:, 0] > 0).astype(float) * 0.8
    cfg = FfnConfig(hidden_layers=(6,), epochs=15, batch_size=32, seed=11)
    tr, va = FeatureMatrix(x[:240], y[:240]), FeatureMatrix(x[240:], y[240:])
    m1, r1 = fit_ffn(tr, va, cfg)
    m2, r2 = fit_ffn(tr, va, cfg)
    assert r1.train_loss == r2.train_loss and r1.val_loss == r2.val_loss
    assert r1.snapshot == r2.snapshot
    for a, b in zip(m1.parameters(), m2.parameters()):
        assert np.array_equal(a, b)
    assert r1.best_epoch == int(np.argmin(r1.val_loss))
    assert r1.train_loss[r1.best_epoch] < r1.train_loss[0] or r1.best_epoch == 0
    assert all(np.isfinite(r1.train_loss))
    p1 = predict(m1, x)
    assert np.array_equal(p1, predict(m1, x))
    assert np.all((p1 >= 0) & (p1 <= 1))


def test_early_stopping_restores_best():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(200, 3))
    y = rng.uniform(size=200)  # pure noise: validation loss stalls early
    cfg = FfnConfig(hidden_layers=(30,), epochs=200, batch_size=16, learning_rate=1e-2,
                    early_stop_patience=3, seed=2)
    va = FeatureMatrix(x[150:], y[150:])
    model, rep = fit_ffn(FeatureMatrix(x[:150], y[:150]), va, cfg)
    assert len(rep.val_loss) < 200
    assert len(rep.val_loss) == rep.best_epoch + cfg.early_stop_patience + 2
    d = predict(model, va.rows) - va.target
    assert float(np.mean(d * d)) == rep.val_loss[rep.best_epoch]


def test_divergence_names_epoch(monkeypatch):
    import eventseer.regressor as reg

    x = np.ones((10, 2))
    data = FeatureMatrix(x, np.zeros(10))
    monkeypatch.setattr(reg, "_mse", lambda *a: float("nan"))
    with pytest.raises(TrainingDiverged, match="epoch 0"):
        fit_ffn(data, data, FfnConfig(hidden_layers=(2,), epochs=3))


def test_ffn_predict_dimension_mismatch():
    model = FfnModel.init(3, FfnConfig(hidden_layers=(2,)), np.random.default_rng(0))
    with pytest.raises(DataError):
        predict(model, np.zeros((4, 2)))


def test_ridge_recovers_linear_weights():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(50, 4))
    w = np.array([0.05, -0.02, 0.03, 0.01])
    y = 0.4 + x @ w
    model = fit_ridge(FeatureMatrix(x, y), 0.0)
    assert np.max(np.abs(model.weights - w)) < 1e-8
    assert abs(model.intercept - 0.4) < 1e-8


def test_ridge_huge_lambda_goes_to_mean():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(40, 3))
    y = rng.uniform(size=40)
    model = fit_ridge(FeatureMatrix(x, y), 1e12)
    assert np.max(np.abs(model.weights)) < 1e-9
    assert np.allclose(predict(model, x), np.clip(y.mean(), 0, 1), atol=1e-9)


def test_ridge_duplicated_feature_splits_weight():
    rng = np.random.default_rng(8)
    v = rng.normal(size=30)
    y = 0.5 + 0.1 * v
    x = np.column_stack([v, v])
    lam = 1e-6
    model = fit_ridge(FeatureMatrix(x, y), lam)
    # symmetric 2x2 system on centered data: each weight = Sxy / (2 Sxx + lam)
    vc = v - v.mean()
    each = (vc @ (y - y.mean())) / (2 * (vc @ vc) + lam)
    assert abs(model.weights[0] - model.weights[1]) < 1e-6
    assert np.allclose(model.weights, each, atol=1e-6)


def test_ridge_singular_without_lambda():
    v = np.arange(10.0)
    with pytest.raises(DataError, match="lambda > 0"):
        fit_ridge(FeatureMatrix(np.column_stack([v, v]), np.zeros(10)), 0.0)


def test_ridge_clamps_extrapolation():
    x = np.array([[0.0], [1.0]])
    model = fit_ridge(FeatureMatrix(x, np.array([0.0, 1.0])), 0.0)
    out = predict(model, np.array([[-5.0], [0.5], [7.0]]))
    assert list(out) == [0.0, 0.5, 1.0]


def test_model_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    cfg = FfnConfig(hidden_layers=(4, 3), seed=9)
    model = FfnModel.init(5, cfg, rng)
    scaler = standardize_fit(rng.normal(size=(10, 5)))
    save_model(tmp_path / "m.evsm", model, scaler)
    loaded, s2 = load_model(tmp_path / "m.evsm")
    x = rng.normal(size=(7, 5))
    assert np.array_equal(predict(model, x), predict(loaded, x))
    assert np.array_equal(s2.mean, scaler.mean) and np.array_equal(s2.std, scaler.std)
    assert loaded.config == cfg

    ridge = RidgeModel(np.array([0.1, -0.2]), 0.3, 2.0)
    save_model(tmp_path / "r.evsm", ridge)
    r2, none = load_model(tmp_path / "r.evsm")
    assert none is None
    assert np.array_equal(r2.weights, ridge.weights) and r2.intercept == 0.3 and r2.lam == 2.0


def test_model_file_layout(tmp_path):
    import json
    import struct

    save_model(tmp_path / "r.evsm", RidgeModel(np.array([1.5]), -0.25, 1.0))
    data = (tmp_path / "r.evsm").read_bytes()
    assert data[:8] == b"EVSMODEL"
    version, hlen = struct.unpack_from("<II", data, 8)
    assert version == 1
    header = json.loads(data[16:16 + hlen])
    assert header["kind"] == "ridge"
    payload = np.frombuffer(data[16 + hlen:], dtype="<f8")
    assert list(payload) == [1.5, -0.25]


def test_load_rejects_garbage(tmp_path):
    (tmp_path / "x").write_bytes(b"nope")
    with pytest.raises(DataError):
        load_model(tmp_path / "x")
