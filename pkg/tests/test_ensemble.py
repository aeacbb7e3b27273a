import numpy as np
import pytest

from eventseer.core import ConfigError
from eventseer.ensemble import (
    AVERAGE,
    META_FFN,
    BaseConfig,
    StackedModel,
    load_stack,
    predict_stack,
    save_stack,
    train_stack,
)
from eventseer.extraction import ExtractionParams
from eventseer.regressor import FeatureMatrix, FfnConfig, RidgeModel, fit_ffn, fit_ridge, predict, standardize_fit
from eventseer.windowing import WindowSpec

SPEC = WindowSpec(2, 1, 1.0)


def linear_data(seed, n=400, d=4):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    y = np.clip(0.5 + 0.1 * x[:, 0] - 0.05 * x[:, 1], 0, 1)
    return FeatureMatrix(x, y)


def test_single_ridge_average_is_the_base():
    data = linear_data(0)
    scaler = standardize_fit(data.rows)
    stack = train_stack(data, data, scaler, SPEC, [BaseConfig("ridge", lam=1.0)], AVERAGE)
    direct = predict(fit_ridge(FeatureMatrix(scaler.transform(data.rows), data.target), 1.0),
                     scaler.transform(data.rows))
    assert np.array_equal(predict_stack(stack, data.rows), direct)


def _manual_stack(models, combiner=AVERAGE, meta=None, d=1):
    scaler = standardize_fit(np.array([[-1.0] * d, [1.0] * d]))
    return StackedModel([f"m{k}" for k in range(len(models))], models, combiner, scaler, SPEC, meta)


def test_average_of_two_constant_bases():
    a = RidgeModel(np.zeros(1), 0.2, 1.0)
    b = RidgeModel(np.zeros(1), 0.6, 1.0)
    out = predict_stack(_manual_stack([a, b]), np.zeros((3, 1)))
    assert np.allclose(out, 0.4, atol=1e-15)


def test_average_permutation_invariant_and_bounded():
    rng = np.random.default_rng(1)
    models = [RidgeModel(rng.normal(size=2), rng.uniform(), 1.0) for _ in range(4)]
    x = rng.normal(size=(50, 2))
    s1 = _manual_stack(models, d=2)
    s2 = _manual_stack(models[::-1], d=2)
    p1, p2 = predict_stack(s1, x), predict_stack(s2, x)
    assert np.allclose(p1, p2, atol=1e-15)
    base = s1.base_predictions(x)
    assert np.all(p1 >= base.min(axis=1) - 1e-15) and np.all(p1 <= base.max(axis=1) + 1e-15)


def test_meta_ffn_prefers_the_informative_base():
    """A meta network over a noise base and a near-truth base tracks the good one."""
    rng = np.random.default_rng(2)
    n = 3000
    truth = rng.uniform(size=n)
    # an exact-truth base would make the 1.1x bound demand a perfect meta fit
    rows = np.column_stack([rng.uniform(size=n), np.clip(truth + rng.normal(0, 0.1, size=n), 0, 1)])
    scaler = standardize_fit(rows)
    x = scaler.transform(rows)
    noisy = RidgeModel(np.array([0.3, 0.0]), 0.5, 1.0)
    good = RidgeModel(np.array([0.0, scaler.std[1]]), scaler.mean[1], 1.0)
    base = np.column_stack([predict(noisy, x), predict(good, x)])
    cfg = FfnConfig(hidden_layers=(8,), epochs=100, batch_size=64, learning_rate=1e-2, seed=5)
    meta, _ = fit_ffn(FeatureMatrix(base[:2400], truth[:2400]),
                      FeatureMatrix(base[2400:], truth[2400:]), cfg)
    out = predict_stack(StackedModel(["noisy", "good"], [noisy, good], META_FFN, scaler, SPEC, meta), rows)

    def mse(p):
        return float(np.mean((p[2400:] - truth[2400:]) ** 2))

    assert mse(out) <= mse(base[:, 0])
    assert mse(out) <= 1.1 * mse(base[:, 1])
    assert np.all((out >= 0) & (out <= 1))


def test_train_stack_meta_combiner_runs():
    data = linear_data(3, n=600)
    scaler = standardize_fit(data.rows)
    bases = [BaseConfig("ffn", hidden_layers=(4,), options={"epochs": 5}), BaseConfig("ridge", lam=1.0)]
    stack = train_stack(data, linear_data(4, n=200), scaler, SPEC, bases, META_FFN, seed=1)
    assert stack.meta is not None
    assert [r.model_name for r in stack.reports][-1] == "meta"
    out = predict_stack(stack, data.rows)
    assert np.all((out >= 0) & (out <= 1))


def test_train_stack_seeds_differ_per_base():
    data = linear_data(5, n=300)
    scaler = standardize_fit(data.rows)
    cfg = BaseConfig("ffn", hidden_layers=(3,), count=2, options={"epochs": 3})
    stack = train_stack(data, data, scaler, SPEC, [cfg], AVERAGE, seed=0)
    assert stack.base_names == ["ffn_3#0", "ffn_3#1"]
    a, b = stack.base_models
    assert not np.array_equal(a.weights[0], b.weights[0])


def test_unknown_combiner():
    data = linear_data(6, n=50)
    with pytest.raises(ConfigError):
        train_stack(data, data, standardize_fit(data.rows), SPEC, [BaseConfig("ridge")], "median")


def test_base_config_from_dict():
    cfg = BaseConfig.from_dict({"kind": "ridge", "lambda": 0.5})
    assert cfg.lam == 0.5 and cfg.label == "ridge_0.5"
    assert BaseConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        BaseConfig("svm")


@pytest.mark.parametrize("combiner", [AVERAGE, META_FFN])
def test_stack_roundtrip(tmp_path, combiner):
    data = linear_data(7, n=400)
    scaler = standardize_fit(data.rows)
    bases = [BaseConfig("ffn", hidden_layers=(5,), options={"epochs": 4}), BaseConfig("ridge", lam=2.0)]
    stack = train_stack(data, linear_data(8, n=200), scaler, SPEC, bases, combiner, seed=3)
    stack.extraction = ExtractionParams(3, 1.0, 0.5)
    files = save_stack(stack, tmp_path / "m")
    assert "manifest.json" in files
    loaded = load_stack(tmp_path / "m")
    assert loaded.base_names == stack.base_names
    assert loaded.combiner == combiner
    assert loaded.extraction == stack.extraction
    assert loaded.spec == SPEC
    assert np.array_equal(predict_stack(loaded, data.rows), predict_stack(stack, data.rows))


def test_two_ridges_average_is_pointwise_mean():
    data = linear_data(9)
    scaler = standardize_fit(data.rows)
    stack = train_stack(data, data, scaler, SPEC,
                        [BaseConfig("ridge", lam=0.1), BaseConfig("ridge", lam=50.0)], AVERAGE)
    x = scaler.transform(data.rows)
    xt = FeatureMatrix(x, data.target)
    want = (predict(fit_ridge(xt, 0.1), x) + predict(fit_ridge(xt, 50.0), x)) / 2
    assert np.allclose(predict_stack(stack, data.rows), want, atol=1e-15, rtol=0)
