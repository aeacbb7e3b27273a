"""Regressors mapping flattened windows to overlap values.

Two learners live here: a small feed-forward network trained with Adam on
mean squared error, and closed-form ridge regression. Both expect rows that
were standardized with a :class:`ScalerStats` fitted on the training split.

Model file layout (all integers and reals little-endian)::

    magic    8 bytes   b"EVSMODEL"
    version  uint32    FORMAT_VERSION
    hlen     uint32    length of the JSON header in bytes
    header   hlen      UTF-8 JSON: {"kind", "config", "arrays": [{"name", "shape"}...]}
    payload            float64 arrays, C order, in header order
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .core import ConfigError, DataError, TrainingDiverged

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = b"EVSMODEL"
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class ScalerStats:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.mean.shape[0]:
            raise DataError(
                f"expected rows with {self.mean.shape[0]} columns, got shape {rows.shape}"
            )
        return (rows - self.mean) / self.std


def standardize_fit(train_rows) -> ScalerStats:
    """Per-column mean and population standard deviation.

    Constant columns get a standard deviation of 1 so they pass through as
    zeros after centering.
    """
    rows = np.asarray(train_rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise DataError("cannot fit scaler on empty input")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    std[std == 0] = 1.0
    return ScalerStats(mean, std)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    rows: np.ndarray
    target: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        target = np.asarray(self.target, dtype=np.float64).reshape(-1)
        if rows.ndim != 2:
            raise DataError("rows must be 2-D")
        if rows.shape[0] != target.shape[0]:
            raise DataError(f"{rows.shape[0]} rows but {target.shape[0]} targets")
        if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(target))):
            raise DataError("feature matrix contains NaN or Inf")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "target", target)

    def __len__(self) -> int:
        return self.rows.shape[0]


# --------------------------------------------------------------------------
# feed-forward network


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0).astype(np.float64)


def _tanh_grad(z, a):
    return 1.0 - a * a


ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
}


def _sigmoid(z):
    # split by sign to avoid overflow in exp
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class FfnConfig:
    hidden_layers: tuple[int, ...] = (20, 20)
    activation: str = "relu"
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0
    early_stop_patience: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if any(h < 1 for h in self.hidden_layers):
            raise ConfigError("hidden layer sizes must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.early_stop_patience < 0:
            raise ConfigError("early_stop_patience must be >= 0")

    @property
    def output_activation(self) -> str:
        return "logistic"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_layers"] = list(self.hidden_layers)
        return d


class FfnModel:
    """Dense network: hidden layers with ``activation``, logistic output unit."""

    kind = "ffn"

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray], config: FfnConfig):
        self.weights = weights
        self.biases = biases
        self.config = config

    @classmethod
    def init(cls, n_inputs: int, config: FfnConfig, rng: np.random.Generator) -> "FfnModel":
        sizes = [n_inputs, *config.hidden_layers, 1]
        weights, biases = [], []
        for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = 6.0 if k < len(sizes) - 2 else 3.0
            limit = math.sqrt(gain / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, config)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    def _forward(self, x: np.ndarray):
        act, _ = ACTIVATIONS[self.config.activation]
        pre, post = [], [x]
        a = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w + b
            a = act(z)
            pre.append(z)
            post.append(a)
        z = a @ self.weights[-1] + self.biases[-1]
        return _sigmoid(z[:, 0]), pre, post

    def output(self, x: np.ndarray) -> np.ndarray:
        return self._forward(x)[0]

    def loss_and_gradients(self, x: np.ndarray, y: np.ndarray):
        """MSE loss and its gradients as ``(loss, [dW...], [db...])``."""
        _, act_grad = ACTIVATIONS[self.config.activation]
        yhat, pre, post = self._forward(x)
        diff = yhat - y
        loss = float(np.mean(diff * diff))
        n = x.shape[0]
        delta = (2.0 / n) * diff * yhat * (1.0 - yhat)
        delta = delta[:, None]
        gw = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        for k in range(len(self.weights) - 1, -1, -1):
            gw[k] = post[k].T @ delta
            gb[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k].T) * act_grad(pre[k - 1], post[k])
        return loss, gw, gb

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "FfnModel":
        return FfnModel([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.config)


@dataclass
class TrainReport:
    model_name: str
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    snapshot: str = ""


def _snapshot_id(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def _mse(model: FfnModel, x, y) -> float:
    d = model.output(x) - y
    return float(np.mean(d * d))


def fit_ffn(train: FeatureMatrix, val: FeatureMatrix, config: FfnConfig, name: str = "ffn"):
    """Train a network with mini-batch Adam and early stopping on validation MSE.

    Returns ``(model, report)``; the model carries the parameters of the
    best validation epoch.
    """
    if len(train) == 0 or len(val) == 0:
        raise DataError("train and validation splits must be non-empty")
    if train.rows.shape[1] != val.rows.shape[1]:
        raise DataError("train and validation rows differ in width")
    rng = np.random.default_rng(config.seed)
    model = FfnModel.init(train.rows.shape[1], config, rng)
    p = float(np.clip(train.target.mean(), 1e-3, 1 - 1e-3))
    model.biases[-1][:] = math.log(p / (1 - p))

    params = model.parameters()
    m = [np.zeros_like(q) for q in params]
    v = [np.zeros_like(q) for q in params]
    t = 0
    lr = config.learning_rate
    report = TrainReport(model_name=name)
    best = model.copy()
    best_val = math.inf
    n = len(train)

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            _, gw, gb = model.loss_and_gradients(train.rows[idx], train.target[idx])
            grads = []
            for a, b in zip(gw, gb):
                grads += [a, b]
            t += 1
            c1 = 1.0 - ADAM_BETA1 ** t
            c2 = 1.0 - ADAM_BETA2 ** t
            for q, g, mq, vq in zip(params, grads, m, v):
                mq *= ADAM_BETA1
                mq += (1.0 - ADAM_BETA1) * g
                vq *= ADAM_BETA2
                vq += (1.0 - ADAM_BETA2) * g * g
                q -= lr * (mq / c1) / (np.sqrt(vq / c2) + ADAM_EPS)
        tr = _mse(model, train.rows, train.target)
        va = _mse(model, val.rows, val.target)
        if not (math.isfinite(tr) and math.isfinite(va)):
            raise TrainingDiverged(f"{name}: diverged at epoch {epoch}")
        report.train_loss.append(tr)
        report.val_loss.append(va)
        if va < best_val:
            best_val = va
            best = model.copy()
            report.best_epoch = epoch
        elif epoch - report.best_epoch > config.early_stop_patience:
            break
    log.debug("%s: best epoch %d, val mse %.3g", name, report.best_epoch, best_val)
    report.snapshot = _snapshot_id(best.parameters())
    return best, report


# --------------------------------------------------------------------------
# ridge


class RidgeModel:
    kind = "ridge"

    def __init__(self, weights: np.ndarray, intercept: float, lam: float):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.intercept = float(intercept)
        self.lam = float(lam)

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[0]

    def output(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x @ self.weights + self.intercept, 0.0, 1.0)

    def parameters(self) -> list[np.ndarray]:
        return [self.weights, np.array([self.intercept])]


RIDGE_MAX_CONDITION = 1e12


def fit_ridge(train: FeatureMatrix, lam: float) -> RidgeModel:
    """Solve the ridge normal equations with an unpenalized intercept."""
    lam = float(lam)
    if not lam >= 0:
        raise ConfigError(f"ridge lambda must be >= 0, got {lam}")
    x = train.rows
    n, d = x.shape
    if n == 0:
        raise DataError("cannot fit ridge on empty data")
    xa = np.hstack([x, np.ones((n, 1))])
    gram = xa.T @ xa
    gram[np.arange(d), np.arange(d)] += lam
    rhs = xa.T @ train.target
    singular = False
    if lam == 0 and np.linalg.cond(gram) > RIDGE_MAX_CONDITION:
        singular = True
    else:
        try:
            chol = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError:
            singular = True
    if singular:
        raise DataError("normal equations are singular; use a ridge lambda > 0")
    z = np.linalg.solve(chol, rhs)
    beta = np.linalg.solve(chol.T, z)
    return RidgeModel(beta[:d], beta[d], lam)


Model = Union[FfnModel, RidgeModel]


def predict(model: Model, rows) -> np.ndarray:
    """Overlap predictions in ``[0, 1]`` for already-standardized rows."""
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_inputs:
        raise DataError(
            f"model expects {model.n_inputs} inputs, got rows of shape {x.shape}"
        )
    return model.output(x)


# --------------------------------------------------------------------------
# persistence


def save_model(path, model: Model, scaler: ScalerStats | None = None) -> None:
    arrays: list[tuple[str, np.ndarray]] = []
    if scaler is not None:
        arrays += [("scaler_mean", scaler.mean), ("scaler_std", scaler.std)]
    if isinstance(model, FfnModel):
        config = model.config.to_dict()
        for k, (w, b) in enumerate(zip(model.weights, model.biases)):
            arrays += [(f"W{k}", w), (f"b{k}", b)]
    elif isinstance(model, RidgeModel):
        config = {"lambda": model.lam}
        arrays += [("weights", model.weights), ("intercept", np.array([model.intercept]))]
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    header = {
        "kind": model.kind,
        "config": config,
        "arrays": [{"name": nm, "shape": list(a.shape)} for nm, a in arrays],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(hbytes)))
        fh.write(hbytes)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path) -> tuple[Model, ScalerStats | None]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise DataError(f"{path}: not a model file")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format version {version}")
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    pos = 16 + hlen
    arrays = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arrays[spec["name"]] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * count
    scaler = None
    if "scaler_mean" in arrays:
        scaler = ScalerStats(arrays["scaler_mean"], arrays["scaler_std"])
    if header["kind"] == "ffn":
        cfg = FfnConfig(**header["config"])
        n_layers = len(cfg.hidden_layers) + 1
        model = FfnModel(
            [arrays[f"W{k}"] for k in range(n_layers)],
            [arrays[f"b{k}"] for k in range(n_layers)],
            cfg,
        )
    elif header["kind"] == "ridge":
        model = RidgeModel(arrays["weights"], arrays["intercept"][0], header["config"]["lambda"])
    else:
        raise DataError(f"{path}: unknown model kind {header['kind']!r}")
    return model, scaler
