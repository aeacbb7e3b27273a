"""Stacked ensemble of base regressors with an average or meta-network combiner."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .core import ConfigError, DataError, EventSeerError
from .extraction import ExtractionParams
from .regressor import (
    FeatureMatrix,
    FfnConfig,
    FfnModel,
    Model,
    ScalerStats,
    TrainReport,
    fit_ffn,
    fit_ridge,
    load_model,
    predict,
    save_model,
)
from .windowing import WindowSpec

log = logging.getLogger(__name__)

STACK_FORMAT_VERSION = 1
AVERAGE = "average"
META_FFN = "ffn"
COMBINERS = (AVERAGE, META_FFN)

# the meta network holds out the tail of the validation split for its own early stopping
META_HOLDOUT = 0.2


@dataclass(frozen=True)
class BaseConfig:
    """One entry of the base-model list: ``kind`` is ``"ffn"`` or ``"ridge"``."""

    kind: str
    hidden_layers: tuple[int, ...] = (20, 20)
    lam: float = 1.0
    count: int = 1
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("ffn", "ridge"):
            raise ConfigError(f"unknown base model kind {self.kind!r}")
        if self.count < 1:
            raise ConfigError("base model count must be >= 1")
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))

    @property
    def label(self) -> str:
        if self.kind == "ridge":
            return f"ridge_{self.lam:g}"
        return "ffn_" + ("x".join(str(h) for h in self.hidden_layers) or "linear")

    def ffn_config(self, seed: int) -> FfnConfig:
        return FfnConfig(hidden_layers=self.hidden_layers, seed=seed, **self.options)

    @classmethod
    def from_dict(cls, d: dict) -> "BaseConfig":
        d = dict(d)
        kind = d.pop("kind")
        hidden = tuple(d.pop("hidden_layers", (20, 20)))
        lam = float(d.pop("lambda", d.pop("lam", 1.0)))
        count = int(d.pop("count", 1))
        return cls(kind, hidden, lam, count, d)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind, "count": self.count}
        if self.kind == "ridge":
            d["lambda"] = self.lam
        else:
            d["hidden_layers"] = list(self.hidden_layers)
            d.update(self.options)
        return d


DEFAULT_STACK = (
    BaseConfig("ffn", (20, 20)),
    BaseConfig("ffn", (40, 40)),
    BaseConfig("ridge", lam=1.0),
)
DEFAULT_META = FfnConfig(hidden_layers=(8,))


@dataclass
class StackedModel:
    base_names: list[str]
    base_models: list[Model]
    combiner: str
    scaler: ScalerStats
    spec: WindowSpec
    meta: FfnModel | None = None
    extraction: ExtractionParams | None = None
    n_features: int = 0
    feature_names: tuple[str, ...] = ()
    reports: list[TrainReport] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.base_models:
            raise ConfigError("a stack needs at least one base model")
        if self.combiner not in COMBINERS:
            raise ConfigError(f"unknown combiner {self.combiner!r}")
        if self.combiner == META_FFN and self.meta is None:
            raise ConfigError("meta-network combiner without a trained meta model")

    def base_predictions(self, rows) -> np.ndarray:
        x = self.scaler.transform(rows)
        return np.column_stack([predict(m, x) for m in self.base_models])


def _combine(model: StackedModel, base: np.ndarray) -> np.ndarray:
    if model.combiner == AVERAGE:
        return base.mean(axis=1)
    return predict(model.meta, base)


def train_stack(
    train: FeatureMatrix,
    val: FeatureMatrix,
    scaler: ScalerStats,
    spec: WindowSpec,
    base_configs=DEFAULT_STACK,
    combiner: str = AVERAGE,
    seed: int = 0,
    meta_config: FfnConfig = DEFAULT_META,
) -> StackedModel:
    """Train the base models on ``train`` and, for a meta combiner, the meta network on ``val``.

    ``train`` and ``val`` hold raw (unscaled) rows; ``scaler`` is applied
    here. Base model ``k`` (counting repeated instances) uses seed
    ``seed + k``.
    """
    if not base_configs:
        raise ConfigError("at least one base model configuration is required")
    if combiner not in COMBINERS:
        raise ConfigError(f"unknown combiner {combiner!r}")
    xt = FeatureMatrix(scaler.transform(train.rows), train.target)
    xv = FeatureMatrix(scaler.transform(val.rows), val.target)

    names, models, reports = [], [], []
    k = 0
    for cfg in base_configs:
        for rep in range(cfg.count):
            name = cfg.label if cfg.count == 1 else f"{cfg.label}#{rep}"
            if name in names:
                name = f"{name}@{k}"
            try:
                if cfg.kind == "ridge":
                    model = fit_ridge(xt, cfg.lam)
                    report = TrainReport(name, best_epoch=0)
                    d = predict(model, xt.rows) - xt.target
                    report.train_loss.append(float(np.mean(d * d)))
                    d = predict(model, xv.rows) - xv.target
                    report.val_loss.append(float(np.mean(d * d)))
                else:
                    model, report = fit_ffn(xt, xv, cfg.ffn_config(seed + k), name=name)
            except EventSeerError as exc:
                raise type(exc)(f"base model {name} failed: {exc}") from exc
            log.info("trained %s (val mse %.4g)", name, report.val_loss[report.best_epoch])
            names.append(name)
            models.append(model)
            reports.append(report)
            k += 1

    meta = None
    if combiner == META_FFN:
        base_val = np.column_stack([predict(m, xv.rows) for m in models])
        cut = int(round(len(xv) * (1 - META_HOLDOUT)))
        if cut < 1 or cut >= len(xv):
            raise DataError("validation split too small to train the meta network")
        mcfg = replace(meta_config, seed=seed + k)
        meta, mrep = fit_ffn(
            FeatureMatrix(base_val[:cut], xv.target[:cut]),
            FeatureMatrix(base_val[cut:], xv.target[cut:]),
            mcfg,
            name="meta",
        )
        reports.append(mrep)
    return StackedModel(
        base_names=names,
        base_models=models,
        combiner=combiner,
        scaler=scaler,
        spec=spec,
        meta=meta,
        n_features=train.rows.shape[1] // spec.width,
        reports=reports,
    )


def predict_stack(model: StackedModel, rows) -> np.ndarray:
    """Combined overlap prediction for raw (unscaled) window rows."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.scaler.mean.shape[0]:
        raise DataError(
            f"stack expects rows of width {model.scaler.mean.shape[0]}, got shape {rows.shape}"
        )
    return _combine(model, model.base_predictions(rows))


# --------------------------------------------------------------------------
# persistence: a directory with one file per model plus manifest.json


def save_stack(model: StackedModel, directory) -> list[str]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    bases = []
    for k, (name, m) in enumerate(zip(model.base_names, model.base_models)):
        fn = f"base_{k}.evsm"
        save_model(d / fn, m, model.scaler)
        bases.append({"name": name, "file": fn, "kind": m.kind})
        files.append(fn)
    combiner: dict[str, Any] = {"kind": model.combiner}
    if model.meta is not None:
        save_model(d / "combiner.evsm", model.meta)
        combiner["file"] = "combiner.evsm"
        files.append("combiner.evsm")
    manifest = {
        "format_version": STACK_FORMAT_VERSION,
        "model_format_version": 1,
        "bases": bases,
        "combiner": combiner,
        "window_spec": {"width": model.spec.width, "step": model.spec.step,
                        "width_events": model.spec.width_events},
        "n_features": model.n_features,
        "feature_names": list(model.feature_names),
        "extraction": model.extraction.to_dict() if model.extraction else None,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    files.append("manifest.json")
    return files


def load_stack(directory) -> StackedModel:
    d = Path(directory)
    path = d / "manifest.json"
    if not path.is_file():
        raise DataError(f"{d}: no stack manifest found")
    manifest = json.loads(path.read_text())
    if manifest.get("format_version") != STACK_FORMAT_VERSION:
        raise DataError(f"{d}: unsupported stack format {manifest.get('format_version')}")
    names, models = [], []
    scaler = None
    for entry in manifest["bases"]:
        m, s = load_model(d / entry["file"])
        names.append(entry["name"])
        models.append(m)
        scaler = scaler or s
    meta = None
    if manifest["combiner"]["kind"] == META_FFN:
        meta, _ = load_model(d / manifest["combiner"]["file"])
    ex = manifest.get("extraction")
    ws = manifest["window_spec"]
    return StackedModel(
        base_names=names,
        base_models=models,
        combiner=manifest["combiner"]["kind"],
        scaler=scaler,
        spec=WindowSpec(ws["width"], ws["step"], ws["width_events"]),
        meta=meta,
        extraction=ExtractionParams(**ex) if ex else None,
        n_features=manifest["n_features"],
        feature_names=tuple(manifest.get("feature_names", ())),
    )
