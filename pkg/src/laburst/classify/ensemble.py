"""Two-stage boosting of a random forest and an RBF SVM, plus model files."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .. import MODEL_SCHEMA_VERSION
from ..features import FEATURE_NAMES, N_FEATURES
from .forest import ForestModel, train_forest
from .svm import SvmModel, logistic, train_svm_rbf

log = logging.getLogger(__name__)

ERR_CLAMP = 1e-10
# keeps logits finite for scores of exactly 0 or 1
SCORE_CLIP = 1e-12


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 1024
    max_features: int = 2


@dataclass(frozen=True)
class SvmConfig:
    c: float = 64.0
    gamma: float = 0.0625
    tol: float = 1e-3
    max_passes: int = 200


@dataclass
class EnsembleModel:
    """Boosting stages applied to the selected feature ``columns``."""

    stages: list[tuple[ForestModel | SvmModel, float]] = field(default_factory=list)
    columns: tuple[int, ...] = tuple(range(N_FEATURES))
    warnings: list[str] = field(default_factory=list)
    # weighted training error of each stage as fitted
    stage_errors: list[float] = field(default_factory=list)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def predict_score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return combine([m.predict_score(X) for m, _ in self.stages],
                       [w for _, w in self.stages])

    def select(self, X_full) -> np.ndarray:
        """Pick this model's columns out of full 12-column feature rows."""
        return np.atleast_2d(np.asarray(X_full, dtype=float))[:, list(self.columns)]

    def score_full(self, X_full) -> np.ndarray:
        return self.predict_score(self.select(X_full))

    def to_dict(self) -> dict:
        return {"schema": MODEL_SCHEMA_VERSION, "kind": "ensemble",
                "columns": list(self.columns),
                "feature_names": [FEATURE_NAMES[i] for i in self.columns],
                "stages": [{"weight": w, "model": m.to_dict()} for m, w in self.stages],
                "warnings": list(self.warnings),
                "stage_errors": list(self.stage_errors)}

    @classmethod
    def from_dict(cls, d: dict) -> EnsembleModel:
        if d.get("schema") != MODEL_SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema {d.get('schema')!r}")
        stages = [(model_from_dict(s["model"]), s["weight"]) for s in d["stages"]]
        return cls(stages, tuple(d["columns"]), list(d.get("warnings", [])),
                   list(d.get("stage_errors", [])))


def combine(scores: list[np.ndarray], weights: list[float]) -> np.ndarray:
    """Logistic of the weight-averaged stage logits."""
    total = float(sum(weights))
    if total <= 0:
        return np.full(len(scores[0]), 0.5)
    z = np.zeros_like(scores[0], dtype=float)
    for s, w in zip(scores, weights):
        if w == 0:
            continue
        p = np.clip(s, SCORE_CLIP, 1 - SCORE_CLIP)
        z += w * np.log(p / (1 - p))
    return logistic(z / total)


def model_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "forest":
        return ForestModel.from_dict(d)
    if kind == "svm":
        return SvmModel.from_dict(d)
    if kind == "ensemble":
        return EnsembleModel.from_dict(d)
    raise ValueError(f"unknown model kind {kind!r}")


def stage_weight(err: float) -> float:
    err = min(max(err, ERR_CLAMP), 1 - ERR_CLAMP)
    return float(np.log((1 - err) / err))


def train_adaboost(X, y, forest: ForestConfig = ForestConfig(), svm: SvmConfig = SvmConfig(),
                   n_stages: int = 2, rng_seed: int = 0,
                   columns: tuple[int, ...] | None = None) -> EnsembleModel:
    """SAMME boosting with the forest as stage 1 and the SVM as stage 2.

    ``X`` holds only the ``columns`` the model will use (all twelve by default).
    Stages beyond the second alternate forest and SVM.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise ValueError("boosting needs both classes")
    columns = tuple(range(X.shape[1])) if columns is None else tuple(columns)
    n = len(y)
    w = np.full(n, 1.0 / n)
    truth = y > 0.5
    model = EnsembleModel([], columns)
    for stage in range(n_stages):
        if stage % 2 == 0:
            base = train_forest(X, y, forest.n_trees, forest.max_features,
                                rng_seed + stage, sample_weight=None if stage == 0 else w)
        else:
            base = train_svm_rbf(X, y, svm.c, svm.gamma, svm.tol, svm.max_passes,
                                 sample_weight=w)
        miss = (base.predict_score(X) >= 0.5) != truth
        err = float(np.dot(w, miss) / w.sum())
        model.stage_errors.append(err)
        if err >= 0.5:
            msg = f"stage {stage + 1} weighted error {err:.3f} >= 0.5; stage skipped"
            log.warning(msg)
            model.warnings.append(msg)
            model.stages.append((base, 0.0))
            continue
        alpha = stage_weight(err)
        model.stages.append((base, alpha))
        w = w * np.exp(alpha * miss)
        w /= w.sum()
    return model


def error_bound(stage_errors) -> np.ndarray:
    """Running product of 2*sqrt(err*(1-err)), the boosting training-error bound."""
    e = np.clip(np.asarray(stage_errors, dtype=float), ERR_CLAMP, 1 - ERR_CLAMP)
    factors = np.where(e < 0.5, 2 * np.sqrt(e * (1 - e)), 1.0)
    return np.cumprod(factors)


def dumps_model(model: EnsembleModel) -> str:
    return json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))


def save_model(model: EnsembleModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))
        fh.write("\n")


def load_model(path) -> EnsembleModel:
    with open(path, encoding="utf-8") as fh:
        return EnsembleModel.from_dict(json.load(fh))
